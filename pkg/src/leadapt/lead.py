"""Lead-mode motion: grid path planning, path following, and the two-phase
bearing/range servo that puts the robot inside the interaction band.

The planner works on an inflated occupancy grid and tracks costs as exact
(straight, diagonal) step counts; the float cost is derived once at the end,
so equal-cost paths compare identically across runs.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.ndimage import distance_transform_edt

from .config import LeadParams, RobotGeometry, Variant
from .control import ControlCommand, Prompt
from .errors import GoalOccupied, PathBlocked, ServoLost
from .geometry import Pose2, wrap_angle
from .perception import TargetEstimate
from .placement import StopGoalResult
from .world import World

SQRT2 = math.sqrt(2.0)
START_SNAP_RADIUS = 0.3


@dataclass(frozen=True)
class PathPlan:
    waypoints: tuple[Pose2, ...]
    cost_m: float
    steps: tuple[int, int]        # (straight, diagonal) moves

    def goal(self) -> Pose2:
        return self.waypoints[-1]


def _passable_mask(world: World, inflation: float) -> np.ndarray:
    occ = world.occupancy()
    dist = distance_transform_edt(~occ) * world.grid.resolution
    return ~occ & (dist >= inflation)


def _snap_cell(grid, mask: np.ndarray, pose: Pose2, radius: float) -> tuple[int, int] | None:
    r, c = grid.cell_of(pose.x, pose.y)
    if 0 <= r < grid.rows and 0 <= c < grid.cols and mask[r, c]:
        return (r, c)
    n = int(math.ceil(radius / grid.resolution))
    best = None
    best_d = math.inf
    for dr in range(-n, n + 1):
        for dc in range(-n, n + 1):
            r2, c2 = r + dr, c + dc
            if not (0 <= r2 < grid.rows and 0 <= c2 < grid.cols) or not mask[r2, c2]:
                continue
            x, y = grid.center_of(r2, c2)
            d = math.hypot(x - pose.x, y - pose.y)
            if d <= radius and d < best_d:
                best_d = d
                best = (r2, c2)
    return best


def plan_path(world: World, start: Pose2, goal: Pose2,
              robot_radius: float = 0.35, inflate: float = 0.05) -> PathPlan:
    """Optimal 8-connected A* on the inflated grid (octile heuristic, no corner
    cutting), deterministic tie-break by (f, h, cell index).

    The start snaps to the nearest passable cell within 0.3 m (the robot may
    legitimately sit inside the inflation ring after servoing close to a
    target); the goal must be passable as given.
    """
    grid = world.grid
    res = grid.resolution
    mask = _passable_mask(world, robot_radius + inflate)
    goal_cell = grid.cell_of(goal.x, goal.y)
    if not (0 <= goal_cell[0] < grid.rows and 0 <= goal_cell[1] < grid.cols) \
            or not mask[goal_cell]:
        raise GoalOccupied(f"goal cell {goal_cell} blocked after inflation")
    start_cell = _snap_cell(grid, mask, start, START_SNAP_RADIUS)
    if start_cell is None:
        raise PathBlocked("start cell blocked after inflation")
    if start_cell == goal_cell:
        return PathPlan(waypoints=(Pose2(goal.x, goal.y, goal.heading),),
                        cost_m=0.0, steps=(0, 0))

    rows, cols = mask.shape
    gr, gc = goal_cell

    def heuristic(r: int, c: int) -> float:
        dr_, dc_ = abs(r - gr), abs(c - gc)
        return (max(dr_, dc_) - min(dr_, dc_)) + min(dr_, dc_) * SQRT2

    start_h = heuristic(*start_cell)
    open_heap = [(start_h, start_h, start_cell[0] * cols + start_cell[1],
                  start_cell, (0, 0))]
    best_g: dict[tuple[int, int], float] = {start_cell: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    closed: set[tuple[int, int]] = set()
    goal_steps = None
    while open_heap:
        f, h, _, cell, steps = heapq.heappop(open_heap)
        if cell in closed:
            continue
        closed.add(cell)
        if cell == goal_cell:
            goal_steps = steps
            break
        r, c = cell
        a, b = steps
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                r2, c2 = r + dr, c + dc
                if not (0 <= r2 < rows and 0 <= c2 < cols) or not mask[r2, c2]:
                    continue
                if dr != 0 and dc != 0 and not (mask[r, c2] and mask[r2, c]):
                    continue
                na, nb = (a, b + 1) if (dr != 0 and dc != 0) else (a + 1, b)
                g2 = na + nb * SQRT2
                prev = best_g.get((r2, c2))
                if prev is not None and g2 >= prev:
                    continue
                best_g[(r2, c2)] = g2
                parent[(r2, c2)] = cell
                h2 = heuristic(r2, c2)
                heapq.heappush(open_heap, (g2 + h2, h2, r2 * cols + c2, (r2, c2), (na, nb)))
    if goal_steps is None:
        raise PathBlocked("no path to goal")

    cells = [goal_cell]
    while cells[-1] != start_cell:
        cells.append(parent[cells[-1]])
    cells.reverse()
    waypoints = []
    for i, (r, c) in enumerate(cells):
        x, y = grid.center_of(r, c)
        if i + 1 < len(cells):
            nx, ny = grid.center_of(*cells[i + 1])
            heading = math.atan2(ny - y, nx - x)
            waypoints.append(Pose2(x, y, heading))
        else:
            waypoints.append(Pose2(goal.x, goal.y, goal.heading))
    a, b = goal_steps
    return PathPlan(waypoints=tuple(waypoints), cost_m=(a + b * SQRT2) * res,
                    steps=(a, b))


def follow_step(plan: PathPlan, pose: Pose2, speed_cap: float, dt: float,
                lookahead: float = 0.4, arrive_tol: float = 0.15) -> ControlCommand:
    """Pure-pursuit toward the first waypoint beyond the lookahead; reports
    done inside the arrival tolerance of the final waypoint."""
    final = plan.waypoints[-1]
    if pose.distance_to(final.xy) <= arrive_tol:
        return ControlCommand(done=True, heading_cmd=final.heading)
    # Chase the first waypoint beyond the lookahead circle, searching forward
    # from the closest one so progress along the path is monotone.
    nearest = min(range(len(plan.waypoints)),
                  key=lambda i: pose.distance_to(plan.waypoints[i].xy))
    target = final
    for wp in plan.waypoints[nearest:]:
        if pose.distance_to(wp.xy) > lookahead:
            target = wp
            break
    dx, dy = target.x - pose.x, target.y - pose.y
    dist = math.hypot(dx, dy) or 1e-12
    return ControlCommand(vx=speed_cap * dx / dist, vy=speed_cap * dy / dist,
                          heading_cmd=math.atan2(dy, dx))


def dock_step(pose: Pose2, goal: Pose2, speed_cap: float, dt: float,
              tol: float = 0.03) -> ControlCommand:
    """Slow exact approach onto a continuous pose (used to settle precisely on
    the stop goal after the grid path is done)."""
    dx, dy = goal.x - pose.x, goal.y - pose.y
    dist = math.hypot(dx, dy)
    if dist <= tol:
        return ControlCommand(done=True, heading_cmd=goal.heading)
    speed = min(speed_cap, dist / dt)
    return ControlCommand(vx=speed * dx / dist, vy=speed * dy / dist,
                          heading_cmd=goal.heading)


class ServoPhase(Enum):
    ROTATE = "rotate"
    APPROACH = "approach"
    DONE = "done"


@dataclass(frozen=True)
class ServoState:
    phase: ServoPhase = ServoPhase.ROTATE
    bearing_error: float = 0.0
    range: float = 0.0
    missed: int = 0


def servo_step(state: ServoState, bearing: float, range_m: float,
               params: LeadParams, dt: float) -> tuple[ControlCommand, ServoState]:
    """One tick of the two-phase servo: rotate the target bearing to center,
    then regulate range into the interaction band.

    Commands are robot-frame (vx = forward). The rotation rate is clamped so
    the bearing error never overshoots, which keeps |bearing| monotone during
    the Rotate phase.
    """
    bearing = wrap_angle(bearing)
    in_band = params.band_near <= range_m <= params.band_far
    aligned = abs(bearing) <= params.bearing_tol
    turn = max(-params.turn_rate_cap, min(params.turn_rate_cap, bearing / dt))
    if state.phase is ServoPhase.ROTATE and not aligned:
        cmd = ControlCommand(heading_cmd=turn * dt, frame="robot")
        new = replace(state, bearing_error=bearing, range=range_m, missed=0)
        return cmd, new
    if aligned and in_band:
        return (ControlCommand(frame="robot", done=True,),
                replace(state, phase=ServoPhase.DONE, bearing_error=bearing,
                        range=range_m, missed=0))
    # Approach: regulate range toward the middle of the band, trimming residual
    # bearing. Aiming at the midpoint (not the band edge) means the step lands
    # strictly inside the band instead of creeping asymptotically onto its
    # boundary.
    mid = 0.5 * (params.band_near + params.band_far)
    if range_m > params.band_far:
        forward = min(params.speed_cap, (range_m - mid) / dt)
    elif range_m < params.band_near:
        forward = -min(params.speed_cap, (mid - range_m) / dt)
    else:
        forward = 0.0
    cmd = ControlCommand(vx=forward, heading_cmd=turn * dt, frame="robot")
    return cmd, replace(state, phase=ServoPhase.APPROACH, bearing_error=bearing,
                        range=range_m, missed=0)


def servo_miss(state: ServoState, params: LeadParams) -> tuple[ControlCommand, ServoState]:
    """Detection dropped this tick: hold position; too many in a row is a
    lost servo."""
    missed = state.missed + 1
    if missed > params.servo_lost_limit:
        raise ServoLost(f"target lost for {missed} consecutive ticks")
    return ControlCommand(frame="robot"), replace(state, missed=missed)


def emit_prompts(result: StopGoalResult, target: TargetEstimate,
                 variant: Variant = Variant.FULL) -> list[Prompt]:
    """Voice prompts once the robot has settled: which side to stand on, then
    the target height (rounded to 0.05 m). The baseline variant skips the side
    prompt."""
    prompts = []
    if variant is Variant.FULL:
        prompts.append(Prompt(text=f"please stand on the {result.side.value} side of the robot"))
    height = round(target.height / 0.05) * 0.05
    prompts.append(Prompt(text=f"target at height {height:.2f} meters"))
    return prompts
