"""Task-aware goal computation.

The stop goal answers "where should the robot halt so the user can work the
object": a grid search over poses near the target trading off clearance,
approach distance, and overlap with the region the object sweeps while it
moves. End goals answer "where does the task finish" per object kind.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from shapely import contains_xy

from .config import PlacementWeights, RobotGeometry
from .errors import NoEndGoal, OutOfBounds, Unreachable
from .geometry import Pose2
from .perception import TargetEstimate
from .world import MainObject, ObjectKind, World, current_polygons, swept_region

END_GOAL_SNAP_RADIUS = 0.8
DOOR_CROSS_DEPTH = 1.0


class Side(Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class StopGoalResult:
    pose: Pose2
    side: Side
    cost_total: float
    cost_c: float
    cost_d: float
    cost_m: float
    feasible_count: int


@dataclass(frozen=True)
class EndGoal:
    pose: Pose2


def object_centroid(obj: MainObject) -> tuple[float, float]:
    polys = current_polygons(obj)
    if not polys:
        k = obj.kinematics   # fully open elevator: fall back to the gap line
        return ((k.gap_a[0] + k.gap_b[0]) / 2.0, (k.gap_a[1] + k.gap_b[1]) / 2.0)
    sx = sy = n = 0
    for poly in polys:
        for (x, y) in poly:
            sx += x
            sy += y
            n += 1
    return (sx / n, sy / n)


def select_user_side(robot_stop: Pose2, target: TargetEstimate, obj: MainObject,
                     kind: ObjectKind | None = None) -> Side:
    """Which side of the robot the user should stand on.

    Doors and chairs put the user toward the object's bulk (they must push or
    pull it); elevators put the user away from it (they hold the call button
    while the robot waits clear of the doors). Colinear geometry defaults
    Right.
    """
    kind = kind or obj.kind
    hx, hy = math.cos(robot_stop.heading), math.sin(robot_stop.heading)
    cx, cy = object_centroid(obj)
    vx, vy = cx - target.center[0], cy - target.center[1]
    s = hx * vy - hy * vx
    if kind is ObjectKind.ELEVATOR:
        return Side.LEFT if s < 0 else Side.RIGHT
    return Side.LEFT if s > 0 else Side.RIGHT


def user_stand_point(pose: Pose2, side: Side, geometry: RobotGeometry) -> tuple[float, float]:
    """Nominal user position for a robot pose: lateral offset on the chosen
    side, slightly behind the robot's head."""
    hx, hy = math.cos(pose.heading), math.sin(pose.heading)
    px, py = -hy, hx                       # robot's left
    lat = geometry.lateral_offset if side is Side.LEFT else -geometry.lateral_offset
    return (pose.x - geometry.back_offset * hx + lat * px,
            pose.y - geometry.back_offset * hy + lat * py)


def _footprint_offsets(resolution: float, radius: float) -> list[tuple[int, int]]:
    n = int(math.ceil(radius / resolution))
    out = []
    for dr in range(-n, n + 1):
        for dc in range(-n, n + 1):
            if math.hypot(dr, dc) * resolution <= radius:
                out.append((dr, dc))
    return out


def compute_stop_goal(world: World, target: TargetEstimate, obj: MainObject,
                      weights: PlacementWeights, geometry: RobotGeometry) -> StopGoalResult:
    """Minimize w_c*clearance_shortfall + w_d*distance + w_m*sweep_overlap over
    free cells near the target, with hard feasibility: collision-free footprint
    and the user stand-point within arm reach (+ leash slack) of the target.

    Ties break to the smaller (row, col) cell. Raises Unreachable when the
    feasible set is empty.
    """
    grid = world.grid
    res = grid.resolution
    tx, ty = target.center
    if not grid.in_bounds(tx, ty):
        raise OutOfBounds(f"target ({tx:.2f}, {ty:.2f}) outside map")
    occ = world.occupancy()
    cand_radius = weights.candidate_radius
    rad_cells = int(math.ceil(cand_radius / res)) + 1
    tr, tc = grid.cell_of(tx, ty)
    r0, r1 = max(tr - rad_cells, 0), min(tr + rad_cells + 1, grid.rows)
    c0, c1 = max(tc - rad_cells, 0), min(tc + rad_cells + 1, grid.cols)

    rr, cc = np.mgrid[r0:r1, c0:c1]
    xs = (cc + 0.5) * res
    ys = (rr + 0.5) * res
    dist = np.hypot(xs - tx, ys - ty)
    cand = (~occ[r0:r1, c0:c1]) & (dist <= cand_radius)
    if not cand.any():
        raise Unreachable("no free cells near the target")

    rows = rr[cand]
    cols = cc[cand]
    cxs = xs[cand]
    cys = ys[cand]
    dists = dist[cand]
    headings = np.arctan2(ty - cys, tx - cxs)

    margins = world.clearance_many(np.column_stack((cxs, cys)), geometry.robot_radius)

    # Sweep-overlap fraction per candidate footprint.
    region = swept_region(obj)
    in_sweep = np.zeros_like(occ, dtype=bool)
    minx, miny, maxx, maxy = region.bounds
    sr0 = max(int(miny / res) - 1, 0)
    sr1 = min(int(maxy / res) + 2, grid.rows)
    sc0 = max(int(minx / res) - 1, 0)
    sc1 = min(int(maxx / res) + 2, grid.cols)
    if sr1 > sr0 and sc1 > sc0:
        scc, srr = np.meshgrid(np.arange(sc0, sc1), np.arange(sr0, sr1))
        sxs = (scc + 0.5) * res
        sys_ = (srr + 0.5) * res
        mask = contains_xy(region, sxs.ravel(), sys_.ravel()).reshape(srr.shape)
        in_sweep[sr0:sr1, sc0:sc1] = mask
    offsets = _footprint_offsets(res, geometry.robot_radius)
    pad = int(math.ceil(geometry.robot_radius / res)) + 1
    padded = np.pad(in_sweep, pad, constant_values=False)
    overlap_counts = np.zeros(len(rows), dtype=np.int64)
    for (dr, dc) in offsets:
        overlap_counts += padded[rows + dr + pad, cols + dc + pad]
    frac = overlap_counts / len(offsets)

    reach_limit = geometry.arm_reach + geometry.leash_slack
    best = None
    best_key = None
    feasible = 0
    order = np.lexsort((cols, rows))
    for i in order:
        if margins[i] < 0.0:
            continue
        pose = Pose2(float(cxs[i]), float(cys[i]), float(headings[i]))
        side = select_user_side(pose, target, obj)
        sx, sy = user_stand_point(pose, side, geometry)
        if math.hypot(sx - tx, sy - ty) > reach_limit:
            continue
        feasible += 1
        cost_c = max(0.0, (weights.safe_clearance - float(margins[i])) / weights.safe_clearance)
        cost_d = float(dists[i])
        cost_m = float(frac[i])
        total = (weights.clearance_weight * cost_c
                 + weights.distance_weight * cost_d
                 + weights.motion_weight * cost_m)
        if best_key is None or total < best_key:
            best_key = total
            best = StopGoalResult(pose=pose, side=side, cost_total=total,
                                  cost_c=cost_c, cost_d=cost_d, cost_m=cost_m,
                                  feasible_count=0)
    if best is None:
        raise Unreachable("no feasible stop pose near the target")
    return replace(best, feasible_count=feasible)


def _snap_to_free(world: World, nominal: tuple[float, float], radius: float,
                  robot_radius: float) -> tuple[float, float] | None:
    """Nearest cell center to ``nominal`` whose robot footprint is free."""
    grid = world.grid
    res = grid.resolution
    n = int(math.ceil(radius / res))
    nr, nc = grid.cell_of(*nominal)
    best = None
    best_d = math.inf
    occ = world.occupancy()
    for dr in range(-n, n + 1):
        for dc in range(-n, n + 1):
            r, c = nr + dr, nc + dc
            if not (0 <= r < grid.rows and 0 <= c < grid.cols) or occ[r, c]:
                continue
            x, y = grid.center_of(r, c)
            d = math.hypot(x - nominal[0], y - nominal[1])
            if d > radius or d >= best_d:
                continue
            if world.clearance((x, y), robot_radius) < 0.0:
                continue
            best_d = d
            best = (x, y)
    return best


def _terminal_world(world: World, obj: MainObject) -> World:
    _, hi = obj.state_range()
    objects = [replace(o, state=hi) if o.id == obj.id else o
               for o in world.objects.values()]
    return World(world.grid, objects=objects, targets=list(world.targets.values()))


def compute_end_goal(world: World, obj: MainObject, kind: ObjectKind | None = None,
                     approach_pose: Pose2 | None = None,
                     geometry: RobotGeometry | None = None,
                     min_clearance: float | None = None) -> EndGoal:
    """Where the task leg finishes, judged against the object's terminal state.

    Doors: 1 m past the doorway centerline on the side away from the approach.
    Elevators: cabin centroid. Chairs: centered in the strip the chair vacated,
    heading the way the seated user will face.

    ``min_clearance`` raises the snap threshold above the bare footprint
    radius; callers that plan to the result should pass the planner's inflated
    radius so the snapped cell is accepted as a goal.
    """
    kind = kind or obj.kind
    geometry = geometry or RobotGeometry()
    if min_clearance is None:
        min_clearance = geometry.robot_radius
    terminal = _terminal_world(world, obj)
    if kind is ObjectKind.DOOR:
        k = obj.kinematics
        verts = obj.footprint
        n = len(verts)
        p0, p1 = max(((verts[i], verts[(i + 1) % n]) for i in range(n)),
                     key=lambda e: math.hypot(e[1][0] - e[0][0], e[1][1] - e[0][1]))
        ex, ey = p1[0] - p0[0], p1[1] - p0[1]
        elen = math.hypot(ex, ey) or 1e-12
        ux, uy = ex / elen, ey / elen
        far = max(verts, key=lambda v: math.hypot(v[0] - k.hinge[0], v[1] - k.hinge[1]))
        if ux * (far[0] - k.hinge[0]) + uy * (far[1] - k.hinge[1]) < 0:
            ux, uy = -ux, -uy
        mid = (k.hinge[0] + ux * elen / 2.0, k.hinge[1] + uy * elen / 2.0)
        px, py = -uy, ux
        if approach_pose is not None:
            if px * (approach_pose.x - mid[0]) + py * (approach_pose.y - mid[1]) > 0:
                px, py = -px, -py          # cross away from the approach side
        nominal = (mid[0] + px * DOOR_CROSS_DEPTH, mid[1] + py * DOOR_CROSS_DEPTH)
        heading = math.atan2(py, px)
    elif kind is ObjectKind.ELEVATOR:
        k = obj.kinematics
        nominal = ((k.cabin[0] + k.cabin[2]) / 2.0, (k.cabin[1] + k.cabin[3]) / 2.0)
        gap_mid = ((k.gap_a[0] + k.gap_b[0]) / 2.0, (k.gap_a[1] + k.gap_b[1]) / 2.0)
        heading = math.atan2(nominal[1] - gap_mid[1], nominal[0] - gap_mid[0])
    else:
        k = obj.kinematics
        region = swept_region(obj)
        from shapely.geometry import Polygon
        final = Polygon(current_polygons(replace(obj, state=obj.state_range()[1]))[0])
        vacated = region.difference(final)
        if vacated.is_empty:
            raise NoEndGoal(f"{obj.id}: nothing vacated by the pull")
        cpt = vacated.centroid
        nominal = (cpt.x, cpt.y)
        heading = math.atan2(-k.pull_axis[1], -k.pull_axis[0])
    spot = _snap_to_free(terminal, nominal, END_GOAL_SNAP_RADIUS, min_clearance)
    if spot is None:
        raise NoEndGoal(f"{obj.id}: end-goal region occupied at terminal state")
    return EndGoal(pose=Pose2(spot[0], spot[1], heading))
