"""Adaptation-mode control.

Once the user's hand is on the target, the robot stops leading and yields:
attraction keeps it in formation beside the user, repulsion keeps it off
obstacles, and the commanded heading blends the user's handle direction with
the end-goal bearing. A monitor watches whether the articulated object has
opened far enough for the path to the end goal to exist.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.ndimage import label as ndimage_label

from .config import ApfParams, ClearanceGates, LeadParams, RobotGeometry
from .control import ControlCommand, Prompt
from .errors import ObstaclePenetration, OutOfBounds
from .geometry import Pose2, rotate, wrap_angle
from .lead import START_SNAP_RADIUS, _passable_mask, _snap_cell
from .placement import EndGoal, Side
from .world import MainObject, ObjectKind, World


class PitchState(Enum):
    NEUTRAL = "neutral"
    PUSHED = "pushed"


@dataclass(frozen=True)
class HandleSignal:
    pitch_state: PitchState = PitchState.NEUTRAL
    theta_h: float = 0.0          # handle yaw, world frame
    push: tuple[float, float] = (0.0, 0.0)   # robot-frame unit vector while pushed

    def __post_init__(self):
        if self.pitch_state is PitchState.NEUTRAL and self.push != (0.0, 0.0):
            raise ValueError("neutral handle cannot carry a push vector")


@dataclass(frozen=True)
class ControlForce:
    F: tuple[float, float]
    F_att: tuple[float, float]
    F_rep_sum: tuple[float, float]
    heading_cmd: float


def apf_force(robot: Pose2, user_pos: tuple[float, float], handle: HandleSignal,
              obstacles: list[tuple[tuple[float, float], float]],
              params: ApfParams) -> ControlForce:
    """Attraction toward the user (plus the scaled handle push) against
    inverse-square repulsion from nearby obstacles; net force doubles as the
    velocity command after clamping to max_speed."""
    hx, hy = rotate(handle.push[0], handle.push[1], robot.heading)
    ax = params.attract_gain * ((user_pos[0] - robot.x) + params.handle_gain * hx)
    ay = params.attract_gain * ((user_pos[1] - robot.y) + params.handle_gain * hy)
    rx = ry = 0.0
    for (px, py), d in obstacles:
        if d <= 0.0:
            raise ObstaclePenetration(f"obstacle at distance {d}")
        if d >= params.influence_radius:
            continue
        ux, uy = robot.x - px, robot.y - py
        norm = math.hypot(ux, uy) or 1e-12
        mag = params.repulse_gain * (1.0 / d - 1.0 / params.influence_radius) / (d * d)
        rx += mag * ux / norm
        ry += mag * uy / norm
    fx, fy = ax + rx, ay + ry
    heading = math.atan2(fy, fx) if math.hypot(fx, fy) > 1e-9 else robot.heading
    return ControlForce(F=(fx, fy), F_att=(ax, ay), F_rep_sum=(rx, ry),
                        heading_cmd=heading)


def clamp_to_speed(force: tuple[float, float], v_max: float) -> tuple[float, float]:
    mag = math.hypot(force[0], force[1])
    if mag <= v_max or mag == 0.0:
        return force
    return (force[0] * v_max / mag, force[1] * v_max / mag)


def blend_heading(theta_h: float, theta_g: float, beta: float) -> float:
    """Shortest-arc interpolation from the goal bearing toward the handle yaw;
    opposite headings near the wrap blend through pi, not through zero."""
    return wrap_angle(theta_g + beta * wrap_angle(theta_h - theta_g))


def cluster_obstacles(world: World, robot: Pose2, params: ApfParams,
                      n_beams: int = 72) -> list[tuple[tuple[float, float], float]]:
    """Raycast hits reduced to one representative (closest) point per angular
    sector within the influence radius, bounding the repulsion sum."""
    try:
        # A full cell diagonal past the influence radius guarantees no beam
        # can cross an occupied boundary in range, so the fan is skipped.
        if (world.clearance_lower_bound(robot.x, robot.y)
                >= params.influence_radius + world.grid.resolution):
            return []
    except OutOfBounds:
        pass
    sector = math.radians(params.sector_deg)
    n_sectors = max(1, int(round(2.0 * math.pi / sector)))
    angles = robot.heading + 2.0 * np.pi * np.arange(n_beams) / n_beams
    ranges, hits, _, _ = world.raycast_fan(robot.x, robot.y, angles,
                                           params.influence_radius)
    best: dict[int, tuple[float, float]] = {}
    for i in np.nonzero(hits)[0]:
        rng, ang = float(ranges[i]), float(angles[i])
        if rng >= params.influence_radius:
            continue
        idx = int((wrap_angle(ang) + math.pi) / sector) % n_sectors
        if idx not in best or rng < best[idx][0]:
            best[idx] = (rng, ang)
    out = []
    for idx in sorted(best):
        rng, ang = best[idx]
        out.append(((robot.x + rng * math.cos(ang), robot.y + rng * math.sin(ang)),
                    max(rng, 1e-6)))
    return out


@dataclass(frozen=True)
class ClearanceStatus:
    clear: bool
    prompts: tuple[Prompt, ...] = ()


def gate_passes(obj: MainObject, gates: ClearanceGates) -> bool:
    """Kind-specific articulation gate: has the object opened far enough."""
    if obj.kind is ObjectKind.DOOR:
        leaf = obj.width_m()
        opening = leaf * math.sin(min(max(obj.state, 0.0), math.pi / 2))
        return opening >= gates.door_min_opening
    if obj.kind is ObjectKind.ELEVATOR:
        return obj.state >= gates.elevator_min_fraction
    return obj.state >= gates.chair_min_pull


BLOCKED_PROMPTS = {
    ObjectKind.DOOR: "keep opening the door",
    ObjectKind.CHAIR: "keep pulling out the chair",
    ObjectKind.ELEVATOR: "waiting for elevator",
}
CLEAR_PROMPTS = {
    ObjectKind.DOOR: "path is clear, press forward button to continue",
    ObjectKind.CHAIR: "path is clear, press forward button to continue",
    ObjectKind.ELEVATOR: "elevator door is open, press forward button to continue",
}


class ClearanceMonitor:
    """Tracks Blocked/Clear per object so prompts fire on transitions, not on
    every tick."""

    def __init__(self, gates: ClearanceGates | None = None,
                 geometry: RobotGeometry | None = None,
                 lead_params: LeadParams | None = None):
        self.gates = gates or ClearanceGates()
        self.geometry = geometry or RobotGeometry()
        self.lead = lead_params or LeadParams()
        self._last_clear: dict[str, bool | None] = {}
        self._labels: np.ndarray | None = None
        self._mask: np.ndarray | None = None
        self._labels_version = -1

    def reset(self):
        self._last_clear.clear()
        self._labels = None
        self._mask = None
        self._labels_version = -1

    def _path_exists(self, world: World, end_goal: EndGoal, robot: Pose2) -> bool:
        # Existence on the inflated grid equals 4-connected component
        # equality: a no-corner-cut diagonal move always decomposes into two
        # free orthogonal moves, so labelling once per world version answers
        # every query that plan_path would.
        if self._labels_version != world.version:
            self._mask = _passable_mask(
                world, self.geometry.robot_radius + self.lead.inflate_margin)
            four = np.array(((0, 1, 0), (1, 1, 1), (0, 1, 0)), dtype=bool)
            self._labels, _ = ndimage_label(self._mask, structure=four)
            self._labels_version = world.version
        grid = world.grid
        gr, gc = grid.cell_of(end_goal.pose.x, end_goal.pose.y)
        if not (0 <= gr < grid.rows and 0 <= gc < grid.cols) \
                or not self._mask[gr, gc]:
            return False
        start = _snap_cell(grid, self._mask, robot, START_SNAP_RADIUS)
        if start is None:
            return False
        return bool(self._labels[start] == self._labels[gr, gc])

    def status(self, world: World, obj: MainObject, end_goal: EndGoal,
               robot: Pose2) -> ClearanceStatus:
        clear = gate_passes(obj, self.gates) and self._path_exists(world, end_goal, robot)
        prev = self._last_clear.get(obj.id)
        self._last_clear[obj.id] = clear
        prompts: tuple[Prompt, ...] = ()
        if clear and prev is not True:
            prompts = (Prompt(text=CLEAR_PROMPTS[obj.kind]),)
        elif not clear and prev is not False:
            prompts = (Prompt(text=BLOCKED_PROMPTS[obj.kind]),)
        return ClearanceStatus(clear=clear, prompts=prompts)


@dataclass(frozen=True)
class AdaptResult:
    command: ControlCommand
    force: ControlForce
    status: ClearanceStatus


def formation_anchor(user_pos: tuple[float, float], heading: float, side: Side,
                     geometry: RobotGeometry) -> tuple[float, float]:
    """Robot position that keeps the user at the nominal leash offset: the
    inverse of the user stand-point construction. With the user standing at
    the offset, the anchor is the robot's own position (equilibrium)."""
    hx, hy = math.cos(heading), math.sin(heading)
    lat = geometry.lateral_offset if side is Side.LEFT else -geometry.lateral_offset
    return (user_pos[0] + geometry.back_offset * hx + lat * hy,
            user_pos[1] + geometry.back_offset * hy - lat * hx)


def adaptation_step(world: World, robot: Pose2, user_pos: tuple[float, float],
                    handle: HandleSignal, obj: MainObject, end_goal: EndGoal,
                    params: ApfParams, monitor: ClearanceMonitor,
                    side: Side = Side.RIGHT,
                    geometry: RobotGeometry | None = None) -> AdaptResult:
    """One adaptation tick: potential-field velocity, blended heading command,
    and the clearance status with any transition prompts.

    Attraction anchors on the point that restores the side-by-side leash
    formation rather than the user's body, so a user standing at the offset
    holds the robot still instead of reeling it in.
    """
    geometry = geometry or RobotGeometry()
    anchor = formation_anchor(user_pos, robot.heading, side, geometry)
    obstacles = cluster_obstacles(world, robot, params)
    force = apf_force(robot, anchor, handle, obstacles, params)
    vx, vy = clamp_to_speed(force.F, params.max_speed)
    theta_g = math.atan2(end_goal.pose.y - robot.y, end_goal.pose.x - robot.x)
    theta = blend_heading(handle.theta_h, theta_g, params.heading_blend)
    status = monitor.status(world, obj, end_goal, robot)
    cmd = ControlCommand(vx=vx, vy=vy, heading_cmd=theta)
    return AdaptResult(command=cmd, force=force, status=status)
