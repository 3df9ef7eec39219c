"""Dual-mode task machine.

Runs each task as a fixed cycle: wayfind to the object's neighborhood, detect
it, plan and drive to the stop goal, visually servo into the interaction band,
announce the target, then hand control over to adaptation while the user works
the object. When the object is clear (and the user confirms), the robot leads
through to the task's end goal and the next task begins.

Any planning or tracking failure parks the robot in fallback: zero velocity,
an assistance prompt, and a forward-button resume that restarts the
interrupted leg.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .adapt import ClearanceMonitor, ControlForce, HandleSignal, adaptation_step
from .config import SessionConfig, Variant
from .control import (HELP_PROMPT, STOP, ButtonDirection, ButtonEvent,
                      ControlCommand, Prompt)
from .errors import (DegenerateSurface, GoalOccupied, NoEndGoal, PathBlocked,
                     ServoLost, Unreachable)
from .geometry import Pose2, wrap_angle
from .lead import (PathPlan, ServoState, dock_step, emit_prompts, follow_step,
                   plan_path, servo_miss, servo_step)
from .perception import (DetectionCandidate, GeometricPriors,
                         HandContactDetector, TargetEstimate, estimate_target,
                         filter_by_priors)
from .placement import (END_GOAL_SNAP_RADIUS, EndGoal, StopGoalResult,
                        _snap_to_free, compute_end_goal, compute_stop_goal,
                        select_user_side)
from .world import (ObjectKind, World, current_target_normal,
                    current_target_point)

# Failures that park the robot instead of crashing the episode.
_FALLBACK_ERRORS = (Unreachable, PathBlocked, GoalOccupied, ServoLost,
                    NoEndGoal, DegenerateSurface)


class LeadPhase(Enum):
    PLANNING = "planning"
    FOLLOWING = "following"
    SERVOING = "servoing"
    ANNOUNCED = "announced"


@dataclass(frozen=True)
class Mode:
    """Public control mode; ``kind`` matches the strings the user agent keys
    its behavior on."""
    kind: str                      # "lead" | "adaptation" | "fallback"
    lead_phase: LeadPhase | None = None
    waiting_confirm: bool = False

    def label(self) -> str:
        if self.kind == "lead" and self.lead_phase is not None:
            return f"lead:{self.lead_phase.value}"
        return self.kind


@dataclass(frozen=True)
class Task:
    object_id: str
    kind: ObjectKind


@dataclass(frozen=True)
class UserSignals:
    """Everything the robot can sense about the user this tick."""
    user_pos: tuple[float, float]
    hand: tuple[float, float, float]
    handle: HandleSignal = field(default_factory=HandleSignal)
    buttons: tuple[ButtonEvent, ...] = ()


@dataclass(frozen=True)
class TickResult:
    mode: Mode
    command: ControlCommand
    events: tuple[dict, ...]


class _Stage(Enum):
    WAYFIND_PLAN = "wayfind_plan"
    WAYFIND_GO = "wayfind_go"
    DETECT_PLAN = "detect_plan"
    APPROACH_GO = "approach_go"
    DOCK = "dock"
    SERVO = "servo"
    ANNOUNCED = "announced"
    ADAPT = "adapt"
    EXIT_PLAN = "exit_plan"
    EXIT_GO = "exit_go"
    FALLBACK = "fallback"
    DONE = "done"


_LEAD_PHASE = {
    _Stage.WAYFIND_PLAN: LeadPhase.PLANNING,
    _Stage.DETECT_PLAN: LeadPhase.PLANNING,
    _Stage.EXIT_PLAN: LeadPhase.PLANNING,
    _Stage.WAYFIND_GO: LeadPhase.FOLLOWING,
    _Stage.APPROACH_GO: LeadPhase.FOLLOWING,
    _Stage.EXIT_GO: LeadPhase.FOLLOWING,
    _Stage.DOCK: LeadPhase.FOLLOWING,
    _Stage.SERVO: LeadPhase.SERVOING,
    _Stage.ANNOUNCED: LeadPhase.ANNOUNCED,
    _Stage.DONE: LeadPhase.PLANNING,
}

# Where the forward button resumes after a fallback: the start of the leg
# that failed.
_RESUME_STAGE = {
    _Stage.WAYFIND_PLAN: _Stage.WAYFIND_PLAN,
    _Stage.WAYFIND_GO: _Stage.WAYFIND_PLAN,
    _Stage.DETECT_PLAN: _Stage.DETECT_PLAN,
    _Stage.APPROACH_GO: _Stage.DETECT_PLAN,
    _Stage.DOCK: _Stage.DETECT_PLAN,
    _Stage.SERVO: _Stage.DETECT_PLAN,
    _Stage.ANNOUNCED: _Stage.DETECT_PLAN,
    _Stage.ADAPT: _Stage.ADAPT,
    _Stage.EXIT_PLAN: _Stage.EXIT_PLAN,
    _Stage.EXIT_GO: _Stage.EXIT_PLAN,
}


def _forward_pressed(signals: UserSignals) -> bool:
    return any(b.direction is ButtonDirection.FORWARD for b in signals.buttons)


class Orchestrator:
    def __init__(self, tasks: list[Task], config: SessionConfig | None = None,
                 priors: GeometricPriors | None = None):
        self.tasks = list(tasks)
        self.cfg = config or SessionConfig()
        self.priors = priors or GeometricPriors()
        self.monitor = ClearanceMonitor(self.cfg.gates, self.cfg.geometry,
                                        self.cfg.lead)
        self.contact = HandContactDetector(self.cfg.hand)
        self.task_index = 0
        self._stage = _Stage.WAYFIND_PLAN if self.tasks else _Stage.DONE
        self._task_started = False
        self._route_announced = False
        self._plan: PathPlan | None = None
        self._stop: StopGoalResult | None = None
        self._end: EndGoal | None = None
        self._estimate: TargetEstimate | None = None
        self._servo = ServoState()
        self._misses = 0
        self._clear_now = False
        self._resume = _Stage.WAYFIND_PLAN
        self._events: list[dict] = []
        self._cause = "init"
        self.last_force: ControlForce | None = None

    # -- public surface -----------------------------------------------------

    @property
    def done(self) -> bool:
        return self._stage is _Stage.DONE

    def mode(self) -> Mode:
        if self._stage is _Stage.FALLBACK:
            return Mode("fallback")
        if self._stage is _Stage.ADAPT:
            return Mode("adaptation", waiting_confirm=self._clear_now)
        return Mode("lead", _LEAD_PHASE[self._stage])

    def tick(self, world: World, robot: Pose2,
             sensed: list[DetectionCandidate],
             signals: UserSignals) -> TickResult:
        """Advance the machine one control tick and return the mode, the
        velocity command (world frame), and the events it emitted."""
        self._events = []
        self.last_force = None
        prev = self.mode().label()
        try:
            cmd = self._dispatch(world, robot, sensed, signals)
        except _FALLBACK_ERRORS as exc:
            cmd = self._enter_fallback(type(exc).__name__)
        mode = self.mode()
        if mode.label() != prev:
            self._events.append({"kind": "mode", "from": prev,
                                 "to": mode.label(), "cause": self._cause})
        return TickResult(mode, cmd.to_world(robot), tuple(self._events))

    def overlay(self) -> dict:
        """Current planning artifacts, for display: path waypoints, stop goal,
        end goal (None while unset)."""
        return {
            "plan": None if self._plan is None else
            [[wp.x, wp.y] for wp in self._plan.waypoints],
            "stop": None if self._stop is None else
            [self._stop.pose.x, self._stop.pose.y, self._stop.pose.heading],
            "end": None if self._end is None else
            [self._end.pose.x, self._end.pose.y, self._end.pose.heading],
        }

    # -- helpers ------------------------------------------------------------

    def _task(self) -> Task:
        return self.tasks[self.task_index]

    def _emit_prompts(self, prompts) -> None:
        for p in prompts:
            self._events.append({"kind": "prompt", "text": p.text,
                                 "channel": p.channel})

    def _true_target(self, world: World) -> TargetEstimate:
        """Ground-truth target point for physical hand contact (the declared
        point carried along by the object's articulation)."""
        obj = world.objects[self._task().object_id]
        tgt = world.targets[obj.id]
        point = current_target_point(obj, tgt)
        return TargetEstimate(center=point, height=tgt.height,
                              normal=current_target_normal(obj, tgt))

    def _detect(self, world: World,
                sensed: list[DetectionCandidate]) -> DetectionCandidate | None:
        """Best prior-passing candidate near the task's declared target.

        The task comes with a map location; vision only has to pick out the
        object there, so candidates measured far from it (another door down
        the hall, a spurious blob) are not eligible.
        """
        task = self._task()
        ax, ay = current_target_point(world.objects[task.object_id],
                                      world.targets[task.object_id])
        near = [c for c in sensed
                if math.hypot(c.measured_target_point[0] - ax,
                              c.measured_target_point[1] - ay)
                <= self.cfg.approach_distance]
        return filter_by_priors(near, self.priors, task.kind)

    def _observe(self, world: World, robot: Pose2,
                 cand: DetectionCandidate) -> TargetEstimate:
        """Estimate the target, orienting its normal toward the robot: the
        surface was seen from this side, so approach poses belong here (a
        measurement landing a hair past a thin leaf's midline must not flip
        the stop goal to the far side)."""
        est = estimate_target(world, cand)
        dx, dy = robot.x - est.center[0], robot.y - est.center[1]
        if math.cos(est.normal) * dx + math.sin(est.normal) * dy < 0.0:
            est = replace(est, normal=wrap_angle(est.normal + math.pi))
        return est

    def _enter_fallback(self, reason: str) -> ControlCommand:
        self._resume = _RESUME_STAGE.get(self._stage, _Stage.WAYFIND_PLAN)
        self._stage = _Stage.FALLBACK
        self._cause = reason
        self._events.append({"kind": "fallback", "reason": reason})
        self._emit_prompts((Prompt(text=HELP_PROMPT),))
        self._misses = 0
        self._servo = ServoState()
        self.contact.reset()
        # Fresh edge state so a Clear prompt re-fires after resuming; the
        # user's earlier confirmation was consumed by the fallback exit.
        self.monitor = ClearanceMonitor(self.cfg.gates, self.cfg.geometry,
                                        self.cfg.lead)
        return STOP

    def _complete_task(self) -> None:
        self._events.append({"kind": "task_complete", "task": self.task_index})
        self._cause = "task_complete"
        self.task_index += 1
        self._plan = self._stop = self._end = self._estimate = None
        self._servo = ServoState()
        self._misses = 0
        self._clear_now = False
        self._task_started = False
        self.contact.reset()
        self.monitor = ClearanceMonitor(self.cfg.gates, self.cfg.geometry,
                                        self.cfg.lead)
        if self.task_index >= len(self.tasks):
            self._stage = _Stage.DONE
            self._route_announced = True
            self._events.append({"kind": "route_complete"})
        else:
            self._stage = _Stage.WAYFIND_PLAN

    # -- stage handlers -----------------------------------------------------

    def _dispatch(self, world: World, robot: Pose2,
                  sensed: list[DetectionCandidate],
                  signals: UserSignals) -> ControlCommand:
        stage = self._stage
        if stage is _Stage.DONE:
            if not self._route_announced:
                self._route_announced = True
                self._events.append({"kind": "route_complete"})
            return STOP
        if stage is _Stage.FALLBACK:
            if _forward_pressed(signals):
                self._stage = self._resume
                self._cause = "forward_press"
            return STOP
        if stage is _Stage.WAYFIND_PLAN:
            return self._wayfind_plan(world, robot)
        if stage is _Stage.WAYFIND_GO:
            cmd = follow_step(self._plan, robot, self.cfg.lead.speed_cap,
                              self.cfg.dt, self.cfg.lead.lookahead,
                              self.cfg.lead.arrive_tol)
            if cmd.done:
                self._stage = _Stage.DETECT_PLAN
                self._cause = "arrived"
                return STOP
            return cmd
        if stage is _Stage.DETECT_PLAN:
            return self._detect_and_plan(world, robot, sensed)
        if stage is _Stage.APPROACH_GO:
            cmd = follow_step(self._plan, robot, self.cfg.lead.speed_cap,
                              self.cfg.dt, self.cfg.lead.lookahead,
                              self.cfg.lead.arrive_tol)
            if cmd.done:
                self._stage = _Stage.DOCK
                self._cause = "arrived"
                return STOP
            return cmd
        if stage is _Stage.DOCK:
            cmd = dock_step(robot, self._stop.pose, self.cfg.lead.speed_cap,
                            self.cfg.dt, self.cfg.lead.dock_tol)
            if cmd.done:
                if self.cfg.variant is Variant.NON_ADAPTIVE:
                    # Baseline stops at a fixed range: docking is the whole
                    # approach, so announce straight away.
                    self._announce()
                else:
                    self._stage = _Stage.SERVO
                    self._servo = ServoState()
                    self._cause = "docked"
                return STOP
            return cmd
        if stage is _Stage.SERVO:
            return self._servo_tick(world, robot, sensed)
        if stage is _Stage.ANNOUNCED:
            if self.contact.update(signals.hand, self._true_target(world)):
                self._events.append({"kind": "hand_on_target",
                                     "task": self.task_index})
                self._stage = _Stage.ADAPT
                self._clear_now = False
                self._cause = "hand_on_target"
            return STOP
        if stage is _Stage.ADAPT:
            return self._adapt_tick(world, robot, signals)
        if stage is _Stage.EXIT_PLAN:
            self._plan = plan_path(world, robot, self._end.pose,
                                   self.cfg.geometry.robot_radius,
                                   self.cfg.lead.inflate_margin)
            self._stage = _Stage.EXIT_GO
            self._cause = "planned"
            return STOP
        # EXIT_GO
        cmd = follow_step(self._plan, robot, self.cfg.lead.speed_cap,
                          self.cfg.dt, self.cfg.lead.lookahead,
                          self.cfg.lead.arrive_tol)
        if cmd.done:
            ux, uy = signals.user_pos
            if math.hypot(robot.x - ux, robot.y - uy) <= self.cfg.geometry.leash_length:
                self._complete_task()
            return STOP  # hold at the end goal until the user is back in leash
        return cmd

    def _wayfind_plan(self, world: World, robot: Pose2) -> ControlCommand:
        task = self._task()
        if not self._task_started:
            self._task_started = True
            self._events.append({"kind": "task_start", "task": self.task_index,
                                 "object": task.object_id})
        declared = world.targets[task.object_id]
        tx, ty = declared.point
        if math.hypot(robot.x - tx, robot.y - ty) <= self.cfg.approach_distance:
            self._stage = _Stage.DETECT_PLAN  # already in sensing range
            return STOP
        n = declared.normal
        nominal = (tx + self.cfg.approach_distance * math.cos(n),
                   ty + self.cfg.approach_distance * math.sin(n))
        snapped = _snap_to_free(world, nominal, END_GOAL_SNAP_RADIUS,
                                self.cfg.geometry.robot_radius
                                + self.cfg.lead.inflate_margin)
        gx, gy = snapped if snapped is not None else nominal
        goal = Pose2(gx, gy, wrap_angle(n + math.pi))
        self._plan = plan_path(world, robot, goal,
                               self.cfg.geometry.robot_radius,
                               self.cfg.lead.inflate_margin)
        self._stage = _Stage.WAYFIND_GO
        self._cause = "planned"
        return STOP

    def _detect_and_plan(self, world: World, robot: Pose2,
                         sensed: list[DetectionCandidate]) -> ControlCommand:
        task = self._task()
        cand = self._detect(world, sensed)
        if cand is None:
            self._misses += 1
            if self._misses >= self.cfg.detection_fail_limit:
                return self._enter_fallback("DetectionFailed")
            return STOP
        self._misses = 0
        self._estimate = self._observe(world, robot, cand)
        obj = world.objects[task.object_id]
        if self.cfg.variant is Variant.NON_ADAPTIVE:
            cx, cy = self._estimate.center
            n = self._estimate.normal
            d = self.cfg.nonadaptive_stop_distance
            pose = Pose2(cx + d * math.cos(n), cy + d * math.sin(n),
                         wrap_angle(n + math.pi))
            side = select_user_side(pose, self._estimate, obj, task.kind)
            self._stop = StopGoalResult(pose=pose, side=side, cost_total=0.0,
                                        cost_c=0.0, cost_d=0.0, cost_m=0.0,
                                        feasible_count=0)
        else:
            self._stop = compute_stop_goal(world, self._estimate, obj,
                                           self.cfg.weights, self.cfg.geometry)
        self._end = compute_end_goal(world, obj, task.kind, robot,
                                     self.cfg.geometry,
                                     min_clearance=self.cfg.geometry.robot_radius
                                     + self.cfg.lead.inflate_margin)
        self._plan = plan_path(world, robot, self._stop.pose,
                               self.cfg.geometry.robot_radius,
                               self.cfg.lead.inflate_margin)
        self._stage = _Stage.APPROACH_GO
        self._cause = "detected"
        return STOP

    def _servo_tick(self, world: World, robot: Pose2,
                    sensed: list[DetectionCandidate]) -> ControlCommand:
        cand = self._detect(world, sensed)
        if cand is None:
            cmd, self._servo = servo_miss(self._servo, self.cfg.lead)
            return cmd
        self._estimate = self._observe(world, robot, cand)
        cx, cy = self._estimate.center
        bearing = robot.bearing_to((cx, cy))
        range_m = math.hypot(cx - robot.x, cy - robot.y)
        cmd, self._servo = servo_step(self._servo, bearing, range_m,
                                      self.cfg.lead, self.cfg.dt)
        if cmd.done:
            self._announce()
            return STOP
        return cmd

    def _announce(self) -> None:
        self._events.append({"kind": "servo_done", "task": self.task_index})
        self._emit_prompts(emit_prompts(self._stop, self._estimate,
                                        self.cfg.variant))
        self.contact.reset()
        self._stage = _Stage.ANNOUNCED
        self._cause = "servo_done"

    def _adapt_tick(self, world: World, robot: Pose2,
                    signals: UserSignals) -> ControlCommand:
        obj = world.objects[self._task().object_id]
        if self.cfg.variant is Variant.NON_ADAPTIVE:
            # Baseline holds its stop pose; it still watches clearance and
            # resumes on its own, with no confirmation loop.
            status = self.monitor.status(world, obj, self._end, robot)
            self._emit_prompts(status.prompts)
            if status.clear:
                self._stage = _Stage.EXIT_PLAN
                self._cause = "clear"
            return STOP
        res = adaptation_step(world, robot, signals.user_pos, signals.handle,
                              obj, self._end, self.cfg.apf, self.monitor,
                              side=self._stop.side,
                              geometry=self.cfg.geometry)
        self.last_force = res.force
        self._emit_prompts(res.status.prompts)
        self._clear_now = res.status.clear
        if res.status.clear and _forward_pressed(signals):
            self._stage = _Stage.EXIT_PLAN
            self._clear_now = False
            self._cause = "clear_confirmed"
            return STOP
        return res.command
