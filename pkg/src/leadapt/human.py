"""Scripted user agent: follows the leash, hand-searches for announced
targets, works the object, and confirms with the directional button.

The agent is deliberately mechanical — walk/reach speeds and a spiral hand
search — so that timing differences between system variants come out of the
geometry (where the robot stopped, how well it aligned) rather than any
variant-aware behavior switches in here.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .adapt import CLEAR_PROMPTS, HandleSignal, PitchState
from .config import RobotGeometry, UserParams, Variant
from .control import HELP_PROMPT, ButtonDirection, ButtonEvent, Prompt
from .errors import OutOfBounds
from .geometry import Pose2, wrap_angle
from .placement import Side, user_stand_point
from .rng import Stream
from .world import ObjectKind, World, current_target_point

REST_HAND_HEIGHT = 0.9
_SIDE_RE = re.compile(r"please stand on the (left|right) side")
_HEIGHT_RE = re.compile(r"target at height (-?[0-9.]+) meters")
_CLEAR_TEXTS = frozenset(CLEAR_PROMPTS.values())
# Arc step along the search spiral: kept below the hand-contact planar
# tolerance so two consecutive samples land inside it and the debounce fires.
_SPIRAL_ARC_STEP = 0.03
_SPIRAL_RADIUS_CAP = 1.5


class UserPhase(Enum):
    FOLLOWING = "following"
    SEARCHING = "searching"
    MANIPULATING = "manipulating"
    CONFIRMING = "confirming"
    IDLE = "idle"


@dataclass(frozen=True)
class UserState:
    pos: tuple[float, float]
    hand: tuple[float, float, float]       # planar + height
    side: Side | None
    grasped: str | None
    phase: UserPhase


@dataclass(frozen=True)
class Manipulation:
    """What the user did to the object this tick; the episode applies it."""
    object_id: str
    dstate: float = 0.0
    activate: bool = False                 # elevator call press


@dataclass(frozen=True)
class UserStepResult:
    state: UserState
    handle: HandleSignal
    buttons: tuple[ButtonEvent, ...]
    manipulation: Manipulation | None = None


def stuck_detector(history: Sequence[UserState], dt: float,
                   window_s: float = 5.0, threshold: float = 0.05) -> bool:
    """True when neither body nor hand strayed more than ``threshold`` from
    where they were ``window_s`` ago.

    Max excursion, not net drift: oscillating wider than the threshold and
    returning is still "moving"."""
    n = int(round(window_s / dt)) + 1
    if len(history) < n:
        return False
    window = history[-n:]
    p0, h0 = window[0].pos, window[0].hand
    for s in window[1:]:
        if math.hypot(s.pos[0] - p0[0], s.pos[1] - p0[1]) > threshold:
            return False
        if math.dist(s.hand, h0) > threshold:
            return False
    return True


class UserAgent:
    """Owns the scripted user's state; advanced once per episode tick."""

    def __init__(self, start_pos: tuple[float, float],
                 params: UserParams | None = None,
                 geometry: RobotGeometry | None = None,
                 rng: Stream | None = None,
                 variant: Variant = Variant.FULL):
        self.params = params or UserParams()
        self.geometry = geometry or RobotGeometry()
        self.rng = rng or Stream(0, "user")
        self.variant = variant
        self._pos = (float(start_pos[0]), float(start_pos[1]))
        self._hand = (self._pos[0], self._pos[1], REST_HAND_HEIGHT)
        self._phase = UserPhase.FOLLOWING
        self._side: Side | None = None
        self._grasped: str | None = None
        self._task_id: str | None = None
        self._believed: tuple[float, float, float] | None = None
        self._reached_stand = False
        self._spiraling = False
        self._theta = 0.0
        self._search_wait = 0
        self._confirm_left = -1
        self._help_left = -1
        self._pressed_call = False

    # -- episode wiring -----------------------------------------------------

    def set_task(self, object_id: str):
        """New task leg: forget the previous announcement and search context."""
        self._task_id = object_id
        self._phase = UserPhase.FOLLOWING
        self._side = None
        self._grasped = None
        self._believed = None
        self._reached_stand = False
        self._spiraling = False
        self._theta = 0.0
        self._search_wait = 0
        self._confirm_left = -1
        self._pressed_call = False

    def finish(self):
        self._phase = UserPhase.IDLE

    def assist(self, world: World):
        """Experimenter intervention: re-seed the believed target to truth.

        The hand is left where it is — teleporting it would fabricate motion
        the collision metrics should not see."""
        if self._task_id is None:
            return
        obj = world.objects[self._task_id]
        tgt = world.targets[self._task_id]
        px, py = current_target_point(obj, tgt)
        self._believed = (px, py, tgt.height)
        self._spiraling = False
        self._theta = 0.0

    @property
    def state(self) -> UserState:
        return UserState(pos=self._pos, hand=self._hand, side=self._side,
                         grasped=self._grasped, phase=self._phase)

    # -- main tick ----------------------------------------------------------

    def step(self, world: World, robot: Pose2, prompts: Sequence[Prompt],
             mode_kind: str, tick: int, dt: float) -> UserStepResult:
        buttons: list[ButtonEvent] = []
        # Countdowns tick down before new prompts are heard, so a delay set
        # this tick elapses fully before it fires.
        if self._confirm_left > 0:
            self._confirm_left -= 1
            if self._confirm_left == 0:
                self._confirm_left = -1
                buttons.append(ButtonEvent(ButtonDirection.FORWARD, tick))
        if self._help_left > 0:
            self._help_left -= 1
            if self._help_left == 0:
                self._help_left = -1
                buttons.append(ButtonEvent(ButtonDirection.FORWARD, tick))
        self._hear(world, robot, prompts, dt)

        if mode_kind == "adaptation" and self._phase is UserPhase.SEARCHING:
            self._phase = UserPhase.MANIPULATING
            self._grasped = self._task_id
        elif mode_kind == "lead" and self._phase in (UserPhase.MANIPULATING,
                                                     UserPhase.CONFIRMING):
            self._phase = UserPhase.FOLLOWING

        manipulation = None
        if self._phase is UserPhase.FOLLOWING:
            self._follow_step(world, robot, dt)
        elif self._phase is UserPhase.SEARCHING:
            self._search_step(world, robot, dt)
        elif self._phase is UserPhase.MANIPULATING:
            manipulation = self._manipulate_step(world, dt)
        self._clamp_hand_to_reach()
        if self._phase is UserPhase.MANIPULATING:
            handle = HandleSignal(pitch_state=PitchState.PUSHED,
                                  theta_h=robot.heading, push=(1.0, 0.0))
        else:
            handle = HandleSignal(theta_h=robot.heading)
        return UserStepResult(state=self.state, handle=handle,
                              buttons=tuple(buttons), manipulation=manipulation)

    # -- prompt handling ----------------------------------------------------

    def _hear(self, world: World, robot: Pose2, prompts: Sequence[Prompt],
              dt: float):
        for prompt in prompts:
            text = prompt.text
            m = _SIDE_RE.search(text)
            if m:
                self._side = Side.LEFT if m.group(1) == "left" else Side.RIGHT
                continue
            m = _HEIGHT_RE.search(text)
            if m:
                self._begin_search(world, robot, float(m.group(1)), dt)
                continue
            if text in _CLEAR_TEXTS:
                if self.variant is Variant.FULL and \
                        self._phase is UserPhase.MANIPULATING:
                    self._phase = UserPhase.CONFIRMING
                    self._confirm_left = max(
                        1, int(round(self.params.confirm_delay / dt)))
                continue
            if text == HELP_PROMPT:
                self._help_left = max(
                    1, int(round(self.params.fallback_help_delay / dt)))

    def _begin_search(self, world: World, robot: Pose2, announced_height: float,
                      dt: float):
        if self._task_id is None or self._phase is not UserPhase.FOLLOWING:
            return
        if self._side is None:
            # Nothing was announced: the baseline user guesses a side.
            self._side = Side.LEFT if self.rng.random() < 0.5 else Side.RIGHT
        obj = world.objects[self._task_id]
        tgt = world.targets[self._task_id]
        tx, ty = current_target_point(obj, tgt)
        rng_m = robot.distance_to((tx, ty))
        misalign = abs(wrap_angle(robot.bearing_to((tx, ty))))
        mag = self.params.error_gain * (misalign * rng_m +
                                        max(0.0, rng_m - 0.8))
        mag += self.rng.normal(0.0, self.params.search_noise_sigma)
        mag = max(0.0, mag)
        ang = self.rng.uniform(0.0, 2.0 * math.pi)
        self._believed = (tx + mag * math.cos(ang), ty + mag * math.sin(ang),
                          announced_height)
        self._phase = UserPhase.SEARCHING
        self._reached_stand = False
        self._spiraling = False
        self._theta = 0.0
        self._search_wait = int(round(self.params.base_search_time / dt))

    # -- phase behaviors ----------------------------------------------------

    def _follow_step(self, world: World, robot: Pose2, dt: float):
        if self._grasped is not None and self._free(world, self._pos, None):
            # A finished object is let go only once the body is clear of it:
            # a pulled-out chair can end up under the user's feet, and until
            # they have stepped out they keep a steadying hand on it.
            self._grasped = None
        stand = user_stand_point(robot, self._side or Side.RIGHT, self.geometry)
        moved = self._walk_toward(world, stand, self.params.walk_speed * dt,
                                  exclude=self._grasped)
        if not moved:
            # A half-open door leaf can wall off the lateral offset point;
            # when no step toward it is free, the taut leash drags the user
            # straight toward the robot instead.
            self._walk_toward(world, (robot.x, robot.y),
                              self.params.walk_speed * dt,
                              exclude=self._grasped)
        self._hand = (self._pos[0], self._pos[1], REST_HAND_HEIGHT)

    def _search_step(self, world: World, robot: Pose2, dt: float):
        stand = user_stand_point(robot, self._side or Side.RIGHT, self.geometry)
        if not self._reached_stand:
            if math.dist(self._pos, stand) > 0.08:
                self._walk_toward(world, stand, self.params.walk_speed * dt)
                self._hand = (self._pos[0], self._pos[1], REST_HAND_HEIGHT)
                return
            self._reached_stand = True
        if self._search_wait > 0:
            self._search_wait -= 1
            return
        assert self._believed is not None
        bx, by, bh = self._believed
        if not self._spiraling:
            hx, hy, _ = self._hand
            gap = math.hypot(bx - hx, by - hy)
            step = self.params.hand_speed * dt
            if gap > step:
                self._move_hand(world, (hx + step * (bx - hx) / gap,
                                        hy + step * (by - hy) / gap, bh), dt)
                return
            self._move_hand(world, (bx, by, bh), dt)
            self._spiraling = True
            return
        # Outward Archimedean spiral around the believed point, walked at a
        # bounded arc step; the body drifts after the hand to keep it in reach.
        a = self.params.spiral_step / (2.0 * math.pi)
        ds = min(self.params.hand_speed * dt, _SPIRAL_ARC_STEP)
        r = min(a * self._theta, _SPIRAL_RADIUS_CAP)
        self._theta += ds / max(r, ds)
        r = min(a * self._theta, _SPIRAL_RADIUS_CAP)
        self._move_hand(world, (bx + r * math.cos(self._theta),
                                by + r * math.sin(self._theta), bh), dt)

    def _manipulate_step(self, world: World, dt: float) -> Manipulation | None:
        obj = world.objects[self._task_id]
        tgt = world.targets[self._task_id]
        px, py = current_target_point(obj, tgt)
        # Keep the body close enough that the rigid grip stays within reach
        # while the handle sweeps, but back off ahead of an advancing edge
        # (a pulled chair slides into the user's spot); the 0.33 floor keeps
        # the body disc off the object's cells even mid-retreat.
        d = math.dist(self._pos, (px, py))
        if d > 0.35:
            self._walk_toward(world, (px, py), self.params.walk_speed * dt,
                              exclude=self._task_id)
        elif d < 0.33 and d > 1e-9:
            ax, ay = (self._pos[0] - px) / d, (self._pos[1] - py) / d
            self._walk_toward(world, (px + 0.35 * ax, py + 0.35 * ay),
                              self.params.walk_speed * dt,
                              exclude=self._task_id)
        self._hand = (px, py, tgt.height)
        if obj.kind is ObjectKind.DOOR:
            return Manipulation(obj.id, dstate=self.params.door_rate * dt)
        if obj.kind is ObjectKind.CHAIR:
            return Manipulation(obj.id, dstate=self.params.chair_rate * dt)
        if not self._pressed_call and obj.activated_at_s is None:
            self._pressed_call = True
            return Manipulation(obj.id, activate=True)
        return None

    # -- movement helpers ---------------------------------------------------

    def _free(self, world: World, p: tuple[float, float],
              exclude: str | None) -> bool:
        try:
            return world.clearance(p, exclude_object=exclude) >= \
                self.geometry.user_radius
        except OutOfBounds:
            return False

    def _walk_toward(self, world: World, target: tuple[float, float],
                     max_step: float, exclude: str | None = None) -> bool:
        px, py = self._pos
        dx, dy = target[0] - px, target[1] - py
        dist = math.hypot(dx, dy)
        if dist <= 1e-9:
            return True
        step = min(max_step, dist)
        base = math.atan2(dy, dx)
        # Slide around blockage: sweep the step direction away from the
        # desired ray in fixed ±30-degree rungs. A straight projection can
        # wedge in the pocket beside a half-open door leaf; the sweep walks
        # the rim of the blocking disc instead and comes out the far side.
        for rung in (0, 1, -1, 2, -2, 3, -3, 4, -4):
            a = base + rung * (math.pi / 6.0)
            cand = (px + step * math.cos(a), py + step * math.sin(a))
            if self._free(world, cand, exclude):
                self._pos = cand
                return True
        return False

    def _move_hand(self, world: World, hand: tuple[float, float, float],
                   dt: float):
        hx, hy, hh = hand
        if math.hypot(hx - self._pos[0], hy - self._pos[1]) > \
                0.9 * self.params.reach:
            self._walk_toward(world, (hx, hy), self.params.walk_speed * dt)
        self._hand = (hx, hy, hh)

    def _clamp_hand_to_reach(self):
        hx, hy, hh = self._hand
        px, py = self._pos
        d = math.hypot(hx - px, hy - py)
        if d > self.params.reach:
            s = self.params.reach / d
            self._hand = (px + (hx - px) * s, py + (hy - py) * s, hh)
