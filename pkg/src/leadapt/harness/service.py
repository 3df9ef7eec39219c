"""Interactive session service: one WebSocket connection = one live episode.

The human replaces the scripted user. The robot side (perception,
orchestrator, world articulation, contact accounting) runs exactly as in the
batch episode loop, but the user's body, hand, grip, handle, and button
presses arrive as ``act`` messages and the clock only advances on ``step``.

Protocol (JSON text frames)
  client → server: {"type": "reset", "scenario_id", "seed"?, "variant"?}
                   {"type": "step", "n"?}
                   {"type": "act", "action": {move?, hand?, grab?,
                                              push_leash?, handle_yaw?,
                                              button?}}
                   {"type": "list_scenarios"}
  server → client: {"type": "state", tick, mode, robot, user, objects,
                    prompts, forces, metrics_so_far, end}
                   {"type": "scenarios", "scenarios": [...]}
                   {"type": "error", "code", "detail"}

A malformed or out-of-order message produces an error frame; the session
(and its episode) survives.
"""
from __future__ import annotations

import json
import math
from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .. import __version__
from ..adapt import HandleSignal, PitchState
from ..config import Variant
from ..control import ButtonDirection, ButtonEvent
from ..errors import OutOfBounds
from ..geometry import Pose2
from ..orchestrator import Orchestrator, UserSignals
from ..perception import sense_candidates
from ..rng import StreamSet
from ..world import ObjectKind, advance_object, current_target_point
from .episode import EpisodeLog, _elevator_progress
from .metrics import compute_metrics
from .scenario import Scenario, load_scenario

GRAB_PLANAR = 0.15      # hand-to-handle distance that latches a grip
GRAB_HEIGHT = 0.30
_STATE_EPS = 1e-4       # finite-difference step for the drag direction


class RequestError(Exception):
    """Client mistake; turned into an error frame, never closes the session."""

    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.detail = detail


def discover_scenarios(scenario_dir: str | Path) -> dict[str, Scenario]:
    catalogue = {}
    for path in sorted(Path(scenario_dir).glob("*.json")):
        catalogue[path.stem] = load_scenario(path)
    return catalogue


class InteractiveSession:
    """One episode advanced by protocol messages instead of the user agent."""

    def __init__(self, catalogue: dict[str, Scenario]):
        self.catalogue = catalogue
        self._live = False

    # -- message handlers ----------------------------------------------------

    def handle(self, message: dict) -> dict:
        mtype = message.get("type")
        if mtype == "reset":
            return self.reset(message)
        if mtype == "list_scenarios":
            return self.list_scenarios()
        if mtype == "step":
            return self.step(message.get("n", 1))
        if mtype == "act":
            return self.act(message.get("action", {}))
        raise RequestError("unknown_type", f"unknown message type {mtype!r}")

    def list_scenarios(self) -> dict:
        return {"type": "scenarios", "scenarios": [
            {"id": sid, "name": sc.name, "tasks": len(sc.tasks),
             "seed": sc.seed}
            for sid, sc in self.catalogue.items()]}

    def reset(self, message: dict) -> dict:
        sid = message.get("scenario_id")
        if sid not in self.catalogue:
            raise RequestError("bad_request", f"unknown scenario_id {sid!r}")
        scenario = self.catalogue[sid]
        seed = message.get("seed", scenario.seed)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise RequestError("bad_request", "seed must be an integer")
        variant = message.get("variant", Variant.FULL.value)
        try:
            cfg = scenario.session_config()
            cfg.variant = Variant(variant)
        except ValueError:
            raise RequestError("bad_request", f"unknown variant {variant!r}")

        self.cfg = cfg
        self.world = scenario.build_world()
        self.orch = Orchestrator(scenario.tasks, cfg)
        self.percep_rng = StreamSet(seed).get("perception")
        self.robot = scenario.robot_start
        self.user_pos = (float(scenario.user_start[0]),
                         float(scenario.user_start[1]))
        self.hand = (self.user_pos[0], self.user_pos[1], 0.9)
        self.grabbed: str | None = None
        self.pushing = False
        self.theta_h = 0.0
        self.pending_buttons: list[ButtonEvent] = []
        self.tick = 0
        self.mode_label = "lead:planning"
        self.last_prompts: list[str] = []
        self.end_reason: str | None = None
        self.header = {
            "kind": "header", "schema": 1, "version": __version__,
            "name": scenario.name, "scenario_sha256": scenario.sha256,
            "scenario": scenario.raw, "seed": seed,
            "variant": cfg.variant.value, "dt": cfg.dt,
            "prompt_seconds": cfg.prompt_seconds,
        }
        self.events: list[dict] = []
        self._live = True
        # The reset reply alone carries the static scenario document; the
        # client renders the map and object geometry from it and needs only
        # the per-object state scalar afterwards.
        frame = self.state_frame()
        frame["scenario"] = scenario.raw
        return frame

    def act(self, action: dict) -> dict:
        self._require_live()
        if not isinstance(action, dict):
            raise RequestError("bad_request", "action must be an object")
        unknown = set(action) - {"move", "hand", "grab", "push_leash",
                                 "handle_yaw", "button"}
        if unknown:
            raise RequestError("bad_request",
                               f"unknown action fields {sorted(unknown)!r}")
        if "move" in action:
            self._move_body(self._vector(action["move"], 2, "move"))
        if "hand" in action:
            self._move_hand(self._vector(action["hand"], 3, "hand"))
        if "grab" in action:
            self._set_grab(bool(action["grab"]))
        if "push_leash" in action:
            self.pushing = bool(action["push_leash"])
        if "handle_yaw" in action:
            yaw = action["handle_yaw"]
            if not isinstance(yaw, (int, float)) or isinstance(yaw, bool):
                raise RequestError("bad_request", "handle_yaw must be a number")
            self.theta_h = float(yaw)
        if "button" in action:
            try:
                direction = ButtonDirection(action["button"])
            except ValueError:
                raise RequestError("bad_request",
                                   f"unknown button {action['button']!r}")
            self.pending_buttons.append(ButtonEvent(direction, self.tick))
        return self.state_frame()

    def step(self, n) -> dict:
        self._require_live()
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise RequestError("bad_request", "n must be a positive integer")
        self.last_prompts = []
        for _ in range(n):
            if self.end_reason is not None:
                break
            self._advance_one()
        return self.state_frame()

    # -- one simulation tick ---------------------------------------------------

    def _advance_one(self):
        cfg, world = self.cfg, self.world
        dt = cfg.dt
        sensed = sense_candidates(world, self.robot, cfg.noise, self.percep_rng)
        if self.pushing:
            handle = HandleSignal(pitch_state=PitchState.PUSHED,
                                  theta_h=self.theta_h, push=(1.0, 0.0))
        else:
            handle = HandleSignal(theta_h=self.theta_h)
        signals = UserSignals(user_pos=self.user_pos, hand=self.hand,
                              handle=handle,
                              buttons=tuple(self.pending_buttons))
        self.pending_buttons.clear()
        result = self.orch.tick(world, self.robot, sensed, signals)
        for ev in result.events:
            self.events.append({"tick": self.tick, **ev})
            if ev["kind"] == "prompt":
                self.last_prompts.append(ev["text"])
        self.mode_label = result.mode.label()

        cmd = result.command
        heading = cmd.heading_cmd if cmd.heading_cmd is not None \
            else self.robot.heading
        self.robot = Pose2(self.robot.x + cmd.vx * dt,
                           self.robot.y + cmd.vy * dt, heading)

        self._drag_grabbed(dt)
        _elevator_progress(world, self.tick * dt)

        for who, point, radius, grasped in (
                ("robot", (self.robot.x, self.robot.y),
                 cfg.geometry.robot_radius, None),
                ("user", self.user_pos, cfg.geometry.user_radius,
                 self.grabbed)):
            try:
                free = world.clearance(point, exclude_object=grasped) >= radius
            except OutOfBounds:
                free = False
            if not free:
                self.events.append({"tick": self.tick, "kind": "contact",
                                    "who": who})

        self.tick += 1
        if self.orch.done:
            self.end_reason = "route_complete"
        elif self.tick * dt >= cfg.timeout_s:
            self.end_reason = "timeout"
        if self.end_reason is not None:
            self.events.append({"tick": self.tick - 1, "kind": "end",
                                "reason": self.end_reason})

    def _drag_grabbed(self, dt: float):
        """Move the held handle with the hand: the hand's offset from the
        handle is projected onto the handle's direction of travel and the
        object state advances by the projection, rate-limited."""
        if self.grabbed is None:
            return
        obj = self.world.objects.get(self.grabbed)
        tgt = self.world.targets.get(self.grabbed)
        if obj is None or tgt is None:
            return
        if obj.kind is ObjectKind.ELEVATOR:
            px, py = current_target_point(obj, tgt)
            near = math.hypot(self.hand[0] - px, self.hand[1] - py) \
                <= GRAB_PLANAR
            if near and obj.activated_at_s is None:
                self.world.replace_object(
                    replace(obj, activated_at_s=self.tick * dt))
            return
        px, py = current_target_point(obj, tgt)
        nudged = advance_object(obj, _STATE_EPS)
        qx, qy = current_target_point(nudged, tgt)
        du = ((qx - px) / _STATE_EPS, (qy - py) / _STATE_EPS)
        norm2 = du[0] * du[0] + du[1] * du[1]
        if norm2 <= 1e-12:
            return
        ds = ((self.hand[0] - px) * du[0] + (self.hand[1] - py) * du[1]) / norm2
        rate = self.cfg.user.door_rate if obj.kind is ObjectKind.DOOR \
            else self.cfg.user.chair_rate
        ds = max(-rate * dt, min(rate * dt, ds))
        if ds != 0.0:
            self.world.replace_object(advance_object(obj, ds))

    # -- act mechanics --------------------------------------------------------

    @staticmethod
    def _vector(value, length: int, name: str) -> tuple[float, ...]:
        if (not isinstance(value, list) or len(value) != length or
                any(isinstance(v, bool) or not isinstance(v, (int, float))
                    for v in value)):
            raise RequestError("bad_request",
                               f"{name} must be a list of {length} numbers")
        return tuple(float(v) for v in value)

    def _move_body(self, delta: tuple[float, ...]):
        # One act may carry at most one walking tick of displacement.
        cap = self.cfg.user.walk_speed * self.cfg.dt
        dx, dy = delta
        norm = math.hypot(dx, dy)
        if norm > cap and norm > 0.0:
            dx, dy = dx * cap / norm, dy * cap / norm
        cand = (self.user_pos[0] + dx, self.user_pos[1] + dy)
        try:
            free = self.world.clearance(cand, exclude_object=self.grabbed) \
                >= self.cfg.geometry.user_radius
        except OutOfBounds:
            free = False
        if free:
            self.user_pos = cand
            self.hand = (self.hand[0] + dx, self.hand[1] + dy, self.hand[2])

    def _move_hand(self, delta: tuple[float, ...]):
        cap = self.cfg.user.hand_speed * self.cfg.dt
        dx, dy, dh = delta
        norm = math.sqrt(dx * dx + dy * dy + dh * dh)
        if norm > cap and norm > 0.0:
            dx, dy, dh = (v * cap / norm for v in (dx, dy, dh))
        hx, hy = self.hand[0] + dx, self.hand[1] + dy
        hh = max(0.0, self.hand[2] + dh)
        # The arm only reaches so far from the body.
        px, py = self.user_pos
        planar = math.hypot(hx - px, hy - py)
        if planar > self.cfg.user.reach:
            s = self.cfg.user.reach / planar
            hx, hy = px + (hx - px) * s, py + (hy - py) * s
        self.hand = (hx, hy, hh)

    def _set_grab(self, on: bool):
        if not on:
            self.grabbed = None
            return
        if self.grabbed is not None:
            return
        for owner, tgt in self.world.targets.items():
            obj = self.world.objects.get(owner)
            if obj is None:
                continue
            px, py = current_target_point(obj, tgt)
            if (math.hypot(self.hand[0] - px, self.hand[1] - py) <= GRAB_PLANAR
                    and abs(self.hand[2] - tgt.height) <= GRAB_HEIGHT):
                self.grabbed = owner
                return

    # -- frames ---------------------------------------------------------------

    def _require_live(self):
        if not self._live:
            raise RequestError("no_session", "send reset first")

    def state_frame(self) -> dict:
        force = self.orch.last_force
        att = list(force.F_att) if force is not None else [0.0, 0.0]
        rep = list(force.F_rep_sum) if force is not None else [0.0, 0.0]
        metrics = compute_metrics(
            EpisodeLog(header=self.header, events=list(self.events)),
            strict=False)
        return {
            "type": "state",
            "tick": self.tick,
            "mode": self.mode_label,
            "robot": {"x": self.robot.x, "y": self.robot.y,
                      "heading": self.robot.heading},
            "user": {"pos": list(self.user_pos), "hand": list(self.hand),
                     "grabbed": self.grabbed, "pushing": self.pushing},
            "objects": [{"id": o.id, "kind": o.kind.value, "state": o.state}
                        for o in self.world.objects.values()],
            "prompts": list(self.last_prompts),
            "forces": {"att": att, "rep": rep},
            "metrics_so_far": {
                "total_s": metrics.total_s,
                "collisions": metrics.collisions,
                "interventions": metrics.interventions,
                "completed": metrics.completed,
            },
            "end": self.end_reason,
        }


def error_frame(code: str, detail: str) -> dict:
    return {"type": "error", "code": code, "detail": detail}


def build_app(scenario_dir: str | Path,
              static_dir: str | Path | None = None) -> FastAPI:
    catalogue = discover_scenarios(scenario_dir)
    app = FastAPI(title="leadapt session service")

    @app.websocket("/ws")
    async def ws_endpoint(socket: WebSocket):
        await socket.accept()
        session = InteractiveSession(catalogue)
        try:
            while True:
                text = await socket.receive_text()
                try:
                    message = json.loads(text)
                except json.JSONDecodeError as exc:
                    await socket.send_json(error_frame(
                        "bad_json", f"invalid JSON: {exc}"))
                    continue
                if not isinstance(message, dict):
                    await socket.send_json(error_frame(
                        "bad_json", "message must be a JSON object"))
                    continue
                try:
                    await socket.send_json(session.handle(message))
                except RequestError as exc:
                    await socket.send_json(error_frame(exc.code, exc.detail))
        except WebSocketDisconnect:
            pass

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="static")
    return app


def serve(port: int, scenario_dir: str | Path,
          static_dir: str | Path | None = None, host: str = "127.0.0.1"):
    """Run the service until interrupted (blocking)."""
    import uvicorn

    app = build_app(scenario_dir, static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
