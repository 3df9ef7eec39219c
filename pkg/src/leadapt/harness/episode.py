"""Episode runner and its JSONL log format.

One episode = one scenario, one variant, one seed, run to route completion or
timeout on a fixed control period. The run is deterministic: the same inputs
produce a byte-identical log. Each log line is one JSON object — a header
first, then events with non-decreasing ticks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .. import __version__
from ..adapt import HandleSignal
from ..config import Variant
from ..errors import MalformedLog, OutOfBounds
from ..geometry import Pose2
from ..human import UserAgent, UserPhase, UserState, stuck_detector
from ..orchestrator import Orchestrator, UserSignals
from ..control import Prompt
from ..perception import sense_candidates
from ..rng import StreamSet
from ..world import ObjectKind, advance_object
from .metrics import Metrics, compute_metrics
from .scenario import Scenario


def _canonical(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class EpisodeLog:
    header: dict
    events: list[dict]

    def dumps(self) -> str:
        lines = [_canonical(self.header)]
        lines.extend(_canonical(e) for e in self.events)
        return "\n".join(lines) + "\n"

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "EpisodeLog":
        records = []
        for i, line in enumerate(text.splitlines()):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise MalformedLog(f"line {i + 1}: invalid JSON ({exc})") from exc
        if not records or records[0].get("kind") != "header":
            raise MalformedLog("first line must be the header")
        return cls(header=records[0], events=records[1:])

    @classmethod
    def load(cls, path: str | Path) -> "EpisodeLog":
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    @property
    def end_reason(self) -> str | None:
        for e in reversed(self.events):
            if e.get("kind") == "end":
                return e.get("reason")
        return None

    def metrics(self, strict: bool = False) -> Metrics:
        return compute_metrics(self, strict=strict)


def _elevator_progress(world, now_s: float) -> None:
    """Called elevators open on a timer: delay first, then a linear slide."""
    for obj in list(world.objects.values()):
        if obj.kind is not ObjectKind.ELEVATOR or obj.activated_at_s is None:
            continue
        k = obj.kinematics
        t = now_s - obj.activated_at_s - k.open_delay
        state = min(max(t / k.open_duration, 0.0), 1.0)
        if state != obj.state:
            world.replace_object(replace(obj, state=state))


def run_episode(scenario: Scenario, variant: Variant | str | None = None,
                seed: int | None = None) -> EpisodeLog:
    """Run one full episode and return its log (it is not written anywhere)."""
    cfg = scenario.session_config()
    if variant is not None:
        cfg.variant = Variant(variant) if isinstance(variant, str) else variant
    if seed is None:
        seed = scenario.seed

    streams = StreamSet(seed)
    world = scenario.build_world()
    orch = Orchestrator(scenario.tasks, cfg)
    agent = UserAgent(scenario.user_start, cfg.user, cfg.geometry,
                      streams.get("user"), cfg.variant)
    percep_rng = streams.get("perception")
    robot = scenario.robot_start
    dt = cfg.dt

    header = {
        "kind": "header", "schema": 1, "version": __version__,
        "name": scenario.name, "scenario_sha256": scenario.sha256,
        "scenario": scenario.raw, "seed": seed, "variant": cfg.variant.value,
        "dt": dt, "prompt_seconds": cfg.prompt_seconds,
    }
    events: list[dict] = []

    user = agent.state
    handle = HandleSignal()
    buttons: tuple = ()
    history: list[UserState] = []

    max_ticks = int(round(cfg.timeout_s / dt))
    end_reason = "timeout"
    end_tick = max_ticks - 1
    for tick in range(max_ticks):
        sensed = sense_candidates(world, robot, cfg.noise, percep_rng)
        signals = UserSignals(user_pos=user.pos, hand=user.hand,
                              handle=handle, buttons=buttons)
        result = orch.tick(world, robot, sensed, signals)

        prompts: list[Prompt] = []
        for ev in result.events:
            events.append({"tick": tick, **ev})
            if ev["kind"] == "task_start":
                agent.set_task(ev["object"])
            elif ev["kind"] == "prompt":
                prompts.append(Prompt(text=ev["text"], channel=ev["channel"]))

        cmd = result.command
        heading = cmd.heading_cmd if cmd.heading_cmd is not None else robot.heading
        robot = Pose2(robot.x + cmd.vx * dt, robot.y + cmd.vy * dt, heading)

        step = agent.step(world, robot, prompts, result.mode.kind, tick, dt)
        user, handle, buttons = step.state, step.handle, step.buttons
        if step.manipulation is not None:
            m = step.manipulation
            obj = world.objects[m.object_id]
            if m.activate and obj.kind is ObjectKind.ELEVATOR \
                    and obj.activated_at_s is None:
                world.replace_object(replace(obj, activated_at_s=tick * dt))
                obj = world.objects[m.object_id]
            if m.dstate != 0.0:
                world.replace_object(advance_object(obj, m.dstate))
        _elevator_progress(world, tick * dt)

        for who, point, radius, grasped in (
                ("robot", (robot.x, robot.y), cfg.geometry.robot_radius, None),
                ("user", user.pos, cfg.geometry.user_radius, user.grasped)):
            try:
                free = world.clearance(point, exclude_object=grasped) >= radius
            except OutOfBounds:
                free = False
            if not free:
                events.append({"tick": tick, "kind": "contact", "who": who})

        # Stuck watchdog: only a search can stall the episode (waiting for an
        # elevator is legitimate stillness), and each firing re-seeds the
        # user's believed target from truth.
        if user.phase is UserPhase.SEARCHING:
            history.append(user)
            if stuck_detector(history, dt):
                task = orch.tasks[min(orch.task_index, len(orch.tasks) - 1)]
                events.append({"tick": tick, "kind": "intervention",
                               "reason": "stuck"})
                agent.assist(world)
                events.append({"tick": tick, "kind": "assist",
                               "object": task.object_id})
                history.clear()
        else:
            history.clear()

        events.append({
            "tick": tick, "kind": "step", "mode": result.mode.label(),
            "robot": [robot.x, robot.y, robot.heading],
            "user": [user.pos[0], user.pos[1]],
            "hand": [user.hand[0], user.hand[1], user.hand[2]],
            "cmd": [cmd.vx, cmd.vy],
        })

        if orch.done:
            agent.finish()
            end_reason = "route_complete"
            end_tick = tick
            break

    events.append({"tick": end_tick, "kind": "end", "reason": end_reason})
    return EpisodeLog(header=header, events=events)
