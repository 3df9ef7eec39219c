"""Timing and safety metrics, computed purely from an episode log.

Stage clocks per task, marker to marker:

* approach — task start to the arrival announcement
* locate   — announcement to the user's hand landing on the target
* interact — hand-on-target to task completion (object worked, exit led)

Voice prompts pause every clock: each prompt inside a stage window subtracts
one playback allowance (``prompt_seconds``) from that stage, floored at zero.
Contacts are debounced into episodes: consecutive ticks of overlap count once.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import TYPE_CHECKING

from ..errors import MalformedLog

if TYPE_CHECKING:   # import cycle: episode.py uses compute_metrics
    from .episode import EpisodeLog

# Markers that bound the per-task stages, in required order.
_CHAIN = ("task_start", "servo_done", "hand_on_target", "task_complete")

CSV_COLUMNS = ("scenario", "seed", "variant", "task", "object", "approach_s",
               "locate_s", "interact_s", "total_s", "interventions",
               "collisions", "completed")


@dataclass(frozen=True)
class TaskMetrics:
    task: int
    object_id: str
    approach_s: float
    locate_s: float
    interact_s: float

    @property
    def stage_total_s(self) -> float:
        return self.approach_s + self.locate_s + self.interact_s


@dataclass(frozen=True)
class Metrics:
    tasks: tuple[TaskMetrics, ...]
    total_s: float
    interventions: int
    collisions: int
    completed: bool


def _contact_episodes(ticks: list[int]) -> int:
    """Number of contiguous runs in a sorted tick list."""
    runs = 0
    prev = None
    for t in sorted(ticks):
        if prev is None or t > prev + 1:
            runs += 1
        prev = t
    return runs


def compute_metrics(log: "EpisodeLog", prompt_seconds: float | None = None,
                    strict: bool = True) -> Metrics:
    """Reduce a log to metrics; the same log always gives the same numbers.

    ``strict`` demands a finished, well-formed log (an end event and a full
    marker chain for every started task). Non-strict mode tolerates a run
    still in flight or timed out: the incomplete trailing task is dropped.
    A log that claims route completion with a broken chain is malformed
    either way.
    """
    header = log.header
    if not isinstance(header, dict) or header.get("kind") != "header":
        raise MalformedLog("missing header")
    dt = header.get("dt")
    if not isinstance(dt, (int, float)) or dt <= 0:
        raise MalformedLog("header.dt: missing or invalid")
    ps = float(header.get("prompt_seconds", 2.0)) if prompt_seconds is None \
        else float(prompt_seconds)

    markers: dict[int, dict[str, int]] = {}
    objects: dict[int, str] = {}
    prompt_ticks: list[int] = []
    contact_ticks: dict[str, list[int]] = {}
    interventions = 0
    route_tick: int | None = None
    end_tick: int | None = None
    end_reason: str | None = None
    last_tick = None

    for i, ev in enumerate(log.events):
        tick = ev.get("tick")
        kind = ev.get("kind")
        if not isinstance(tick, int) or not isinstance(kind, str):
            raise MalformedLog(f"events[{i}]: needs integer tick and kind")
        if last_tick is not None and tick < last_tick:
            raise MalformedLog(f"events[{i}]: tick {tick} after {last_tick}")
        last_tick = tick
        if kind in _CHAIN:
            task = ev.get("task")
            if not isinstance(task, int):
                raise MalformedLog(f"events[{i}]: {kind} without task index")
            # A fallback can replay a marker; the first occurrence is the
            # stage boundary.
            markers.setdefault(task, {}).setdefault(kind, tick)
            if kind == "task_start":
                objects.setdefault(task, str(ev.get("object", "")))
        elif kind == "prompt":
            prompt_ticks.append(tick)
        elif kind == "contact":
            contact_ticks.setdefault(str(ev.get("who", "?")), []).append(tick)
        elif kind == "intervention":
            interventions += 1
        elif kind == "route_complete":
            route_tick = tick
        elif kind == "end":
            end_tick = tick
            end_reason = str(ev.get("reason", ""))

    if end_tick is None:
        if strict:
            raise MalformedLog("missing end event")
        end_tick = last_tick if last_tick is not None else 0
    completed = end_reason == "route_complete" or (
        end_reason is None and route_tick is not None)

    def stage(task: int, a: str, b: str) -> float:
        t0, t1 = markers[task][a], markers[task][b]
        inside = sum(1 for t in prompt_ticks if t0 <= t < t1)
        return max((t1 - t0) * dt - ps * inside, 0.0)

    tasks: list[TaskMetrics] = []
    for task in sorted(markers):
        have = markers[task]
        chain_ok = all(k in have for k in _CHAIN) and all(
            have[a] <= have[b] for a, b in zip(_CHAIN, _CHAIN[1:]))
        if not chain_ok:
            if route_tick is not None:
                raise MalformedLog(
                    f"task {task}: incomplete or out-of-order stage markers "
                    "in a completed route")
            if strict:
                raise MalformedLog(f"task {task}: incomplete stage markers")
            continue   # unfinished trailing task in a truncated log
        tasks.append(TaskMetrics(
            task=task, object_id=objects.get(task, ""),
            approach_s=stage(task, "task_start", "servo_done"),
            locate_s=stage(task, "servo_done", "hand_on_target"),
            interact_s=stage(task, "hand_on_target", "task_complete")))

    collisions = sum(_contact_episodes(t) for t in contact_ticks.values())
    return Metrics(tasks=tuple(tasks), total_s=end_tick * dt,
                   interventions=interventions, collisions=collisions,
                   completed=completed)


def metrics_rows(log: "EpisodeLog", metrics: Metrics) -> list[dict]:
    """Flat per-task rows (header context repeated) ready for CSV."""
    base = {
        "scenario": log.header.get("name", ""),
        "seed": log.header.get("seed", ""),
        "variant": log.header.get("variant", ""),
        "total_s": metrics.total_s,
        "interventions": metrics.interventions,
        "collisions": metrics.collisions,
        "completed": int(metrics.completed),
    }
    if not metrics.tasks:
        return [{**base, "task": "", "object": "",
                 "approach_s": "", "locate_s": "", "interact_s": ""}]
    return [{**base, "task": tm.task, "object": tm.object_id,
             "approach_s": tm.approach_s, "locate_s": tm.locate_s,
             "interact_s": tm.interact_s} for tm in metrics.tasks]


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.3f}"   # fixed precision keeps the bytes stable
    return str(value)


def rows_to_csv(rows: list[dict], columns=CSV_COLUMNS) -> str:
    out = io.StringIO()
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(_cell(row.get(c, "")) for c in columns) + "\n")
    return out.getvalue()


def metrics_csv(log: "EpisodeLog", metrics: Metrics | None = None) -> str:
    if metrics is None:
        metrics = compute_metrics(log, strict=False)
    return rows_to_csv(metrics_rows(log, metrics))
