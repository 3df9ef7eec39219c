"""Paired comparison of the full system against its non-adaptive baseline.

Runs both variants on the same scenario across a set of seeds and aggregates
per-stage times. Pairing is by (seed, task): both variants see identical
worlds and user-model draws for a given seed, so differences are down to the
control policy.
"""
from __future__ import annotations

import statistics
from dataclasses import dataclass, field

from ..config import Variant
from .episode import run_episode
from .metrics import compute_metrics, rows_to_csv
from .scenario import Scenario

_STAGES = ("approach_s", "locate_s", "interact_s")


@dataclass
class CompareReport:
    scenario: str
    seeds: tuple[int, ...]
    rows: list[dict] = field(default_factory=list)
    # per variant value: {stage: (mean, sd)}; counts include only finished tasks
    summary: dict[str, dict[str, tuple[float, float]]] = field(default_factory=dict)
    win_rate: dict[str, float] = field(default_factory=dict)
    locate_full_faster: bool = False

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)

    def to_table(self) -> str:
        lines = [f"scenario: {self.scenario}   seeds: "
                 f"{', '.join(str(s) for s in self.seeds)}"]
        head = f"{'stage':<12}" + "".join(
            f"{v + ' mean':>14}{v + ' sd':>12}" for v in
            (Variant.FULL.value, Variant.NON_ADAPTIVE.value)) + f"{'win rate':>10}"
        lines.append(head)
        lines.append("-" * len(head))
        for stage in _STAGES:
            row = f"{stage:<12}"
            for variant in (Variant.FULL.value, Variant.NON_ADAPTIVE.value):
                mean, sd = self.summary[variant][stage]
                row += f"{mean:>14.3f}{sd:>12.3f}"
            row += f"{self.win_rate[stage]:>10.2f}"
            lines.append(row)
        verdict = "faster" if self.locate_full_faster else "not faster"
        lines.append(f"locate: full variant {verdict} than baseline on average")
        return "\n".join(lines) + "\n"


def compare_modes(scenario: Scenario, seeds) -> CompareReport:
    seeds = tuple(int(s) for s in seeds)
    if len(seeds) < 2:
        raise ValueError("need at least two seeds for a comparison")

    report = CompareReport(scenario=scenario.name, seeds=seeds)
    # samples[variant][stage] -> list of values; paired[(seed, task)][variant]
    samples = {v.value: {s: [] for s in _STAGES}
               for v in (Variant.FULL, Variant.NON_ADAPTIVE)}
    paired: dict[tuple[int, int], dict[str, dict[str, float]]] = {}

    n_tasks = len(scenario.tasks)
    for seed in seeds:
        for variant in (Variant.FULL, Variant.NON_ADAPTIVE):
            log = run_episode(scenario, variant, seed)
            metrics = compute_metrics(log, strict=False)
            by_task = {tm.task: tm for tm in metrics.tasks}
            for task in range(n_tasks):
                tm = by_task.get(task)
                row = {
                    "scenario": scenario.name, "seed": seed,
                    "variant": variant.value, "task": task,
                    "object": scenario.tasks[task].object_id,
                    "total_s": metrics.total_s,
                    "interventions": metrics.interventions,
                    "collisions": metrics.collisions,
                    "completed": int(metrics.completed),
                }
                if tm is None:   # timed out before this task finished
                    row.update(approach_s="", locate_s="", interact_s="")
                else:
                    values = {"approach_s": tm.approach_s,
                              "locate_s": tm.locate_s,
                              "interact_s": tm.interact_s}
                    row.update(values)
                    for stage, value in values.items():
                        samples[variant.value][stage].append(value)
                    paired.setdefault((seed, task), {})[variant.value] = values
                report.rows.append(row)

    for variant, stages in samples.items():
        report.summary[variant] = {}
        for stage, xs in stages.items():
            mean = statistics.fmean(xs) if xs else float("nan")
            sd = statistics.stdev(xs) if len(xs) >= 2 else 0.0
            report.summary[variant][stage] = (mean, sd)

    full, base = Variant.FULL.value, Variant.NON_ADAPTIVE.value
    for stage in _STAGES:
        both = [p for p in paired.values() if full in p and base in p]
        wins = sum(1 for p in both if p[full][stage] < p[base][stage])
        report.win_rate[stage] = wins / len(both) if both else 0.0

    full_locate = samples[full]["locate_s"]
    base_locate = samples[base]["locate_s"]
    report.locate_full_faster = bool(
        full_locate and base_locate and
        statistics.fmean(full_locate) < statistics.fmean(base_locate))
    return report
