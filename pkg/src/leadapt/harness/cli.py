"""Command-line front end: run episodes, batch seeds, compare variants,
replay logs, validate scenario files, and serve interactive sessions.

Exit codes: 0 success, 1 validation error (bad scenario/arguments/log),
2 runtime error inside a simulation, 3 replay mismatch.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..config import Variant
from ..errors import LeadaptError, MalformedLog, ScenarioError
from .compare import compare_modes
from .episode import EpisodeLog, run_episode
from .metrics import compute_metrics, metrics_csv, metrics_rows, rows_to_csv
from .scenario import parse_scenario, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_MISMATCH = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


def parse_seeds(spec: str) -> tuple[int, ...]:
    """Seed sets: "7", "0..19" (inclusive), or "1,4,9"."""
    spec = spec.strip()
    try:
        if ".." in spec:
            lo_s, hi_s = spec.split("..", 1)
            lo, hi = int(lo_s), int(hi_s)
            if hi < lo:
                raise CliError(f"empty seed range {spec!r}")
            return tuple(range(lo, hi + 1))
        if "," in spec:
            return tuple(int(s) for s in spec.split(","))
        return (int(spec),)
    except ValueError:
        raise CliError(f"cannot parse seeds {spec!r} "
                       "(use N, A..B, or a,b,c)") from None


def _load(path: str):
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        raise CliError(f"scenario: {exc}") from exc


def _summary_line(log: EpisodeLog) -> str:
    m = compute_metrics(log, strict=False)
    h = log.header
    stages = " ".join(
        f"task{t.task}[approach={t.approach_s:.1f} locate={t.locate_s:.1f} "
        f"interact={t.interact_s:.1f}]" for t in m.tasks)
    return (f"{h.get('name')} seed={h.get('seed')} variant={h.get('variant')} "
            f"end={log.end_reason} total={m.total_s:.1f}s "
            f"collisions={m.collisions} interventions={m.interventions}"
            + (f" {stages}" if stages else ""))


def cmd_run(args) -> int:
    scenario = _load(args.scenario)
    try:
        log = run_episode(scenario, variant=args.variant, seed=args.seed)
    except LeadaptError as exc:
        raise CliError(f"episode failed: {exc}", EXIT_RUNTIME) from exc
    if args.log:
        log.dump(args.log)
    if args.metrics:
        Path(args.metrics).write_text(metrics_csv(log), encoding="utf-8")
    print(_summary_line(log))
    return EXIT_OK


def cmd_batch(args) -> int:
    scenario = _load(args.scenario)
    seeds = parse_seeds(args.seeds)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in seeds:
        try:
            log = run_episode(scenario, variant=args.variant, seed=seed)
        except LeadaptError as exc:
            raise CliError(f"episode (seed {seed}) failed: {exc}",
                           EXIT_RUNTIME) from exc
        if out_dir:
            log.dump(out_dir
                     / f"{scenario.name}_{args.variant}_{seed}.jsonl")
        rows.extend(metrics_rows(log, compute_metrics(log, strict=False)))
        print(_summary_line(log))
    csv = rows_to_csv(rows)
    if args.metrics:
        Path(args.metrics).write_text(csv, encoding="utf-8")
    else:
        print(csv, end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = _load(args.scenario)
    seeds = parse_seeds(args.seeds)
    if len(seeds) < 2:
        raise CliError("compare needs at least two seeds")
    try:
        report = compare_modes(scenario, seeds)
    except LeadaptError as exc:
        raise CliError(f"comparison failed: {exc}", EXIT_RUNTIME) from exc
    if args.out:
        Path(args.out).write_text(report.to_csv(), encoding="utf-8")
    print(report.to_table(), end="")
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        original = EpisodeLog.load(args.log)
    except OSError as exc:
        raise CliError(f"log: cannot read ({exc})") from exc
    except MalformedLog as exc:
        raise CliError(f"log: {exc}") from exc
    header = original.header
    raw = header.get("scenario")
    if not isinstance(raw, dict):
        raise CliError("log: header carries no scenario to replay")
    try:
        scenario = parse_scenario(raw, name=header.get("name"))
    except ScenarioError as exc:
        raise CliError(f"log: embedded scenario invalid: {exc}") from exc
    try:
        again = run_episode(scenario, variant=header.get("variant"),
                            seed=header.get("seed"))
    except LeadaptError as exc:
        raise CliError(f"replay failed: {exc}", EXIT_RUNTIME) from exc
    if args.check:
        old, new = original.dumps().splitlines(), again.dumps().splitlines()
        for i, (a, b) in enumerate(zip(old, new)):
            if a != b:
                print(f"replay mismatch at line {i + 1}:")
                print(f"  logged:   {a}")
                print(f"  replayed: {b}")
                return EXIT_MISMATCH
        if len(old) != len(new):
            print(f"replay mismatch: {len(old)} logged lines vs "
                  f"{len(new)} replayed")
            return EXIT_MISMATCH
        print(f"replay ok: {len(new)} lines identical")
        return EXIT_OK
    print(_summary_line(again))
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = _load(args.scenario)
    rows, cols = len(scenario.rows), len(scenario.rows[0])
    print(f"ok: {scenario.name} — map {cols}x{rows} at "
          f"{scenario.resolution} m/cell, {len(scenario.objects)} object(s), "
          f"{len(scenario.tasks)} task(s), seed {scenario.seed}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve   # keeps web deps out of batch-only use

    scenario_dir = Path(args.scenario_dir)
    if not scenario_dir.is_dir():
        raise CliError(f"scenario dir {scenario_dir} does not exist")
    static = args.static_dir if args.static_dir else None
    print(f"serving ws://{args.host}:{args.port}/ws "
          f"(scenarios from {scenario_dir})")
    serve(args.port, scenario_dir, static, host=args.host)
    return EXIT_OK


def default_scenario_dir() -> str:
    return str(Path(__file__).resolve().parents[1] / "scenarios")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leadapt",
        description="Dual-mode guide-robot simulation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one episode")
    run.add_argument("--scenario", required=True)
    run.add_argument("--variant", choices=[v.value for v in Variant],
                     default=Variant.FULL.value)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--log", help="write the episode log (JSONL)")
    run.add_argument("--metrics", help="write per-task metrics (CSV)")
    run.set_defaults(func=cmd_run)

    batch = sub.add_parser("batch", help="run one scenario across seeds")
    batch.add_argument("--scenario", required=True)
    batch.add_argument("--seeds", required=True, help="N, A..B, or a,b,c")
    batch.add_argument("--variant", choices=[v.value for v in Variant],
                       default=Variant.FULL.value)
    batch.add_argument("--out-dir", help="write one log per seed here")
    batch.add_argument("--metrics", help="write combined metrics CSV here "
                                         "(default: stdout)")
    batch.set_defaults(func=cmd_batch)

    comp = sub.add_parser("compare",
                          help="full vs non-adaptive across seeds")
    comp.add_argument("--scenario", required=True)
    comp.add_argument("--seeds", required=True)
    comp.add_argument("--out", help="write the per-run CSV here")
    comp.set_defaults(func=cmd_compare)

    replay = sub.add_parser("replay",
                            help="re-simulate a log from its header")
    replay.add_argument("--log", required=True)
    replay.add_argument("--check", action="store_true",
                        help="compare against the original line by line")
    replay.set_defaults(func=cmd_replay)

    validate = sub.add_parser("validate", help="check a scenario file")
    validate.add_argument("--scenario", required=True)
    validate.set_defaults(func=cmd_validate)

    serve_p = sub.add_parser("serve", help="interactive session service")
    serve_p.add_argument("--port", type=int, default=8765)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--scenario-dir", default=default_scenario_dir())
    serve_p.add_argument("--static-dir",
                         help="also serve these files over HTTP")
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
