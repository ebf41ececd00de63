"""Command line harness.

Subcommands:
    run       simulate one episode, write trace (JSONL) and metrics (JSON)
    validate  check a scenario document without running it
    sweep     run a seed range, one metrics row per seed (JSONL)
    report    render figures + allocation CSV from an existing trace

Exit codes: 0 ok, 1 scenario validation failure, 2 runtime invariant
violation.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .errors import (
    EngineInvariantError,
    ScenarioParseError,
    ScenarioValidationError,
)
from .world_sim import load_scenario_file

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _parse_seed_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        first, last = int(lo), int(hi)
        if last < first:
            raise ValueError(f"empty seed range '{text}'")
        return list(range(first, last + 1))
    return [int(text)]


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario_file(args.scenario)
    trace = harness.run_episode(scenario, args.seed, steps=args.steps)
    metrics = harness.compute_metrics(trace)
    if args.trace:
        harness.write_trace(trace, args.trace)
    if args.metrics:
        harness.write_metrics(metrics, args.metrics)
    summary = metrics.to_dict()
    summary["ticks"] = len(trace)
    summary["seed"] = args.seed
    print(json.dumps(summary))
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        with open(args.scenario, "r", encoding="utf-8") as fh:
            document = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    violations = harness.validate_scenario(document)
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    print("ok")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    scenario = load_scenario_file(args.scenario)
    rows = harness.sweep(scenario, _parse_seed_range(args.seeds))
    lines = "".join(json.dumps(row, separators=(",", ":")) + "\n" for row in rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(lines)
    else:
        sys.stdout.write(lines)
    print(f"swept {len(rows)} seeds", file=sys.stderr)
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    from .report import render_report

    trace = harness.load_trace(args.trace)
    paths = render_report(trace, args.out, stem=args.stem)
    for path in paths:
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selfreg",
        description="Multi-goal self-regulation engine and simulation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one episode")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--steps", type=int, default=None,
                       help="override scenario horizon")
    p_run.add_argument("--trace", default=None, help="trace output path (JSONL)")
    p_run.add_argument("--metrics", default=None, help="metrics output path (JSON)")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="validate a scenario document")
    p_val.add_argument("--scenario", required=True)
    p_val.set_defaults(func=_cmd_validate)

    p_sweep = sub.add_parser("sweep", help="run a range of seeds")
    p_sweep.add_argument("--scenario", required=True)
    p_sweep.add_argument("--seeds", required=True, help="range A..B, inclusive")
    p_sweep.add_argument("--out", default=None, help="metrics table path (JSONL)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_rep = sub.add_parser("report", help="render figures from a trace")
    p_rep.add_argument("--trace", required=True)
    p_rep.add_argument("--out", required=True, help="output directory")
    p_rep.add_argument("--stem", default="episode", help="filename prefix")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ScenarioValidationError as exc:
        for v in exc.violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except EngineInvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
