"""Command-line entry point.

    ffcrowd simulate <scenario> --mode {continuous|ffa|compare|fog} --repeats N --seed S --out DIR [--check]
    ffcrowd presets --out DIR
    ffcrowd suite {table1|table4|compare|fog} --out DIR [--repeats N] [--seed S]

Exit status: 0 ok, 1 invalid input, 2 runtime failure, 3 ``--check`` threshold failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .pathplan import PlanningError
from .presets import suites, write_presets
from .scenario import ScenarioError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_CHECK = 3


class _Parser(argparse.ArgumentParser):
    """Usage errors count as invalid input."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ffcrowd", description="Crowd simulation with fast-forward frame skipping.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario file or preset name")
    sim.add_argument("scenario", help="scenario JSON file, or a preset name")
    sim.add_argument("--mode", choices=harness.MODES, default="compare")
    sim.add_argument("--repeats", type=int, default=harness.DEFAULT_REPEATS)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", type=Path, required=True)
    sim.add_argument("--frame-limit", type=int, default=harness.FRAME_LIMIT)
    sim.add_argument("--check", action="store_true", help="exit 3 when acceptance thresholds fail")

    pre = sub.add_parser("presets", help="write the built-in scenario files")
    pre.add_argument("--out", type=Path, required=True)

    su = sub.add_parser("suite", help="run a built-in experiment suite")
    su.add_argument("name", choices=sorted(suites()))
    su.add_argument("--repeats", type=int, default=harness.DEFAULT_REPEATS)
    su.add_argument("--seed", type=int, default=0)
    su.add_argument("--out", type=Path, required=True)
    return p


def _simulate(args) -> int:
    scenario = harness.resolve_scenario(args.scenario)
    plan = harness.ExperimentPlan(scenario, args.mode, args.repeats, args.seed, args.out, args.frame_limit)
    results = harness.run(plan)
    for r in results:
        print(",".join("" if v is None else str(v) for v in r.report_row()))
    if args.check:
        failures = harness.check(plan, results)
        for f in failures:
            print(f"CHECK FAILED: {f}", file=sys.stderr)
        if failures:
            return EXIT_CHECK
    return EXIT_OK


def _suite(args) -> int:
    if args.repeats < 1:
        raise harness.ValidationError("repeats must be >= 1")
    out = harness.run_suite(args.name, args.repeats, args.seed, args.out)
    n = sum(len(v) for v in out.values())
    print(f"{n} rows written to {args.out / 'report.csv'}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "presets":
            for p in write_presets(args.out):
                print(p)
            return EXIT_OK
        if args.command == "suite":
            return _suite(args)
        return _simulate(args)
    except (harness.ValidationError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (PlanningError, RuntimeError, ValueError, ArithmeticError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
