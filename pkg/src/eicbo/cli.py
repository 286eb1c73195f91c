"""Command line front end for the benchmark harness.

Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when more
than 5% of trials fail.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bench import config_from_mapping, run_experiment
from .testbed import FUNCTION_IDS

FAILURE_THRESHOLD = 0.05


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eicbo",
        description="Run a cumulative-regret benchmark and write CSV, SVG, and manifest output.",
    )
    parser.add_argument("--config", help="JSON config file; explicit flags override its values")
    parser.add_argument(
        "--function", help=f"objective to optimize, one of {', '.join(sorted(FUNCTION_IDS))}"
    )
    parser.add_argument("--algos", help="comma-separated algorithm ids (default: all)")
    parser.add_argument("--trials", type=int, help="number of paired trials per algorithm")
    parser.add_argument("--budget-extra", type=int, help="adaptive evaluations beyond the initial design")
    parser.add_argument("--n0", type=int, help="initial design size (default: per-dimension protocol value)")
    parser.add_argument("--noise-sd", type=float, help="observation noise standard deviation")
    parser.add_argument("--seed", type=int, help="base seed for paired trial streams")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, help="parallel trial workers (default 1)")
    return parser


def _mapping_from_args(args: argparse.Namespace) -> dict:
    mapping: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        mapping.update(loaded)
    flags = {
        "function": args.function,
        "algos": args.algos,
        "trials": args.trials,
        "budget_extra": args.budget_extra,
        "n0": args.n0,
        "noise_sd": args.noise_sd,
        "seed": args.seed,
        "out": args.out,
        "workers": args.workers,
    }
    mapping.update({k: v for k, v in flags.items() if v is not None})
    return mapping


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_mapping(_mapping_from_args(args))
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        result = run_experiment(config)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for failure in result.failures:
        print(
            f"warning: {failure.algorithm_id} trial {failure.trial} failed: {failure.error}",
            file=sys.stderr,
        )
    print(f"wrote results to {result.output_dir}")
    if result.failure_fraction > FAILURE_THRESHOLD:
        print(
            f"error: {result.failure_fraction:.0%} of trials failed "
            f"(threshold {FAILURE_THRESHOLD:.0%})",
            file=sys.stderr,
        )
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
