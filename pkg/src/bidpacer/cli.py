"""Command-line experiment runner.

Exit codes: 0 on success, 1 on configuration errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import sys

from .experiment import (
    ConfigError,
    emit_reports,
    load_config,
    run_experiment,
    with_overrides,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bidpacer",
        description="Run budget-pacing bidding experiments from a config file.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_parser = sub.add_parser("run", help="run an experiment and write reports")
    run_parser.add_argument("config", help="path to a flat key = value config file")
    run_parser.add_argument("--out", default="out", help="output directory (default: out)")
    run_parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_parser.add_argument(
        "--trials", type=int, default=None, help="override the config trial count"
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        config = with_overrides(config, seed=args.seed, trials=args.trials)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        result = run_experiment(config)
        written = emit_reports(result, args.out)
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        print(f"run failed: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
