"""
Entry point for python -m aoinf
"""

import argparse
import logging
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from . import __version__
from .config import CONFIG_NAMES, load_config
from .experiments import (
    cmd_evaluate,
    cmd_init,
    cmd_simulate,
    cmd_solve,
    cmd_sweep,
    cmd_verify,
)
from .policies import BASELINES, SingularSystemError


def _configure_logging(verbosity: int):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoinf",
        description="Average-cost AoInf scheduling: solve, evaluate, simulate, sweep, verify",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Solve the baseline instance and write report.json, policy.csv, values.csv
  aoinf solve --out results

  # Change a parameter without editing the config
  aoinf solve --set model.p-tx=0.4 --set solver.theta=0.25

  # Evaluate a saved policy exactly
  aoinf evaluate --policy results/policy.csv

  # Simulate the optimal policy for two seeds
  aoinf simulate --seed 7 --seed 8

  # Optimal vs baseline gains over the probability grid, four processes
  aoinf sweep --workers 4

  # Run the verification suite
  aoinf verify -v

  # Generate a default config
  aoinf init
        """,
    )

    try:
        cli_version = version("aoinf")
    except PackageNotFoundError:
        cli_version = __version__
    parser.add_argument("--version", action="version", version=f"%(prog)s {cli_version}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-c",
        "--config",
        type=Path,
        help=f"Path to config file (default: auto-discover {CONFIG_NAMES[0]})",
    )
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config value, e.g. model.p-tx=0.4 (repeatable)",
    )
    common.add_argument("--out", type=Path, help="Output directory (overrides output-dir)")
    common.add_argument(
        "--workers", type=int, help="Worker processes for seeds and grid points"
    )
    common.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Log progress (-v) or solver iterations (-vv)",
    )

    policy_source = argparse.ArgumentParser(add_help=False)
    group = policy_source.add_mutually_exclusive_group()
    group.add_argument("--policy", type=Path, help="Policy CSV written by `aoinf solve`")
    group.add_argument("--baseline", choices=BASELINES, help="Use a baseline policy")

    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    sub.add_parser("solve", parents=[common], help="Solve for the optimal policy")
    sub.add_parser(
        "evaluate", parents=[common, policy_source], help="Exact long-run average of a policy"
    )
    simulate = sub.add_parser(
        "simulate", parents=[common, policy_source], help="Slot-level Monte Carlo runs"
    )
    simulate.add_argument(
        "--seed",
        dest="seeds",
        type=int,
        action="append",
        help="Seed of one run (repeatable; replaces simulation.seeds)",
    )
    sub.add_parser("sweep", parents=[common], help="Optimal vs baselines over the p grid")
    verify = sub.add_parser("verify", parents=[common], help="Run the verification checks")
    verify.add_argument(
        "--list-checks", action="store_true", help="List all available builtin checks"
    )
    init = sub.add_parser("init", help=f"Generate a default {CONFIG_NAMES[0]}")
    init.add_argument(
        "path",
        nargs="?",
        type=Path,
        default=Path.cwd() / CONFIG_NAMES[0],
        help="Where to write the config (default: ./aoinf.yaml)",
    )
    return parser


def _list_checks():
    from aoinf.checks.builtin import BUILTIN_CHECKS

    print("Available builtin checks:\n")
    for check_class in BUILTIN_CHECKS:
        check = check_class()
        print(f"  {check.check_id}")
        print(f"    {check.description}")
        print(f"    Default severity: {check.default_severity().value}")
        print()


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "init":
        result = cmd_init(args.path)
        print(result.text)
        sys.exit(result.exit_code)

    _configure_logging(args.verbose)

    if args.command == "verify" and args.list_checks:
        _list_checks()
        sys.exit(0)

    if args.config and not args.config.exists():
        print(f"Error: Config file not found: {args.config}", file=sys.stderr)
        sys.exit(1)

    try:
        config = load_config(args.config, args.overrides)
    except ValueError as e:
        print(f"Error loading config: {e}", file=sys.stderr)
        sys.exit(1)

    if args.out is not None:
        config.output_dir = args.out
    if args.workers is not None:
        if args.workers < 1:
            print("Error: --workers must be >= 1", file=sys.stderr)
            sys.exit(1)
        config.workers = args.workers

    try:
        if args.command == "solve":
            result = cmd_solve(config)
        elif args.command == "evaluate":
            result = cmd_evaluate(config, args.policy, args.baseline)
        elif args.command == "simulate":
            result = cmd_simulate(config, args.policy, args.baseline, args.seeds)
        elif args.command == "sweep":
            result = cmd_sweep(config)
        else:
            result = cmd_verify(config, verbose=args.verbose > 0)
    except (ValueError, SingularSystemError) as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)

    if result.text:
        print(result.text)
    for path in result.files:
        print(f"Wrote {path}")
    if result.exit_code and args.command != "verify":
        print(f"aoinf {args.command} finished with failures", file=sys.stderr)
    sys.exit(result.exit_code)


if __name__ == "__main__":
    main()
