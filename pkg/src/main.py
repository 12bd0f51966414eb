#!/usr/bin/env python3
"""
Main application entry point for the cooperative beamforming experiments.

Subcommands:
    simulate  run every drop of a configuration and write traces
    sweep     repeat the drops over the values of one parameter axis
    validate  run the self-check suites
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.dirname(os.path.dirname(__file__))))

from src.common.config import SWEEP_AXES, load_config
from src.common.exceptions import ConfigurationError, LeoCoopBfError
from src.common.utils import get_logger
from src.simulation.simulator import run_simulate, run_sweep
from src.simulation.validation import run_validation


def parse_values(text: str) -> List[float]:
    """Comma-separated list of numbers."""
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid value list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    """Build the command-line parser."""
    parser = argparse.ArgumentParser(prog="leocoopbf", description="Cooperative LEO beamforming experiments")
    parser.add_argument(
        "--log-level",
        type=str,
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Logging level"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Run all drops of a configuration")
    simulate.add_argument("--config", required=True, help="Path to the JSON configuration")
    simulate.add_argument("--out", default=None, help="Output directory (overrides output_dir)")

    sweep = sub.add_parser("sweep", help="Sweep one parameter axis")
    sweep.add_argument("--config", required=True, help="Path to the JSON configuration")
    sweep.add_argument("--axis", choices=SWEEP_AXES, default=None, help="Sweep axis (defaults to sweep.axis)")
    sweep.add_argument("--values", type=parse_values, default=None,
                       help="Comma-separated axis values (defaults to sweep.values)")
    sweep.add_argument("--out", default=None, help="Output directory (overrides output_dir)")

    validate = sub.add_parser("validate", help="Run the self-check suites")
    validate.add_argument("--full", action="store_true", help="Include the heavy oracle and Monte-Carlo checks")
    validate.add_argument("--rho-g", type=float, default=1.0, help="Penalty used by the elimination check")
    return parser


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    records = run_simulate(cfg, args.out)
    return 0 if any(r.status == "ok" for r in records) else 1


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    axis = args.axis or cfg.sweep.axis
    if axis is None:
        raise ConfigurationError("sweep.axis", "no sweep axis given")
    values = args.values if args.values is not None else cfg.sweep.values
    if cfg.sweep.solvers:
        cfg.solvers = list(cfg.sweep.solvers)
    records, _ = run_sweep(cfg, axis, values, args.out)
    return 0 if any(r.status == "ok" for r in records) else 1


def cmd_validate(args: argparse.Namespace) -> int:
    results = run_validation(full=args.full, rho_g=args.rho_g)
    failed = [r for r in results if not r.passed]
    for result in results:
        print(f"{'PASS' if result.passed else 'FAIL'}  {result.name}: {result.detail}")
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed: " + ", ".join(r.name for r in failed))
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Run the command-line interface."""
    args = build_parser().parse_args(argv)

    # Configure logging
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )
    logger = get_logger(__name__)

    handlers = {"simulate": cmd_simulate, "sweep": cmd_sweep, "validate": cmd_validate}
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        logger.error(f"Invalid configuration: {exc}")
        return 2
    except LeoCoopBfError as exc:
        logger.error(f"Run failed: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
