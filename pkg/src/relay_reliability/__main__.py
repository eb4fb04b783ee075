"""Command-line interface for relay_reliability.

Usage:
    python -m relay_reliability analyze --config configs/case_study.json --out reports/
    python -m relay_reliability simulate --config configs/case_study.json --iterations 100000 --seed 7
    python -m relay_reliability strategy-search --config configs/case_study.json --iterations 20000
    python -m relay_reliability metrics --config configs/metrics_four_tier.json
    python -m relay_reliability sweep --config configs/sweep_nonuniformity.json
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .commands import cmd_analyze, cmd_metrics, cmd_simulate, cmd_strategy_search, cmd_sweep
from .config import URLLC_MODES, apply_overrides, load_config
from .errors import (
    ConfigError,
    DomainError,
    InfeasibleNetworkError,
    NoFeasibleStrategyError,
    NonAbsorbingChainError,
    SearchBudgetError,
)
from .link_metrics import FLOW_MODES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
# Analysis failures share the non-config exit code.
EXIT_ANALYSIS = EXIT_INFEASIBLE

COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "metrics": cmd_metrics,
}


def _horizons(text: str):
    try:
        return [int(part) for part in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", required=True, help="Path to the JSON experiment config")
    common.add_argument("--out", "-o", default="reports", help="Directory for CSV reports (default: reports)")
    common.add_argument("--iterations", "-n", type=int, default=None, help="Monte Carlo trials (overrides config)")
    common.add_argument("--seed", type=int, default=None, help="Base random seed (overrides config)")
    common.add_argument(
        "--strategy",
        default=None,
        help="Priority ranks such as '3,2,1', or a mode: stationary_optimal, single_hop, density, dynamic",
    )
    common.add_argument(
        "--threads", "-j",
        type=int,
        default=os.cpu_count() or 1,
        help="Worker processes; results do not depend on it (default: all cores)",
    )
    common.add_argument("--ne", type=_horizons, default=None, help="Cumulative-curve horizons, e.g. '4,6,8'")
    common.add_argument(
        "--flow-mode",
        choices=FLOW_MODES,
        default=None,
        help="Multi-flow combination for metrics: 'independent' (every flow interrupted) "
        "or 'as_printed' (1 - prod(1 - P), at least one flow interrupted)",
    )
    common.add_argument(
        "--urllc-mode",
        choices=URLLC_MODES,
        default=None,
        help="URLLC latency budget: 'dimensional' or 'as_printed' (the closed-form expression taken literally, units unchecked)",
    )
    common.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")

    parser = argparse.ArgumentParser(
        prog="relay_reliability",
        description="Reliability of multi-tier satellite-terrestrial relay routing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="Closed-form matrices, hop statistics and interruption")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo interruption estimate")
    sub.add_parser("strategy-search", parents=[common], help="Report every priority strategy")
    sub.add_parser("metrics", parents=[common], help="Availability, coverage, URLLC and multi-flow metrics")
    sub.add_parser("sweep", parents=[common], help="Parameter sweep in long CSV format")
    return parser


def main(argv: list[str] | None = None) -> int:
    """Entry point for the CLI."""
    args = build_parser().parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")
    workers = max(args.threads, 1)

    try:
        config = apply_overrides(
            load_config(args.config),
            iterations=args.iterations,
            seed=args.seed,
            strategy=args.strategy,
            horizons=args.ne,
            flow_mode=args.flow_mode,
            urllc_mode=args.urllc_mode,
        )
        if args.command == "strategy-search":
            paths = cmd_strategy_search(config, args.out, workers, simulate=args.iterations is not None)
        elif args.command == "sweep":
            paths = cmd_sweep(config, args.out, workers, iterations=args.iterations)
        else:
            paths = COMMANDS[args.command](config, args.out, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SearchBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, NonAbsorbingChainError) as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except (InfeasibleNetworkError, NoFeasibleStrategyError) as exc:
        print(f"infeasible network: {exc}", file=sys.stderr)
        for diagnosis in getattr(exc, "diagnoses", []):
            print(f"  {diagnosis.root_cause}. {diagnosis.suggestion}", file=sys.stderr)
        return EXIT_INFEASIBLE

    _print_result(args.command, paths)
    return EXIT_OK


def _print_result(command, paths):
    """Print the written report files."""
    print("\n" + "=" * 60)
    print(f"{command.upper()} REPORTS")
    print("=" * 60)
    for path in paths:
        print(f"  {path}")
    print("=" * 60)


if __name__ == "__main__":
    sys.exit(main())
