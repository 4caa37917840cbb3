"""Command line entry point for running drilling experiments."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from .harness import ARMS, PROFILES, ConfigError, load_config, run_experiment

log = logging.getLogger("drillsim")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drillsim",
        description="Closed-loop autonomous drilling simulator",
    )
    parser.add_argument("--config", help="JSON config file", default=None)
    parser.add_argument("--arm", choices=ARMS, default=None, help="estimator arm")
    parser.add_argument(
        "--profile", choices=PROFILES, default=None, help="world and sensor profile"
    )
    parser.add_argument("--trials", type=int, default=None, help="trials per arm")
    parser.add_argument("--seed", type=int, default=None, help="base seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument(
        "--ablation",
        action="store_const",
        const=True,
        default=None,
        help="run all four arms on paired worlds",
    )
    parser.add_argument(
        "--dump-surface",
        action="store_const",
        const=True,
        default=None,
        help="write per-trial surface CSVs",
    )
    parser.add_argument(
        "--dump-traces",
        action="store_const",
        const=True,
        default=None,
        help="write per-trial cycle traces",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; usage errors
        # are a caller mistake here, not an I/O failure.
        return 0 if exc.code == 0 else 1

    overrides = {
        "arm": args.arm,
        "profile": args.profile,
        "trials": args.trials,
        "seed": args.seed,
        "out_dir": args.out,
        "ablation": args.ablation,
        "dump_surface": args.dump_surface,
        "dump_traces": args.dump_traces,
    }
    try:
        config = load_config(args.config, overrides)
    except (ConfigError, ValueError) as exc:
        log.error("bad configuration: %s", exc)
        return 1
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return 2

    log.info(
        "running %s profile=%s trials=%d seed=%d out=%s",
        "ablation suite" if config.ablation else f"arm={config.arm}",
        config.profile,
        config.trials,
        config.seed,
        config.out_dir,
    )
    try:
        result = run_experiment(config)
    except OSError as exc:
        log.error("cannot write results: %s", exc)
        return 2

    for summary in result["summaries"]:
        mean_time = summary.mean_time_successful_min
        log.info(
            "arm=%s success=%.1f%% mean_success_time=%s",
            summary.arm,
            summary.rates_percent["Success"],
            "n/a" if mean_time is None else f"{mean_time:.2f} min",
        )
    log.info("wrote %s", ", ".join(result["paths"][:2]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
