#!/usr/bin/env python3
"""
pmlab - numerical lab for sequential Pomeau-Manneville maps

Pushes densities through compositions of intermittent maps with transfer
operators, measures loss of memory, correlation decay, covering times and
kernel lower bounds, and writes CSV tables with JSON sidecars.

Usage:
    python app.py decay --alpha 0.5 --seed 7 --n-max 1000 --assert
    python app.py cone-check --alpha 0.5 --samples 200
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from core.errors import ConfigError
from utils.config import COMMANDS, build_config

logger = logging.getLogger(__name__)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmlab", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("command", choices=COMMANDS, help="Experiment to run")
    parser.add_argument("--config", type=str, help="JSON run file with flat keys mirroring the flags")
    parser.add_argument("--alpha", type=float, help="Family exponent cap, 0 < alpha < 1")
    parser.add_argument("--seed", type=int, help="Seed of the first sequence")
    parser.add_argument("--runs", type=int, help="Number of sequences (seeds seed, seed+1, ...)")
    parser.add_argument("--policy", type=str, help="constant, uniform, power-decay or stretched-exp")
    parser.add_argument("--beta", type=float, help="Exponent of the constant policy")
    parser.add_argument("--beta-min", type=float, help="Lower end of the uniform policy")
    parser.add_argument("--theta", type=float, help="Decay exponent of the vanishing policies")
    parser.add_argument("--decay-rate", type=float, help="Rate c of the stretched-exp policy")
    parser.add_argument("--n-max", type=int, help="Number of maps")
    parser.add_argument("--eps", type=float, help="Averaging half-width for the kernel")
    parser.add_argument("--eps-list", type=_float_list, help="Comma-separated eps values")
    parser.add_argument("--mesh-n", type=int, help="Number of mesh cells")
    parser.add_argument("--grading", type=float, help="Mesh grading exponent")
    parser.add_argument("--phi", type=str, help="First initial density or C1 observable")
    parser.add_argument("--psi", type=str, help="Second initial density or C1 observable")
    parser.add_argument("--observable", type=str, help="C1 observable of the correlation run")
    parser.add_argument("--method", type=str, help="Correlation method: transfer or orbit")
    parser.add_argument("--kappa", type=float, help="Constant of the epsilon schedule")
    parser.add_argument("--c-cov", type=float, help="Covering constant; calibrated by a cover scan when unset")
    parser.add_argument("--band-mode", type=str, help="Slope acceptance: upper or two-sided")
    parser.add_argument("--samples", type=int, help="Samples of the cone invariance suite")
    parser.add_argument("--output-dir", type=str, help="Directory for CSV, JSON and SVG output")
    parser.add_argument("--plot", action="store_true", default=None, help="Render a log-log SVG")
    parser.add_argument("--assert", dest="assert_band", action="store_true", default=None,
                        help="Exit with status 3 when an acceptance check fails")
    parser.add_argument("--log-level", type=str, default=None, help="DEBUG, INFO, WARNING or ERROR")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of the pmlab command."""
    load_dotenv()
    args = build_parser().parse_args(argv)

    level = (args.log_level or os.environ.get("PMLAB_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "log_level")}
    try:
        config = build_config(overrides, run_file=args.config)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        print(f"pmlab: {e}", file=sys.stderr)
        return 2

    # Registers the commands and loads matplotlib
    from utils.dispatch import run

    return run(config)


if __name__ == "__main__":
    sys.exit(main())
