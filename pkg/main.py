#!/usr/bin/env python3
"""
neumann-rbf
Main entry point for the command-line tool.
"""

import argparse
import logging
import sys
import os

# Add the project directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import APP_NAME, APP_VERSION
from data_manager import DataManager
from exceptions import ConfigError, NumericalError
from experiments import COMMANDS
from models.run_config import ARRANGEMENT_NAMES, DOMAINS, LOG_LEVELS, MODES, RunConfig

logger = logging.getLogger(APP_NAME)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=APP_NAME,
        description="RBF-FD interpolation with Neumann boundary conditions: stencil stabilization experiments.",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {APP_VERSION}")
    parser.add_argument('command', choices=sorted(COMMANDS), help="experiment to run")
    parser.add_argument('--config', metavar='FILE', help="file of `key = value` lines; flags override it")

    # Every default is None so that only flags given on the command line override the file
    parser.add_argument('--kernel', help="ga, mq, imq, iq, phsK or tpsK (default mq)")
    parser.add_argument('--eps-s', type=float, help="scaled shape parameter eps * s (default 0.5)")
    parser.add_argument('--poly', type=int, help="polynomial degree, -1 for none (default 2)")
    parser.add_argument('--mi', type=int, help="interior nodes per stencil (default 15)")
    parser.add_argument('--dmin', type=float, help="node selection threshold in [0, 1] (default 0.7)")
    parser.add_argument('--spacing', type=float, help="node spacing s (default depends on the command)")
    parser.add_argument('--mode', choices=MODES, help="stabilization to run (default both)")
    parser.add_argument('--domain', choices=DOMAINS, help="test domain or unit disk (default test)")
    parser.add_argument('--out', help="output directory")
    parser.add_argument('--seed', type=int, help="seed of the perturbed runs")
    parser.add_argument('--workers', type=int, help="worker threads")
    parser.add_argument('--alpha-samples', type=int, help="alpha samples of ref-sweep (default 721)")
    parser.add_argument('--n-iter', type=int, help="HHD iterations (default 50)")
    parser.add_argument('--perturb', type=float, help="perturbation amplitude in units of s")
    parser.add_argument('--arrangement', choices=ARRANGEMENT_NAMES, help="vmap interior arrangement")
    parser.add_argument('--allow-small-eps', action='store_true', default=None,
                        help="accept eps_s below 0.2 (accuracy is not guaranteed)")
    parser.add_argument('--skip-singular', action='store_true', default=None,
                        help="fall back to interior-only stencils where a local matrix is singular")
    parser.add_argument('--log-level', type=str.upper, choices=LOG_LEVELS, help="logging level")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items() if k not in ('command', 'config') and v is not None}
    if args.config:
        return RunConfig.from_file(args.config, overrides).validate()
    return RunConfig.from_dict(overrides).validate()


def log_progress(message: str, current: int, total: int):
    if total:
        logger.debug("%s: %d/%d", message, current, total)
    else:
        logger.debug("%s", message)


def main(argv=None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or os.environ.get('NEUMANN_RBF_LOG_LEVEL', 'INFO')).upper(),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )

    try:
        config = load_config(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    logging.getLogger().setLevel(config.log_level)

    data = DataManager(config.out)
    experiment = COMMANDS[args.command](config, data, log_progress)
    logger.info("running %s, results in %s", args.command, config.out)
    try:
        written = experiment.run()
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL

    data.record_run(args.command, config.to_dict(), written)
    logger.info("%s finished: %d file(s) written", args.command, len(written))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
