# ===============================
# main.py
# ICI Whitening Simulator: batch CLI
# ===============================
# Parses an experiment config and runs the seeded sweep, writing CSV tables,
# manifest.json and metrics.prom to the output directory.
#
#   python -m ici_whitening.main run <config> [--seed N] [--out DIR] [--jobs N] [--dry-run]
#   python -m ici_whitening.main validate <config>
#
# Exit codes: 0 success, 2 configuration error, 1 anything else.
# ===============================

import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from ici_whitening import __version__
from ici_whitening.config import dump_config, parse_config
from ici_whitening.errors import ConfigError
from ici_whitening.harness import run_experiment
from ici_whitening.seeding import MAX_SEED

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ici-whitening",
        description="Two-cell MIMO-OFDM interference detection and whitening experiments",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=os.getenv("ICI_LOG_LEVEL", "INFO"))
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run an experiment config")
    run.add_argument("config", help="Path to the experiment config file")
    run.add_argument("--seed", type=int, default=None, help="Master seed (default: scenario.seed)")
    run.add_argument("--out", default=os.getenv("ICI_OUTPUT_DIR"), help="Output directory (default: output_dir)")
    run.add_argument("--jobs", type=int, default=None, help="Worker processes (default: ICI_JOBS or 1)")
    run.add_argument("--dry-run", action="store_true", help="Plan the tasks without running them")

    validate = sub.add_parser("validate", help="Parse a config and print it fully resolved")
    validate.add_argument("config", help="Path to the experiment config file")
    return parser


def resolve_jobs(jobs: Optional[int]) -> int:
    """--jobs if given, else ICI_JOBS, else 1."""
    if jobs is None:
        raw = os.getenv("ICI_JOBS", "1")
        try:
            jobs = int(raw)
        except ValueError:
            raise ConfigError(f"ICI_JOBS must be an integer, got {raw!r}")
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return jobs


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=LOG_FORMAT)

    try:
        spec = parse_config(args.config)
        if args.command == "validate":
            sys.stdout.write(dump_config(spec))
            return EXIT_OK

        jobs = resolve_jobs(args.jobs)
        if args.seed is not None and not 0 <= args.seed <= MAX_SEED:
            raise ConfigError(f"--seed must be in [0, {MAX_SEED}]")
        summary = run_experiment(spec, master_seed=args.seed, output_dir=args.out, jobs=jobs, dry_run=args.dry_run)
        if not args.dry_run:
            logger.info(f"Results written to {summary.output_dir}")
        return EXIT_OK
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG_ERROR
    except Exception as e:
        logger.exception(f"Experiment failed: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
