"""
qmr command-line entry point
Exact reduction of controlled Lindblad models: reduce, simulate, compare, check, gen-central-spin.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from src import __version__
from src.cli import register_cli_commands
from src.config import get_config, setup_logging
from src.utils import EXIT_FAILURE, QMRException, build_error_response, exit_code_for

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmr",
        description="Exact model reduction for controlled quantum Markov dynamics."
    )
    parser.add_argument("--version", action="version", version=f"qmr {__version__}")
    parser.add_argument("--log-level", default=None, help="override LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_cli_commands(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    logger.debug(f"qmr {__version__}, seed default {get_config().seed}, command {args.command}")

    try:
        return args.func(args)
    except QMRException as e:
        logger.error(f"{args.command} failed: {e.message}")
        print(json.dumps(build_error_response(e), indent=2, default=str), file=sys.stderr)
        return exit_code_for(e)
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}: {e}")
        print(json.dumps(build_error_response(e), indent=2, default=str), file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
