import argparse
import logging
from typing import List, Optional

from config.constants import (
    EXIT_FAILURE, EXIT_USAGE, EXIT_CONFIG, EXIT_MISSING_FILE,
    EXIT_DIMENSION_CONFLICT, EXIT_DATASET_FORMAT, EXIT_NUMERICAL
)
from core.errors import (
    ConfigError, DatasetFormatError, DimensionError, IllConditionedError, NomaError
)
from .commands import COMMANDS

logger = logging.getLogger(__name__)


class CliLayout:
    """
    Command line layout

    Builds the parser with one subcommand per entry of COMMANDS, sets up
    logging and turns failures into process exit codes.
    """

    DESCRIPTION = "Hybrid neural-network multi-user detection for NOMA uplinks"

    # First matching class wins
    EXIT_CODES = [
        (FileNotFoundError, EXIT_MISSING_FILE),
        (ConfigError, EXIT_CONFIG),
        (DimensionError, EXIT_DIMENSION_CONFLICT),
        (DatasetFormatError, EXIT_DATASET_FORMAT),
        (IllConditionedError, EXIT_NUMERICAL),
    ]

    def __init__(self) -> None:
        self.parser = self._build_parser()

    def _build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog="noma-detect", description=self.DESCRIPTION)
        verbosity = parser.add_mutually_exclusive_group()
        verbosity.add_argument("-v", "--verbose", action="store_true", help="Log per-epoch and per-trial details")
        verbosity.add_argument("-q", "--quiet", action="store_true", help="Only log warnings and errors")
        subparsers = parser.add_subparsers(dest="subcommand", metavar="COMMAND")
        subparsers.required = True
        for command in COMMANDS:
            command.register(subparsers)
        return parser

    @staticmethod
    def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
        level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
        logging.basicConfig(
            level=level,
            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            force=True,
        )

    @classmethod
    def exit_code_for(cls, error: BaseException) -> int:
        for error_type, code in cls.EXIT_CODES:
            if isinstance(error, error_type):
                return code
        return EXIT_FAILURE

    def run(self, argv: Optional[List[str]] = None) -> int:
        """
        Parse arguments and run the selected command

        Returns:
            int: Process exit code
        """
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as e:
            return EXIT_USAGE if e.code not in (0, None) else 0

        self.configure_logging(args.verbose, args.quiet)
        try:
            return args.command(args)
        except (NomaError, OSError, ValueError) as e:
            code = self.exit_code_for(e)
            logger.error("%s failed: %s", args.subcommand, e)
            return code
        except Exception:
            logger.exception("%s failed with an unexpected error", args.subcommand)
            return EXIT_FAILURE
