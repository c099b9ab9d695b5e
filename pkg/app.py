"""
NOMA Detect - Command Line Entry Point

Simulates uplink NOMA transmissions and detects the superimposed user
symbols with a least-squares detector, a hybrid neural network built on
top of it, and a fused inference kernel for the trained network.
"""
import sys
from typing import List, Optional

from cli.layouts import CliLayout


def run_cli(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand and return its process exit code

    Build the command line layout and run the selected subcommand
    """
    return CliLayout().run(argv)


def main(argv: Optional[List[str]] = None) -> int:
    """Application main entry function"""
    return run_cli(argv)


if __name__ == "__main__":
    sys.exit(main())
