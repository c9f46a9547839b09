"""
Main entry point for twistloop CLI application.
"""

import logging
import sys
from typing import List, Optional

import click
import numpy as np

from .cli import cli
from .errors import GridPointFailure, LogBranchFailure, RejectionError, TwistLoopError
from .utils import format_cell_report

logger = logging.getLogger(__name__)


def describe_rejection(error: RejectionError) -> str:
    """The diagnostic payload of a rejection, formatted for the console."""
    report = getattr(error, "report", None)
    if report is not None:
        return format_cell_report(report)
    if isinstance(error, LogBranchFailure):
        values = ", ".join(f"{z:.6g}" for z in np.asarray(error.spectrum))
        return f"Spectrum of c: {values}"
    return ""


def run(argv: Optional[List[str]] = None) -> int:
    """Run the command line and return its exit code.

    0 on success, 2 on a mathematically meaningful rejection (with its
    diagnostics printed), 1 on every other failure.
    """
    try:
        result = cli.main(args=argv, prog_name="twistloop", standalone_mode=False)
        return result if isinstance(result, int) else 0

    except (KeyboardInterrupt, click.Abort):
        print("\nOperation cancelled by user.")
        return 1

    except click.ClickException as e:
        e.show()
        return 1

    except GridPointFailure as e:
        logger.error(f"Error at grid point {e.point}: {e}")
        print(f"Error: {e}")
        if isinstance(e.cause, RejectionError):
            print(describe_rejection(e.cause))
            return 2
        return 1

    except RejectionError as e:
        logger.error(f"Rejected: {e}")
        print(f"Error: {e}")
        print(describe_rejection(e))
        return 2

    except (TwistLoopError, OSError) as e:
        logger.error(f"Error: {e}")
        print(f"Error: {e}")
        return 1


def main():
    """Main entry point for the application."""
    sys.exit(run())


if __name__ == "__main__":
    main()
