import sys
from typing import List, Optional

import click

from freestm import __version__
from freestm.commands import bounds, experiments
from freestm.exceptions import ConfigError, NumericalError
from freestm.utils.logging import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


@click.group()
@click.version_option(__version__, prog_name="freestm")
def cli():
    """Free stochastic theta method: simulate matrix-valued free SDEs and run the convergence and stability experiments."""


# Mount commands
for command in experiments.COMMANDS:
    cli.add_command(command)
cli.add_command(bounds.bounds)


def run(argv: Optional[List[str]] = None) -> int:
    """Run one command and map failures to exit codes (1 config, 2 numerical, 3 I/O)."""
    try:
        result = cli.main(args=argv, prog_name="freestm", standalone_mode=False)
    except ConfigError as exc:
        logger.error(f"Config error: {exc}")
        return EXIT_CONFIG
    except NumericalError as exc:
        logger.error(f"Numerical failure: {exc}")
        return EXIT_NUMERICAL
    except OSError as exc:
        logger.error(f"I/O error: {exc}")
        return EXIT_IO
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except click.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_CONFIG
    return result if isinstance(result, int) else EXIT_OK


def main() -> None:
    sys.exit(run())
