"""
Command-line entry point for the C-V2X semi-persistent scheduling model and simulator
"""
import logging
import sys

import click

from utils.errors import SpsError

logger = logging.getLogger(__name__)


class SpsUsageError(click.ClickException):
    """Configuration, model or output error reported to the user (exit status 2)"""
    exit_code = 2


class SpsGroup(click.Group):
    """Group that turns library errors into a one-line message and a nonzero exit"""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except SpsError as exc:
            logger.debug("Command failed", exc_info=True)
            raise SpsUsageError(str(exc)) from exc


@click.group(cls=SpsGroup)
@click.option("--log-level", default="WARNING", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              help="Verbosity of the diagnostics written to stderr.")
def cli(log_level):
    """Semi-persistent scheduling: analytic model, Monte Carlo simulator and sweep harness."""
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


# Register subcommands
from commands.analyze import analyze
from commands.simulate import simulate
from commands.sweep import compare, sweep

cli.add_command(analyze)
cli.add_command(simulate)
cli.add_command(sweep)
cli.add_command(compare)

if __name__ == '__main__':
    cli()
