"""
Command-line subcommands, one module per command
"""
import click

from utils.config import parse_override


def parse_overrides(assignments):
    """--set key=value pairs to a dict"""
    return dict(parse_override(assignment) for assignment in assignments)


set_option = click.option(
    "--set", "assignments", multiple=True, metavar="KEY=VALUE",
    help="Override one configuration key (repeatable).",
)
jobs_option = click.option(
    "--jobs", type=click.IntRange(min=1), default=None,
    help="Worker processes for replications (default: physical cores). Does not change output.",
)
