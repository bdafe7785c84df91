"""
simulate: run the replications of one scenario
"""
import logging

import click

from commands import jobs_option, parse_overrides, set_option
from models.scenario import SimConfig, SweepSpec
from utils.config import load_config
from utils.errors import ConfigError, OutputError
from utils.reporting import emit_csv
from utils.runner import run_sweep
from utils.simcore import run_replication

logger = logging.getLogger(__name__)


@click.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
              help="Scenario TOML file.")
@set_option
@click.option("--out", default="-", show_default=True, help="Result CSV path, '-' for stdout.")
@click.option("--location-out", default=None, help="Per-location PER CSV (linear_road).")
@click.option("--trace", "trace_path", default=None, type=click.Path(dir_okay=False),
              help="Write the event trace of replication 0 to this file.")
@jobs_option
def simulate(config_path, assignments, out, location_out, trace_path, jobs):
    """Simulate one scenario and print its aggregated metrics."""
    config = load_config(config_path, parse_overrides(assignments))
    if not isinstance(config, SimConfig):
        raise ConfigError(f"'{config_path}' is a sweep; use the sweep command")

    if trace_path:
        try:
            with open(trace_path, "w", encoding="utf-8") as trace:
                run_replication(config, 0, trace=trace)
        except OSError as exc:
            raise OutputError(trace_path, exc.strerror or str(exc)) from exc
        logger.info("Event trace written to %s", trace_path)

    results = run_sweep(SweepSpec(base=config), jobs=jobs)
    emit_csv(results, out, location_out)
