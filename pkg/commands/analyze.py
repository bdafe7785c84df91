"""
analyze: evaluate the analytic model for one parameter set
"""
import logging

import click

from models.analytic import HiddenTerminalParams, ModelParams
from utils import analytic
from utils.errors import SpsError
from utils.reporting import write_table

COLUMNS = [
    "n_vehicles", "n_blocks", "sps_periods", "resel_prob", "period_ms",
    "density_per_km", "range_m", "fc_pc", "n_idle", "iterations", "residual",
    "p_single", "ana_pc", "ana_per", "ana_delay_ms", "ana_valid", "ana_error",
]

logger = logging.getLogger(__name__)


@click.command("analyze")
@click.option("--n-vehicles", type=click.IntRange(min=1), default=None,
              help="N_v; derived as round(2*beta*R)+1 in hidden-terminal mode when omitted.")
@click.option("--n-blocks", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--sps-periods", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--resel-prob", type=click.FloatRange(0.0, 1.0), default=0.2, show_default=True)
@click.option("--period-ms", type=click.FloatRange(min=0.0, min_open=True), default=100.0, show_default=True)
@click.option("--density-per-km", type=click.FloatRange(min=0.0), default=None,
              help="Vehicle density; enables the hidden-terminal model.")
@click.option("--range-m", type=click.FloatRange(min=0.0, min_open=True), default=500.0, show_default=True)
@click.option("--out", default="-", show_default=True, help="Output CSV path, '-' for stdout.")
def analyze(n_vehicles, n_blocks, sps_periods, resel_prob, period_ms, density_per_km, range_m, out):
    """Print the analytic collision probability, PER and delay as one CSV row."""
    hidden = density_per_km is not None
    ht = HiddenTerminalParams(density_per_km, range_m) if hidden else None
    if n_vehicles is None:
        if not hidden:
            raise click.UsageError("--n-vehicles is required without --density-per-km")
        n_vehicles = int(round(ht.n_in_range)) + 1

    row = {
        "n_vehicles": n_vehicles, "n_blocks": n_blocks, "sps_periods": sps_periods,
        "resel_prob": resel_prob, "period_ms": period_ms,
        "density_per_km": density_per_km, "range_m": range_m if hidden else None,
    }
    try:
        params = ModelParams(n_vehicles, n_blocks, sps_periods, resel_prob, period_ms)
        solution = analytic.solve_fixed_point(params)
        row.update(fc_pc=solution.p_c, n_idle=solution.n_idle,
                   iterations=solution.iterations, residual=solution.residual)
        if hidden:
            result = analytic.solve_hidden_terminal(params, ht)
            row.update(p_single=result.p_single, ana_pc=result.p_c_ht, ana_per=result.per,
                       ana_delay_ms=result.e_d_total_ms)
        else:
            row.update(ana_pc=solution.p_c, ana_per=solution.p_c,
                       ana_delay_ms=analytic.expected_delay(params, solution.p_c).e_d_total_ms)
        row["ana_valid"] = True
    except SpsError as exc:
        logger.warning("Analytic model invalid: %s", exc)
        row.update(ana_pc=None, ana_per=None, ana_delay_ms=None, ana_valid=False, ana_error=str(exc))
    write_table(COLUMNS, [[row.get(column) for column in COLUMNS]], out)
