"""
sweep and compare: run a parameter sweep, optionally gated against the analytic model
"""
import click

from commands import jobs_option, parse_overrides, set_option
from utils.config import load_sweep, tolerance_with
from utils.reporting import compare as compare_results
from utils.reporting import emit_csv, emit_report, summarize
from utils.runner import run_sweep


@click.command("sweep")
@click.argument("spec_path", type=click.Path(exists=True, dir_okay=False))
@set_option
@click.option("--out", default="-", show_default=True, help="Result CSV path, '-' for stdout.")
@click.option("--location-out", default=None, help="Per-location PER CSV (linear_road).")
@jobs_option
def sweep(spec_path, assignments, out, location_out, jobs):
    """Run every point of a sweep file and write one CSV row per point."""
    spec = load_sweep(spec_path, parse_overrides(assignments))
    emit_csv(run_sweep(spec, jobs=jobs), out, location_out)


@click.command("compare")
@click.argument("spec_path", type=click.Path(exists=True, dir_okay=False))
@set_option
@click.option("--tolerance-rel", type=click.FloatRange(min=0.0), default=None,
              help="Relative tolerance for collision probability and PER.")
@click.option("--tolerance-abs", type=click.FloatRange(min=0.0), default=None,
              help="Absolute tolerance floor for collision probability and PER.")
@click.option("--out", default="-", show_default=True, help="Gap report CSV path, '-' for stdout.")
@click.option("--results-out", default=None, help="Also write the sweep result CSV here.")
@jobs_option
@click.pass_context
def compare(ctx, spec_path, assignments, tolerance_rel, tolerance_abs, out, results_out, jobs):
    """Run a sweep and report simulation-vs-analytic gaps; exit 1 if any point fails."""
    spec = load_sweep(spec_path, parse_overrides(assignments))
    results = run_sweep(spec, jobs=jobs)
    if results_out:
        emit_csv(results, results_out)
    tolerances = tolerance_with(spec.tolerances, absolute=tolerance_abs, relative=tolerance_rel)
    report = compare_results(results, tolerances)
    emit_report(report, out)
    click.echo(summarize(report), err=True)
    if not report.passed:
        ctx.exit(1)
