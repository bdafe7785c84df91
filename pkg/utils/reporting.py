"""
CSV artifacts and the analytic-vs-simulation gap report
"""
import logging
import math
import sys
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from models.results import ComparisonReport, GapRow, ToleranceProfile
from utils.errors import OutputError

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "sim_collision_mean", "sim_collision_ci",
    "sim_per_mean", "sim_per_ci",
    "sim_delay_ms_mean", "sim_delay_ms_ci",
    "ana_pc", "ana_per", "ana_delay_ms", "ana_valid", "ana_error",
]
LOCATION_COLUMNS = ["point_id", "bin_center_m", "per_mean", "per_ci", "ana_per"]
REPORT_COLUMNS = ["metric", "sim", "analytic", "abs_gap", "rel_gap", "threshold", "status"]


def format_value(value):
    """Shortest round-trip text for numbers; empty for missing values"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def parameter_names(results):
    return [name for name, _ in results[0].point] if results else []


def write_table(columns, rows, destination):
    """Write rows of already formatted cells to a path or an open stream ('-' is stdout)"""
    frame = pd.DataFrame([[format_value(cell) for cell in row] for row in rows],
                         columns=columns, dtype=object)
    if destination is None or destination == "-":
        destination = sys.stdout
    if hasattr(destination, "write"):
        frame.to_csv(destination, index=False, lineterminator="\n")
        return
    path = Path(destination)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    logger.info("Wrote %d row(s) to %s", len(rows), path)


def emit_csv(results, destination, location_destination=None):
    """
    Wide CSV with one row per sweep point, plus an optional long-format
    per-location CSV (one row per point and road bin)
    """
    if not results:
        raise ValueError("emit_csv needs at least one result")
    names = parameter_names(results)
    rows = []
    for result in results:
        rows.append([value for _, value in result.point] + [
            result.collision.mean, result.collision.ci,
            result.per.mean, result.per.ci,
            result.delay_ms.mean, result.delay_ms.ci,
            result.ana_pc, result.ana_per, result.ana_delay_ms, result.ana_valid, result.ana_error,
        ])
    write_table(names + RESULT_COLUMNS, rows, destination)

    if location_destination is not None:
        location_rows = [
            [point_id, loc.bin_center_m, loc.per.mean, loc.per.ci, loc.analytic_per]
            for point_id, result in enumerate(results)
            for loc in result.per_by_location
        ]
        write_table(LOCATION_COLUMNS, location_rows, location_destination)


def _gap(point_id, point, metric, sim, analytic, tolerance):
    abs_gap = abs(sim - analytic)
    if analytic:
        rel_gap = abs_gap / abs(analytic)
    else:
        rel_gap = 0.0 if abs_gap == 0 else math.inf
    threshold = tolerance.threshold(analytic)
    status = "pass" if abs_gap <= threshold else "fail"
    return GapRow(point_id, point, metric, sim, analytic, abs_gap, rel_gap, threshold, status)


def compare(results, tolerances=None):
    """Per-point, per-metric gaps between simulation and analytic model"""
    tolerances = tolerances or ToleranceProfile()
    report = ComparisonReport()
    for point_id, result in enumerate(results):
        metrics = [
            ("collision", result.collision.mean, result.ana_pc, tolerances.collision),
            ("per", result.per.mean, result.ana_per, tolerances.per),
            ("delay_ms", result.delay_ms.mean, result.ana_delay_ms, tolerances.delay_ms),
        ]
        for metric, sim, analytic_value, tolerance in metrics:
            if not result.ana_valid or analytic_value is None:
                report.rows.append(GapRow(point_id, result.point, metric, sim, analytic_value,
                                          None, None, None, "skipped"))
                continue
            row = _gap(point_id, result.point, metric, sim, analytic_value, tolerance)
            if row.status == "fail":
                logger.warning("Point %d %s: sim %r vs analytic %r exceeds %r",
                               point_id, metric, sim, analytic_value, row.threshold)
            report.rows.append(row)
    return report


def emit_report(report: ComparisonReport, destination):
    names = [name for name, _ in report.rows[0].point] if report.rows else []
    rows = [
        [row.point_id] + [value for _, value in row.point]
        + [row.metric, row.sim, row.analytic, row.abs_gap, row.rel_gap, row.threshold, row.status]
        for row in report.rows
    ]
    write_table(["point_id"] + names + REPORT_COLUMNS, rows, destination)


def summarize(report: ComparisonReport):
    """Human-readable worst-gap summary, one line per metric"""
    lines = []
    for metric in ("collision", "per", "delay_ms"):
        worst = report.worst(metric)
        if worst is None:
            lines.append(f"{metric}: no comparable points")
            continue
        lines.append(
            f"{metric}: worst gap {worst.abs_gap:.6g} (threshold {worst.threshold:.6g}) "
            f"at point {worst.point_id} -> {worst.status}"
        )
    failed = len(report.failures)
    lines.append("PASS" if report.passed else f"FAIL ({failed} comparison(s) out of tolerance)")
    return "\n".join(lines)
