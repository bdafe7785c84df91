"""
Domain records: analytic model inputs/outputs, scenarios and results
"""
from models.analytic import (
    DelayStats,
    FixedPointSolution,
    HiddenTerminalParams,
    HiddenTerminalSolution,
    ModelParams,
)
from models.results import (
    AggregateResult,
    ComparisonReport,
    Estimate,
    GapRow,
    LocationEstimate,
    SimMetrics,
    Tolerance,
    ToleranceProfile,
)
from models.scenario import (
    GridShape,
    SelectionPolicy,
    SimConfig,
    SweepSpec,
    Topology,
    TopologyKind,
    TopologySpec,
)
