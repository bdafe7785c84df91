"""
Simulation, aggregation and comparison records
"""
from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class SimMetrics:
    """Measured outcome of one replication (warm-up excluded)"""
    tx_collision_ratio: float
    per: float
    per_by_location: tuple
    mean_delay_ms: float
    delay_samples_count: int
    transmissions_total: int
    collisions_total: int
    receptions_total: int = 0
    failures_total: int = 0


@dataclass(frozen=True)
class Estimate:
    """Mean over replications with a 95% normal-approximation half-width"""
    mean: float
    ci: float


@dataclass(frozen=True)
class LocationEstimate:
    bin_center_m: float
    per: Estimate
    analytic_per: Optional[float] = None


@dataclass
class AggregateResult:
    point: tuple
    replications: int
    collision: Estimate
    per: Estimate
    delay_ms: Estimate
    per_by_location: tuple = ()
    ana_pc: Optional[float] = None
    ana_per: Optional[float] = None
    ana_delay_ms: Optional[float] = None
    ana_valid: bool = False
    ana_error: Optional[str] = None

    def __repr__(self):
        status = "valid" if self.ana_valid else "invalid"
        return f"<AggregateResult {dict(self.point)} - analytic {status}>"


@dataclass(frozen=True)
class Tolerance:
    """Pass if |sim - analytic| <= max(absolute, relative * analytic)"""
    absolute: float
    relative: float

    def threshold(self, analytic):
        return max(self.absolute, self.relative * abs(analytic))


@dataclass(frozen=True)
class ToleranceProfile:
    collision: Tolerance = Tolerance(0.005, 0.15)
    per: Tolerance = Tolerance(0.01, 0.20)
    delay_ms: Tolerance = Tolerance(3.0, 0.10)


@dataclass(frozen=True)
class GapRow:
    point_id: int
    point: tuple
    metric: str
    sim: Optional[float]
    analytic: Optional[float]
    abs_gap: Optional[float]
    rel_gap: Optional[float]
    threshold: Optional[float]
    status: str


@dataclass
class ComparisonReport:
    rows: list = field(default_factory=list)

    @property
    def failures(self):
        return [row for row in self.rows if row.status == "fail"]

    @property
    def passed(self):
        return not self.failures

    def worst(self, metric=None):
        """Compared row with the largest gap relative to its threshold"""
        candidates = [
            row for row in self.rows
            if row.status != "skipped" and (metric is None or row.metric == metric)
        ]
        if not candidates:
            return None
        return max(candidates, key=lambda row: row.abs_gap / row.threshold if row.threshold else row.abs_gap)
