"""
Inputs and outputs of the analytical model
"""
from dataclasses import dataclass
from typing import Optional

from utils.errors import ModelValidityError


@dataclass(frozen=True)
class ModelParams:
    """Fully connected model inputs: N_v, N_r, T_s, p and T_tr"""
    n_vehicles: int
    n_blocks: int = 200
    sps_periods: int = 10
    resel_prob: float = 0.2
    period_ms: float = 100.0

    def __post_init__(self):
        problems = []
        if self.n_vehicles < 1:
            problems.append(f"n_vehicles must be >= 1, got {self.n_vehicles}")
        if self.n_blocks < 1:
            problems.append(f"n_blocks must be >= 1, got {self.n_blocks}")
        if self.sps_periods < 1:
            problems.append(f"sps_periods must be >= 1, got {self.sps_periods}")
        if not 0.0 <= self.resel_prob <= 1.0:
            problems.append(f"resel_prob must lie in [0, 1], got {self.resel_prob}")
        if not self.period_ms > 0:
            problems.append(f"period_ms must be > 0, got {self.period_ms}")
        if problems:
            raise ModelValidityError("; ".join(problems))
        # otherwise the expected idle count can drop below one
        if self.n_vehicles >= self.n_blocks:
            raise ModelValidityError(
                f"model requires n_vehicles < n_blocks, got {self.n_vehicles} >= {self.n_blocks}"
            )

    @property
    def per_period_resel(self):
        """p / T_s, the per-period reselection rate"""
        return self.resel_prob / self.sps_periods


@dataclass(frozen=True)
class FixedPointSolution:
    p_c: float
    n_idle: float
    iterations: int
    residual: float
    method: str = "picard"


@dataclass(frozen=True)
class DelayStats:
    e_d_ini_ms: float
    e_d_col_ms: float
    e_d_total_ms: float
    p_c_com: float


@dataclass(frozen=True)
class HiddenTerminalParams:
    """Vehicle density (per km), range R and road length L (None for an unbounded road)"""
    density_per_km: float
    range_m: float = 500.0
    road_length_m: Optional[float] = None

    def __post_init__(self):
        if self.density_per_km < 0:
            raise ModelValidityError(f"density_per_km must be >= 0, got {self.density_per_km}")
        if not self.range_m > 0:
            raise ModelValidityError(f"range_m must be > 0, got {self.range_m}")
        if self.road_length_m is not None and not self.road_length_m > 0:
            raise ModelValidityError(f"road_length_m must be > 0, got {self.road_length_m}")

    @property
    def density_per_m(self):
        return self.density_per_km / 1000.0

    @property
    def vehicles_within_range(self):
        """beta * R: vehicles on one side of the tagged vehicle within R"""
        return self.density_per_m * self.range_m

    @property
    def n_in_range(self):
        """N_tr = 2 beta R"""
        return 2.0 * self.vehicles_within_range

    @property
    def n_hidden(self):
        """N_ht = 2 beta R, vehicles in [-2R, -R] and [R, 2R]"""
        return 2.0 * self.vehicles_within_range


@dataclass(frozen=True)
class HiddenTerminalSolution:
    p_single: float
    p_c_ht: float
    per: float
    p_del: float
    e_d_total_ms: float
    p_c: float
