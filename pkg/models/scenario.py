"""
Scenario description for the simulator and the sweep harness
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from models.results import ToleranceProfile


class TopologyKind(str, Enum):
    FULLY_CONNECTED = "fully_connected"
    LINEAR_ROAD = "linear_road"


class SelectionPolicy(str, Enum):
    UNIFORM_NEXT_PERIOD = "uniform_next_period"
    CLOSEST_IDLE = "closest_idle"


@dataclass(frozen=True)
class GridShape:
    """Virtual resource-block grid of one transmission period"""
    n_blocks: int = 200
    blocks_per_subframe: int = 2
    period_ms: float = 100.0

    def problems(self):
        issues = []
        if self.n_blocks < 1:
            issues.append(f"grid.n_blocks must be >= 1, got {self.n_blocks}")
        if self.blocks_per_subframe < 1:
            issues.append(f"grid.blocks_per_subframe must be >= 1, got {self.blocks_per_subframe}")
        elif self.n_blocks % self.blocks_per_subframe:
            issues.append(
                f"grid.blocks_per_subframe ({self.blocks_per_subframe}) must divide "
                f"grid.n_blocks ({self.n_blocks})"
            )
        if not self.period_ms > 0:
            issues.append(f"grid.period_ms must be > 0, got {self.period_ms}")
        return issues

    @property
    def n_subframes(self):
        return self.n_blocks // self.blocks_per_subframe

    @property
    def subframe_ms(self):
        return self.period_ms / self.n_subframes

    def subframe_of(self, block):
        return block // self.blocks_per_subframe

    def block_offset_ms(self, block):
        """Time offset of a block from the start of its period"""
        return (block // self.blocks_per_subframe) * self.subframe_ms

    def block_offsets(self):
        """Offsets of every block, nondecreasing in block index"""
        return (np.arange(self.n_blocks) // self.blocks_per_subframe) * self.subframe_ms


@dataclass(frozen=True)
class TopologySpec:
    """How the topology of a replication is drawn"""
    kind: TopologyKind = TopologyKind.FULLY_CONNECTED
    n_vehicles: Optional[int] = None
    density_per_km: Optional[float] = None
    road_length_m: float = 3000.0
    range_m: float = 500.0
    edge_margin_m: float = 0.0

    def vehicle_count(self):
        if self.kind is TopologyKind.LINEAR_ROAD and self.density_per_km is not None:
            return int(round(self.density_per_km * self.road_length_m / 1000.0))
        return self.n_vehicles or 0

    def effective_density_per_km(self):
        """Density used by the hidden-terminal formulas"""
        if self.density_per_km is not None:
            return float(self.density_per_km)
        return (self.n_vehicles or 0) * 1000.0 / self.road_length_m

    def problems(self):
        issues = []
        if self.kind is TopologyKind.FULLY_CONNECTED:
            if self.n_vehicles is None:
                issues.append("topology.n_vehicles is required for fully_connected")
            elif self.n_vehicles < 1:
                issues.append(f"topology.n_vehicles must be >= 1, got {self.n_vehicles}")
            if self.density_per_km is not None:
                issues.append("topology.density_per_km only applies to linear_road")
        else:
            if self.n_vehicles is None and self.density_per_km is None:
                issues.append("linear_road needs topology.n_vehicles or topology.density_per_km")
            elif self.n_vehicles is not None and self.density_per_km is not None:
                issues.append("linear_road takes topology.n_vehicles or topology.density_per_km, not both")
            if self.density_per_km is not None and self.density_per_km < 0:
                issues.append(f"topology.density_per_km must be >= 0, got {self.density_per_km}")
            if not self.road_length_m > 0:
                issues.append(f"topology.road_length_m must be > 0, got {self.road_length_m}")
            if not self.range_m > 0:
                issues.append(f"topology.range_m must be > 0, got {self.range_m}")
            if self.edge_margin_m < 0 or 2 * self.edge_margin_m >= self.road_length_m:
                issues.append(
                    f"topology.edge_margin_m must lie in [0, road_length_m / 2), got {self.edge_margin_m}"
                )
            elif self.vehicle_count() < 1:
                issues.append("linear_road topology has zero vehicles")
        return issues


@dataclass(frozen=True)
class Topology:
    """Static vehicle placement and the hears(u, v) relation"""
    kind: TopologyKind
    n_vehicles: int
    positions_m: tuple = ()
    range_m: float = 500.0
    road_length_m: Optional[float] = None

    def hears(self, u, v):
        if u == v:
            return False
        if self.kind is TopologyKind.FULLY_CONNECTED:
            return True
        return abs(self.positions_m[u] - self.positions_m[v]) <= self.range_m

    def hearing_matrix(self):
        """Boolean N x N matrix, symmetric, False on the diagonal"""
        n = self.n_vehicles
        if self.kind is TopologyKind.FULLY_CONNECTED:
            matrix = np.ones((n, n), dtype=bool)
        else:
            pos = np.asarray(self.positions_m, dtype=float)
            matrix = np.abs(pos[:, None] - pos[None, :]) <= self.range_m
        np.fill_diagonal(matrix, False)
        return matrix


@dataclass(frozen=True)
class SimConfig:
    grid: GridShape = field(default_factory=GridShape)
    topology: TopologySpec = field(default_factory=TopologySpec)
    sps_periods: int = 10
    resel_prob: float = 0.2
    policy: SelectionPolicy = SelectionPolicy.UNIFORM_NEXT_PERIOD
    duration_s: float = 2000.0
    warmup_s: Optional[float] = None
    master_seed: int = 1
    replications: int = 10
    location_bins: int = 30
    half_duplex: bool = False

    @property
    def effective_warmup_s(self):
        """Explicit warm-up, or three semi-persistent periods with a 10 s floor"""
        if self.warmup_s is not None:
            return self.warmup_s
        return max(10.0, 3.0 * self.sps_periods * self.grid.period_ms / 1000.0)

    @property
    def total_periods(self):
        return int(round(self.duration_s * 1000.0 / self.grid.period_ms))

    @property
    def warmup_periods(self):
        """Warm-up in periods, rounded up to whole semi-persistent periods"""
        periods = math.ceil(self.effective_warmup_s * 1000.0 / self.grid.period_ms - 1e-9)
        return math.ceil(periods / self.sps_periods) * self.sps_periods

    def problems(self):
        issues = self.grid.problems() + self.topology.problems()
        if self.sps_periods < 1:
            issues.append(f"protocol.sps_periods must be >= 1, got {self.sps_periods}")
        if not 0.0 <= self.resel_prob <= 1.0:
            issues.append(f"protocol.resel_prob must lie in [0, 1], got {self.resel_prob}")
        if not self.duration_s > 0:
            issues.append(f"run.duration_s must be > 0, got {self.duration_s}")
        if self.warmup_s is not None and self.warmup_s < 0:
            issues.append(f"run.warmup_s must be >= 0, got {self.warmup_s}")
        elif self.duration_s > 0 and not self.effective_warmup_s < self.duration_s:
            issues.append(
                f"run.warmup_s ({self.effective_warmup_s}) must be smaller than "
                f"run.duration_s ({self.duration_s})"
            )
        elif self.grid.period_ms > 0 and self.sps_periods >= 1 and self.warmup_periods >= self.total_periods:
            issues.append("warm-up, rounded up to whole semi-persistent periods, leaves nothing to measure")
        if self.replications < 1:
            issues.append(f"run.replications must be >= 1, got {self.replications}")
        if not 0 <= self.master_seed < 2**64:
            issues.append(f"run.master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.location_bins < 1:
            issues.append(f"run.location_bins must be >= 1, got {self.location_bins}")
        return issues


@dataclass(frozen=True)
class SweepSpec:
    """Base scenario plus the axes of a cartesian sweep

    Each axis is (names, values): names is a tuple of config keys and every
    value is a tuple with one entry per name.
    """
    base: SimConfig
    axes: tuple = ()
    max_points: int = 10_000
    tolerances: ToleranceProfile = field(default_factory=ToleranceProfile)

    @property
    def parameter_names(self):
        return tuple(name for names, _ in self.axes for name in names)

    @property
    def n_points(self):
        return math.prod(len(values) for _, values in self.axes)
