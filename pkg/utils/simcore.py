"""
Monte Carlo simulator of semi-persistent resource scheduling

Vehicles broadcast one message per transmission period on a virtual resource
block and keep that block for T_s periods. At every synchronized boundary each
vehicle reselects with probability p, choosing among the blocks it sensed idle
over the period that just ended.

Topology is static and blocks only change at boundaries, so every period of a
semi-persistent period has the same outcome. The replication loop therefore
steps one semi-persistent period at a time and weights its counts by the number
of periods it covers; the event trace still lists every period.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.results import SimMetrics
from models.scenario import (
    GridShape,
    SelectionPolicy,
    SimConfig,
    Topology,
    TopologyKind,
    TopologySpec,
)
from utils.errors import ConfigError, ConfigValidationError
from utils.seeding import replication_rng

logger = logging.getLogger(__name__)


def build_topology(spec: TopologySpec, rng):
    """Place the vehicles of one replication"""
    n_vehicles = spec.vehicle_count()
    if n_vehicles < 1:
        raise ConfigError("topology has zero vehicles")
    if spec.kind is TopologyKind.FULLY_CONNECTED:
        return Topology(kind=spec.kind, n_vehicles=n_vehicles)
    positions = rng.uniform(0.0, spec.road_length_m, size=n_vehicles)
    return Topology(
        kind=spec.kind,
        n_vehicles=n_vehicles,
        positions_m=tuple(positions.tolist()),
        range_m=spec.range_m,
        road_length_m=spec.road_length_m,
    )


@dataclass(frozen=True, eq=False)
class LinkTable:
    """Every in-range ordered pair (tx, rx), sorted by transmitter then receiver"""
    tx: np.ndarray
    rx: np.ndarray
    n_vehicles: int

    @classmethod
    def from_topology(cls, topology: Topology):
        tx, rx = np.nonzero(topology.hearing_matrix())
        return cls(tx=tx.astype(np.int64), rx=rx.astype(np.int64), n_vehicles=topology.n_vehicles)

    def __len__(self):
        return len(self.tx)


@dataclass(frozen=True)
class VehicleState:
    id: int
    current_block: Optional[int]
    pending_reselect: bool
    sensed_busy: np.ndarray
    phase_ms: float = 0.0


class Fleet:
    """State of all vehicles, stored column-wise"""

    def __init__(self, grid: GridShape, current_block, phase_ms=None):
        self.grid = grid
        self.current_block = np.asarray(current_block, dtype=np.int64).copy()
        n_vehicles = len(self.current_block)
        self.phase_ms = (np.zeros(n_vehicles) if phase_ms is None
                         else np.asarray(phase_ms, dtype=float).copy())
        self.pending_reselect = np.zeros(n_vehicles, dtype=bool)
        self.sensed_busy = np.zeros((n_vehicles, grid.n_blocks), dtype=bool)

    @classmethod
    def initialize(cls, n_vehicles, grid: GridShape, policy: SelectionPolicy, rng):
        """Uniform initial blocks; closest_idle also draws a fixed generation phase"""
        blocks = rng.integers(0, grid.n_blocks, size=n_vehicles)
        phase = None
        if policy is SelectionPolicy.CLOSEST_IDLE:
            phase = rng.uniform(0.0, grid.period_ms, size=n_vehicles)
        return cls(grid, blocks, phase)

    def __len__(self):
        return len(self.current_block)

    def vehicle(self, vehicle_id):
        block = int(self.current_block[vehicle_id])
        return VehicleState(
            id=vehicle_id,
            current_block=block if block >= 0 else None,
            pending_reselect=bool(self.pending_reselect[vehicle_id]),
            sensed_busy=self.sensed_busy[vehicle_id].copy(),
            phase_ms=float(self.phase_ms[vehicle_id]),
        )

    def idle_masks(self, vehicle_ids):
        """Idle-block masks of the given vehicles; a held block is never idle"""
        masks = ~self.sensed_busy[vehicle_ids]
        held = self.current_block[vehicle_ids]
        rows = np.flatnonzero(held >= 0)
        masks[rows, held[rows]] = False
        return masks

    def wraps(self):
        """True where the block lies before the generation phase, so it serves the previous message"""
        return self.grid.block_offsets()[self.current_block] < self.phase_ms

    def wait_ms(self):
        """Time from message generation to its transmission slot"""
        wait = self.grid.block_offsets()[self.current_block] - self.phase_ms
        return np.where(wait < 0, wait + self.grid.period_ms, wait)


def _as_mask(idle, n_blocks):
    if isinstance(idle, np.ndarray) and idle.dtype == bool:
        return idle
    mask = np.zeros(n_blocks, dtype=bool)
    mask[np.fromiter(idle, dtype=np.int64)] = True
    return mask


def sense_idle(vehicle: VehicleState, grid: GridShape):
    """Blocks the vehicle saw idle over the last period, own block excluded"""
    block = -1 if vehicle.current_block is None else vehicle.current_block
    fleet = Fleet(grid, [block])
    fleet.sensed_busy = np.asarray(vehicle.sensed_busy, dtype=bool)[None, :]
    return frozenset(np.flatnonzero(fleet.idle_masks([0])[0]).tolist())


def pick_uniform(masks, rng):
    """Uniform draw per row among its idle blocks; rows with none draw over all blocks"""
    keys = rng.random(masks.shape)
    choice = np.where(masks, keys, -1.0).argmax(axis=1)
    empty = ~masks.any(axis=1)
    if empty.any():
        logger.warning("%d vehicle(s) sensed no idle block, selecting over all blocks", empty.sum())
        choice[empty] = keys[empty].argmax(axis=1)
    return choice


def pick_closest(masks, arrivals_ms, grid: GridShape, rng):
    """Earliest idle block at or after each arrival, wrapping into the next period"""
    arrivals_ms = np.asarray(arrivals_ms, dtype=float)
    if np.any((arrivals_ms < 0) | (arrivals_ms >= grid.period_ms)):
        raise ValueError(f"arrival offsets must lie in [0, {grid.period_ms})")
    wait = grid.block_offsets()[None, :] - arrivals_ms[:, None]
    wait = np.where(wait < 0, wait + grid.period_ms, wait)
    keys = rng.random(masks.shape)
    best = np.where(masks, wait, np.inf).min(axis=1, keepdims=True)
    # same wait means same subframe; break the tie at random
    ties = masks & (wait == best)
    choice = np.where(ties, keys, -1.0).argmax(axis=1)
    empty = ~masks.any(axis=1)
    if empty.any():
        logger.warning("%d vehicle(s) sensed no idle block, selecting over all blocks", empty.sum())
        choice[empty] = keys[empty].argmax(axis=1)
    return choice


def select_uniform(idle, rng, grid: GridShape):
    """Uniform block among `idle` (uniform over all blocks when empty)"""
    return int(pick_uniform(_as_mask(idle, grid.n_blocks)[None, :], rng)[0])


def select_closest(idle, arrival_offset_ms, grid: GridShape, rng):
    """Idle block closest in time after `arrival_offset_ms`"""
    mask = _as_mask(idle, grid.n_blocks)[None, :]
    return int(pick_closest(mask, [arrival_offset_ms], grid, rng)[0])


def sps_boundary(fleet: Fleet, p, rng, policy=SelectionPolicy.UNIFORM_NEXT_PERIOD):
    """
    Synchronized semi-persistent boundary

    Every vehicle reselects with probability p against its own sensing of the
    period that just ended. All reselectors use the same snapshot, so two of
    them may land on the same block. Returns the ids that reselected.
    """
    fleet.pending_reselect = rng.random(len(fleet)) < p
    ids = np.flatnonzero(fleet.pending_reselect)
    if ids.size:
        masks = fleet.idle_masks(ids)
        if policy is SelectionPolicy.CLOSEST_IDLE:
            fleet.current_block[ids] = pick_closest(masks, fleet.phase_ms[ids], fleet.grid, rng)
        else:
            fleet.current_block[ids] = pick_uniform(masks, rng)
    return ids


@dataclass(frozen=True, eq=False)
class Delivery:
    success: np.ndarray       # per link
    tx_collided: np.ndarray   # per vehicle
    sensed_busy: np.ndarray   # vehicles x blocks

    @property
    def failures(self):
        return int((~self.success).sum())


def deliver(blocks, links: LinkTable, grid: GridShape, half_duplex=False):
    """
    Outcome of one period in which every vehicle transmits on `blocks`

    A reception u -> v fails when any vehicle other than u that v hears, or v
    itself, used u's block.
    """
    blocks = np.asarray(blocks, dtype=np.int64)
    n_vehicles, n_blocks = links.n_vehicles, grid.n_blocks
    heard = np.bincount(links.rx * n_blocks + blocks[links.tx],
                        minlength=n_vehicles * n_blocks).reshape(n_vehicles, n_blocks)
    tx_block = blocks[links.tx]
    occupancy = heard[links.rx, tx_block] + (blocks[links.rx] == tx_block)
    success = occupancy == 1
    if half_duplex:
        success &= grid.subframe_of(blocks[links.rx]) != grid.subframe_of(tx_block)
    tx_collided = np.bincount(links.tx[~success], minlength=n_vehicles) > 0
    return Delivery(success=success, tx_collided=tx_collided, sensed_busy=heard > 0)


class DelayLedger:
    """
    Per-link index of the last delivered message

    Message k of a vehicle is generated at k*T_tr + phase. A slot in period j
    carries message j, or j - 1 when the block lies before the phase.
    """

    def __init__(self, links: LinkTable, wraps):
        self.links = links
        self.last = -1 - np.asarray(wraps, dtype=np.int64)[links.tx]

    def record_delay(self, success, first_period, n_periods, wait_ms, wraps, period_ms):
        """
        Delay samples of `n_periods` identical periods starting at `first_period`

        Returns per-link (sample sum in ms, sample count). The first sample
        after a run of losses counts from the oldest undelivered message.
        """
        wrap = np.asarray(wraps, dtype=np.int64)[self.links.tx]
        wait = np.asarray(wait_ms, dtype=float)[self.links.tx]
        first_message = first_period - wrap
        last_message = first_period + n_periods - 1 - wrap
        start = np.maximum(first_message, self.last + 1)
        count = np.where(success, np.maximum(last_message - start + 1, 0), 0)
        gap = np.where(count > 0, start - self.last - 1, 0)
        total = gap * period_ms + count * wait
        self.last = np.where(count > 0, last_message, self.last)
        return total, count


class Simulator:
    """One replication: initialization, warm-up, then measurement"""

    def __init__(self, config: SimConfig, replication_index=0, trace=None):
        issues = config.problems()
        if issues:
            raise ConfigValidationError(issues)
        self.config = config
        self.replication_index = replication_index
        self.trace = trace
        self.rng = replication_rng(config.master_seed, replication_index)
        self.topology = build_topology(config.topology, self.rng)
        self.links = LinkTable.from_topology(self.topology)
        self.fleet = Fleet.initialize(self.topology.n_vehicles, config.grid, config.policy, self.rng)
        self.ledger = DelayLedger(self.links, self.fleet.wraps())
        self._init_masks()

    def _init_masks(self):
        spec, n = self.config.topology, self.topology.n_vehicles
        self.location_bins = 0
        if self.topology.kind is TopologyKind.LINEAR_ROAD:
            positions = np.asarray(self.topology.positions_m)
            margin = spec.edge_margin_m
            self.interior = (positions >= margin) & (positions <= spec.road_length_m - margin)
            self.location_bins = self.config.location_bins
            width = spec.road_length_m / self.location_bins
            self.vehicle_bin = np.minimum((positions // width).astype(np.int64), self.location_bins - 1)
            self.link_bin = self.vehicle_bin[self.links.rx]
        else:
            self.interior = np.ones(n, dtype=bool)
        self.link_interior = self.interior[self.links.rx]

    def _emit_trace(self, first_period, n_periods, delivery):
        blocks = self.fleet.current_block
        outcome = np.where(delivery.tx_collided, "collision", "ok")
        lines = []
        for period in range(first_period, first_period + n_periods):
            lines.extend(f"{period} {v} {blocks[v]} {outcome[v]}\n" for v in range(len(blocks)))
        self.trace.writelines(lines)

    def run(self):
        cfg, grid, fleet = self.config, self.config.grid, self.fleet
        total_periods, warmup_periods = cfg.total_periods, cfg.warmup_periods
        transmissions = collisions = receptions = failures = delay_count = 0
        delay_sum = 0.0
        bins = self.location_bins
        loc_expected = np.zeros(bins, dtype=np.int64)
        loc_failed = np.zeros(bins, dtype=np.int64)

        period = 0
        while period < total_periods:
            n_periods = min(cfg.sps_periods, total_periods - period)
            delivery = deliver(fleet.current_block, self.links, grid, cfg.half_duplex)
            sums, counts = self.ledger.record_delay(
                delivery.success, period, n_periods, fleet.wait_ms(), fleet.wraps(), grid.period_ms,
            )
            if self.trace is not None:
                self._emit_trace(period, n_periods, delivery)

            if period >= warmup_periods:
                transmissions += n_periods * int(self.interior.sum())
                collisions += n_periods * int((delivery.tx_collided & self.interior).sum())
                failed = ~delivery.success
                receptions += n_periods * int(self.link_interior.sum())
                failures += n_periods * int((failed & self.link_interior).sum())
                delay_sum += float(sums[self.link_interior].sum())
                delay_count += int(counts[self.link_interior].sum())
                if bins:
                    loc_expected += n_periods * np.bincount(self.link_bin, minlength=bins)
                    loc_failed += n_periods * np.bincount(self.link_bin[failed], minlength=bins)

            fleet.sensed_busy = delivery.sensed_busy
            period += n_periods
            if period < total_periods:
                sps_boundary(fleet, cfg.resel_prob, self.rng, cfg.policy)

        per_by_location = ()
        if bins:
            width = cfg.topology.road_length_m / bins
            with np.errstate(invalid="ignore", divide="ignore"):
                loc_per = np.where(loc_expected > 0, loc_failed / np.maximum(loc_expected, 1), np.nan)
            per_by_location = tuple(((i + 0.5) * width, float(loc_per[i])) for i in range(bins))

        metrics = SimMetrics(
            tx_collision_ratio=collisions / transmissions if transmissions else 0.0,
            per=failures / receptions if receptions else 0.0,
            per_by_location=per_by_location,
            mean_delay_ms=delay_sum / delay_count if delay_count else 0.0,
            delay_samples_count=delay_count,
            transmissions_total=transmissions,
            collisions_total=collisions,
            receptions_total=receptions,
            failures_total=failures,
        )
        logger.debug("replication %d: %s", self.replication_index, metrics)
        return metrics


def run_replication(config: SimConfig, replication_index=0, trace=None):
    """Deterministic in (config, master_seed, replication_index)"""
    return Simulator(config, replication_index, trace).run()
