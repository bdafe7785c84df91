"""
Replication runner and sweep orchestration
Runs replications serially or on a process pool, aggregates them and attaches
the analytic prediction of every sweep point.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed

import numpy as np
import psutil

from models.analytic import HiddenTerminalParams, ModelParams
from models.results import AggregateResult, Estimate, LocationEstimate
from models.scenario import SimConfig, SweepSpec, TopologyKind
from utils import analytic
from utils.config import sweep_points, validate_sweep
from utils.errors import SpsError
from utils.simcore import run_replication

logger = logging.getLogger(__name__)

Z_95 = 1.96


def default_jobs():
    """Physical core count, or 1 when it cannot be determined"""
    return psutil.cpu_count(logical=False) or 1


class ReplicationRunner:
    """Handles execution of replication tasks"""

    def __init__(self, jobs=None):
        self.jobs = max(1, jobs or default_jobs())
        self.executor = None

    def __enter__(self):
        if self.jobs > 1:
            self.executor = ProcessPoolExecutor(max_workers=self.jobs)
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False

    def run(self, tasks):
        """
        Run replication tasks

        Args:
            tasks: iterable of (key, config, replication_index)

        Returns:
            dict: key -> SimMetrics; independent of completion order
        """
        tasks = list(tasks)
        if self.executor is None:
            results = {}
            for done, (key, config, index) in enumerate(tasks, 1):
                results[key] = run_replication(config, index)
                logger.info("Replication %s finished (%d/%d)", key, done, len(tasks))
            return results

        results = {}
        try:
            futures = {
                self.executor.submit(run_replication, config, index): key
                for key, config, index in tasks
            }
            for future in as_completed(futures):
                results[futures[future]] = future.result()
                logger.info("Replication %s finished (%d/%d)", futures[future], len(results), len(tasks))
        except KeyboardInterrupt:
            self._terminate_workers()
            raise
        return results

    def _terminate_workers(self):
        """Kill pool workers and anything they spawned"""
        try:
            children = psutil.Process().children(recursive=True)
        except psutil.Error:
            return
        for child in children:
            try:
                child.kill()
            except psutil.NoSuchProcess:
                pass
        logger.warning("Terminated %d worker process(es)", len(children))

    def close(self):
        if self.executor is not None:
            self.executor.shutdown(wait=True, cancel_futures=True)
            self.executor = None


def estimate(values):
    """Mean and 1.96 s / sqrt(n) half-width, s the sample standard deviation"""
    values = np.asarray(values, dtype=float)
    values = values[~np.isnan(values)]
    if values.size == 0:
        return Estimate(mean=math.nan, ci=math.nan)
    if np.all(values == values[0]):
        return Estimate(mean=float(values[0]), ci=0.0)
    mean = math.fsum(values) / values.size
    if values.size == 1:
        return Estimate(mean=mean, ci=0.0)
    return Estimate(mean=mean, ci=Z_95 * float(np.std(values, ddof=1)) / math.sqrt(values.size))


def aggregate(metrics, point=()):
    """Combine the replications of one sweep point"""
    metrics = list(metrics)
    if not metrics:
        raise ValueError("aggregate needs at least one replication")
    per_by_location = ()
    if metrics[0].per_by_location:
        centers = [center for center, _ in metrics[0].per_by_location]
        per_by_location = tuple(
            LocationEstimate(bin_center_m=center,
                             per=estimate([m.per_by_location[i][1] for m in metrics]))
            for i, center in enumerate(centers)
        )
    return AggregateResult(
        point=tuple(point),
        replications=len(metrics),
        collision=estimate([m.tx_collision_ratio for m in metrics]),
        per=estimate([m.per for m in metrics]),
        delay_ms=estimate([m.mean_delay_ms for m in metrics]),
        per_by_location=per_by_location,
    )


def attach_analytic(result: AggregateResult, config: SimConfig):
    """Fill the analytic columns; an invalid model is recorded, never raised"""
    try:
        if config.topology.kind is TopologyKind.FULLY_CONNECTED:
            params = ModelParams(
                n_vehicles=config.topology.n_vehicles,
                n_blocks=config.grid.n_blocks,
                sps_periods=config.sps_periods,
                resel_prob=config.resel_prob,
                period_ms=config.grid.period_ms,
            )
            solution = analytic.solve_fixed_point(params)
            result.ana_pc = result.ana_per = solution.p_c
            result.ana_delay_ms = analytic.expected_delay(params, solution.p_c).e_d_total_ms
        else:
            topology = config.topology
            road = HiddenTerminalParams(topology.effective_density_per_km(), topology.range_m,
                                        topology.road_length_m)
            unbounded = HiddenTerminalParams(road.density_per_km, road.range_m)
            params = analytic.model_params_for_road(
                unbounded, config.grid.n_blocks, config.sps_periods, config.resel_prob,
                config.grid.period_ms,
            )
            solution = analytic.solve_hidden_terminal(params, unbounded)
            result.ana_pc = solution.p_c_ht
            result.ana_per = solution.per
            result.ana_delay_ms = solution.e_d_total_ms
            result.per_by_location = tuple(
                LocationEstimate(
                    bin_center_m=loc.bin_center_m,
                    per=loc.per,
                    analytic_per=analytic.per_at_location(solution.p_c, params.n_blocks, road,
                                                          loc.bin_center_m),
                )
                for loc in result.per_by_location
            )
        result.ana_valid = True
    except SpsError as exc:
        logger.warning("Analytic model invalid at %s: %s", dict(result.point), exc)
        result.ana_pc = result.ana_per = result.ana_delay_ms = None
        result.ana_valid = False
        result.ana_error = str(exc)
    return result


def run_sweep(spec: SweepSpec, jobs=1):
    """
    Run every point of a sweep

    Returns one AggregateResult per point in cartesian order. Replication seeds
    depend only on (master_seed, replication index), so the output is the same
    for any `jobs`.
    """
    validate_sweep(spec)
    points = list(sweep_points(spec))
    tasks = [
        ((point_id, index), config, index)
        for point_id, (_, config) in enumerate(points)
        for index in range(config.replications)
    ]
    with ReplicationRunner(jobs) as runner:
        logger.info("Running %d point(s), %d replication(s) with %d job(s)",
                    len(points), len(tasks), runner.jobs)
        metrics = runner.run(tasks)

    results = []
    for point_id, (point, config) in enumerate(points):
        replications = [metrics[(point_id, index)] for index in range(config.replications)]
        results.append(attach_analytic(aggregate(replications, point), config))
    return results
