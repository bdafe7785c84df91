"""
Analytical model of semi-persistent resource scheduling
Fixed-point collision probability, average delay and the hidden-terminal extension.
All functions are pure; probabilities are plain floats, delays are in milliseconds.
"""
import logging
import math

import numpy as np
from scipy import integrate, optimize
from scipy.stats import binom

from models.analytic import (
    DelayStats,
    FixedPointSolution,
    HiddenTerminalParams,
    HiddenTerminalSolution,
    ModelParams,
)
from utils.errors import (
    AnalyticDomainError,
    InfiniteDelayError,
    ModelValidityError,
    SolverError,
)

logger = logging.getLogger(__name__)

SOLVER_TOLERANCE = 1e-10
SOLVER_DAMPING = 0.5
SOLVER_MAX_ITERATIONS = 10_000
# Below this beta*R the PER closed form is 0/0; use its limit
PER_LIMIT_THRESHOLD = 1e-9


def _check_probability(name, value):
    if not 0.0 <= value <= 1.0:
        raise AnalyticDomainError(f"{name} must lie in [0, 1], got {value}")


def reselect_prob_mass(n, params: ModelParams):
    """P_r(n): probability that n of the other N_v - 1 vehicles reselect in one period"""
    peers = params.n_vehicles - 1
    if not 0 <= n <= peers:
        raise AnalyticDomainError(f"n must lie in [0, {peers}], got {n}")
    return float(binom.pmf(n, peers, params.per_period_resel))


def expected_idle(params: ModelParams, p_c):
    """N_idle = N_r - N_v + P_c (N_v - 1) / 2"""
    _check_probability("p_c", p_c)
    return params.n_blocks - params.n_vehicles + p_c * (params.n_vehicles - 1) / 2.0


def _check_idle(n_idle):
    if n_idle < 1:
        raise AnalyticDomainError(f"expected idle blocks must be >= 1, got {n_idle}")


def collision_case1(params: ModelParams, n_idle):
    """Closed form of the simultaneous-reselection collision probability"""
    _check_idle(n_idle)
    return 1.0 - (1.0 - params.per_period_resel / n_idle) ** (params.n_vehicles - 1)


def collision_case1_sum(params: ModelParams, n_idle):
    """Explicit sum over n of P_r(n) P_s(n); equals collision_case1"""
    _check_idle(n_idle)
    peers = params.n_vehicles - 1
    if peers == 0:
        return 0.0
    n = np.arange(1, peers + 1)
    mass = binom.pmf(n, peers, params.per_period_resel)
    hit = 1.0 - ((n_idle - 1.0) / n_idle) ** n
    return math.fsum(mass * hit)


def fixed_point_rhs(params: ModelParams, p_c):
    """Right-hand side of the fixed-point equation for P_c"""
    return collision_case1(params, expected_idle(params, p_c)) / (2.0 - params.resel_prob)


def _validate_model(params: ModelParams):
    if params.n_vehicles >= params.n_blocks:
        raise ModelValidityError(
            f"model requires n_vehicles < n_blocks, got {params.n_vehicles} >= {params.n_blocks}"
        )


def solve_fixed_point(params: ModelParams, tolerance=SOLVER_TOLERANCE,
                      max_iterations=SOLVER_MAX_ITERATIONS):
    """
    Solve P_c = RHS(P_c)

    Damped Picard iteration from 0 with damping 0.5; if the iteration cap is
    reached, bisection on P_c - RHS(P_c) over [0, 1] takes over.
    """
    _validate_model(params)

    x = 0.0
    residual = abs(x - fixed_point_rhs(params, x))
    iterations = 0
    while residual > tolerance and iterations < max_iterations:
        x = (1.0 - SOLVER_DAMPING) * x + SOLVER_DAMPING * fixed_point_rhs(params, x)
        x = min(max(x, 0.0), 1.0)
        residual = abs(x - fixed_point_rhs(params, x))
        iterations += 1

    method = "picard"
    if residual > tolerance:
        logger.warning("Picard iteration hit its cap (%d) for %s, falling back to bisection",
                       max_iterations, params)
        method = "bisection"
        gap = lambda value: value - fixed_point_rhs(params, value)
        if gap(1.0) <= 0.0:
            x = 1.0
        else:
            x, result = optimize.bisect(gap, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                        maxiter=SOLVER_MAX_ITERATIONS, full_output=True, disp=False)
            iterations += result.iterations
        residual = abs(gap(x))
        if residual > tolerance:
            raise SolverError("fixed point did not converge", x, residual)

    logger.debug("fixed point %s: p_c=%r after %d iterations (%s)", params, x, iterations, method)
    return FixedPointSolution(
        p_c=x,
        n_idle=expected_idle(params, x),
        iterations=iterations,
        residual=residual,
        method=method,
    )


def combined_collision_prob(p_c, sps_periods):
    """Probability that a whole semi-persistent period counts as one combined collision"""
    _check_probability("p_c", p_c)
    if sps_periods < 1:
        raise AnalyticDomainError(f"sps_periods must be >= 1, got {sps_periods}")
    if p_c == 1.0:
        logger.warning("combined collision probability is degenerate at p_c = 1")
        return 1.0
    return p_c / (sps_periods - (sps_periods - 1) * p_c)


def expected_delay(params: ModelParams, p_c):
    """Initial delay plus geometric collision delay"""
    p_com = combined_collision_prob(p_c, params.sps_periods)
    if p_com >= 1.0:
        raise InfiniteDelayError(f"combined collision probability is 1 (p_c={p_c}); delay is unbounded")
    e_ini = params.period_ms / 2.0
    e_col = params.sps_periods * params.period_ms * p_com / (1.0 - p_com)
    return DelayStats(e_d_ini_ms=e_ini, e_d_col_ms=e_col, e_d_total_ms=e_ini + e_col, p_c_com=p_com)


def delay_partial(params: ModelParams, per):
    """Average delay of the partially connected case, driven by the packet error ratio"""
    return expected_delay(params, per)


def p_single(n_blocks, ht: HiddenTerminalParams):
    """Probability that one hidden vehicle does not pick the tagged vehicle's block"""
    free = n_blocks - ht.vehicles_within_range
    if free <= 1:
        raise ModelValidityError(
            f"N_r - beta*R must exceed 1, got {n_blocks} - {ht.vehicles_within_range} = {free}"
        )
    return (free - 1.0) / free


def collision_with_hidden(p_c, n_blocks, ht: HiddenTerminalParams):
    """Transmitter-side collision probability with hidden terminals"""
    _check_probability("p_c", p_c)
    single = p_single(n_blocks, ht)
    if ht.n_hidden == 0:
        return p_c
    return 1.0 - (1.0 - p_c) * single ** ht.n_hidden


def per_at_distance(p_c, n_blocks, ht: HiddenTerminalParams, distance_m):
    """Loss probability of a receiver at distance r from the transmitter (unbounded road)"""
    _check_probability("p_c", p_c)
    if not 0.0 <= distance_m <= ht.range_m:
        raise AnalyticDomainError(f"distance must lie in [0, {ht.range_m}], got {distance_m}")
    single = p_single(n_blocks, ht)
    return 1.0 - (1.0 - p_c) * single ** (ht.density_per_m * distance_m)


def packet_error_ratio(p_c, n_blocks, ht: HiddenTerminalParams):
    """Receiver-side packet error ratio averaged over distances in [0, R]"""
    _check_probability("p_c", p_c)
    single = p_single(n_blocks, ht)
    exponent = ht.vehicles_within_range
    if exponent < PER_LIMIT_THRESHOLD:
        return p_c
    log_single = math.log(single)
    # single**exponent - 1, without cancellation
    growth = math.expm1(exponent * log_single)
    return 1.0 - (1.0 - p_c) * growth / (exponent * log_single)


def _overlap(a_lo, a_hi, b_lo, b_hi):
    return max(0.0, min(a_hi, b_hi) - max(a_lo, b_lo))


def per_at_location(p_c, n_blocks, ht: HiddenTerminalParams, position_m):
    """
    Packet error ratio of a receiver at `position_m` on a finite road [0, L]

    Transmitters are uniform over the receiver's range clipped to the road; the
    hidden vehicles of a transmitter at y are those inside the receiver's range
    but outside the transmitter's, again clipped to the road.
    """
    _check_probability("p_c", p_c)
    if ht.road_length_m is None:
        return packet_error_ratio(p_c, n_blocks, ht)
    length = ht.road_length_m
    if not 0.0 <= position_m <= length:
        raise AnalyticDomainError(f"position must lie in [0, {length}], got {position_m}")

    single = p_single(n_blocks, ht)
    radius = ht.range_m
    lo, hi = max(0.0, position_m - radius), min(length, position_m + radius)
    if hi <= lo:
        return p_c
    rx_span = hi - lo

    def delivered(y):
        shared = _overlap(lo, hi, max(0.0, y - radius), min(length, y + radius))
        return single ** (ht.density_per_m * (rx_span - shared))

    breakpoints = sorted({p for p in (position_m, lo + radius, hi - radius) if lo < p < hi})
    mean, _ = integrate.quad(delivered, lo, hi, points=breakpoints or None,
                             epsabs=1e-12, epsrel=1e-10, limit=200)
    return 1.0 - (1.0 - p_c) * mean / rx_span


def model_params_for_road(ht: HiddenTerminalParams, n_blocks=200, sps_periods=10,
                          resel_prob=0.2, period_ms=100.0):
    """Fully connected model of one neighbourhood: the tagged vehicle plus 2 beta R peers"""
    return ModelParams(
        n_vehicles=int(round(ht.n_in_range)) + 1,
        n_blocks=n_blocks,
        sps_periods=sps_periods,
        resel_prob=resel_prob,
        period_ms=period_ms,
    )


def solve_hidden_terminal(params: ModelParams, ht: HiddenTerminalParams):
    """Hidden-terminal collision probability, PER and PER-driven delay"""
    solution = solve_fixed_point(params)
    p_c = solution.p_c
    single = p_single(params.n_blocks, ht)
    per = packet_error_ratio(p_c, params.n_blocks, ht)
    return HiddenTerminalSolution(
        p_single=single,
        p_c_ht=collision_with_hidden(p_c, params.n_blocks, ht),
        per=per,
        p_del=1.0 - p_c,
        e_d_total_ms=delay_partial(params, per).e_d_total_ms,
        p_c=p_c,
    )
