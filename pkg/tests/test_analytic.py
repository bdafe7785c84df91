import logging
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import integrate, optimize

from models.analytic import HiddenTerminalParams, ModelParams
from utils import analytic
from utils.errors import (
    AnalyticDomainError,
    InfiniteDelayError,
    ModelValidityError,
    SolverError,
)

ORACLE_PC = -8.0 + math.sqrt(66.0)


def valid_params():
    return st.integers(1, 150).flatmap(lambda n_vehicles: st.builds(
        ModelParams,
        n_vehicles=st.just(n_vehicles),
        n_blocks=st.integers(n_vehicles + 1, n_vehicles + 250),
        sps_periods=st.integers(1, 100),
        resel_prob=st.floats(0.0, 1.0),
        period_ms=st.floats(1.0, 1000.0),
    ))


def geometric_delay_oracle(params, p_c, terms=10**6):
    """Collision delay by summing the geometric series directly"""
    p_com = p_c / (params.sps_periods - (params.sps_periods - 1) * p_c)
    i = np.arange(1, terms + 1, dtype=float)
    expected_runs = math.fsum(i * p_com ** i * (1.0 - p_com))
    return params.period_ms / 2.0 + params.sps_periods * params.period_ms * expected_runs


def per_quadrature(p_c, n_blocks, ht):
    single = analytic.p_single(n_blocks, ht)
    radius = ht.range_m
    delivered, _ = integrate.quad(
        lambda r: (1.0 - p_c) * single ** (ht.density_per_m * r) / (2.0 * radius),
        0.0, radius, epsabs=1e-13, epsrel=1e-12,
    )
    return 1.0 - 2.0 * delivered


class TestModelParams:
    def test_defaults(self):
        params = ModelParams(n_vehicles=100)
        assert (params.n_blocks, params.sps_periods, params.resel_prob, params.period_ms) == (200, 10, 0.2, 100.0)
        assert params.per_period_resel == pytest.approx(0.02)

    @pytest.mark.parametrize("kwargs", [
        dict(n_vehicles=0),
        dict(n_vehicles=10, n_blocks=0),
        dict(n_vehicles=10, sps_periods=0),
        dict(n_vehicles=10, resel_prob=1.5),
        dict(n_vehicles=10, period_ms=0.0),
    ])
    def test_rejects_out_of_range(self, kwargs):
        with pytest.raises(ModelValidityError):
            ModelParams(**kwargs)

    def test_rejects_more_vehicles_than_blocks(self):
        with pytest.raises(ModelValidityError, match="n_vehicles < n_blocks"):
            ModelParams(n_vehicles=200, n_blocks=200)


class TestReselectMass:
    def test_single_vehicle(self):
        assert analytic.reselect_prob_mass(0, ModelParams(1, sps_periods=7, resel_prob=0.3)) == pytest.approx(1.0)

    def test_everyone_reselects(self):
        params = ModelParams(3, n_blocks=10, sps_periods=1, resel_prob=1.0)
        assert analytic.reselect_prob_mass(2, params) == pytest.approx(1.0)

    def test_direct_substitution(self):
        params = ModelParams(3, sps_periods=10, resel_prob=0.2)
        assert analytic.reselect_prob_mass(1, params) == pytest.approx(2 * 0.02 * 0.98, rel=1e-12)

    def test_mass_sums_to_one(self):
        params = ModelParams(40, sps_periods=5, resel_prob=0.7)
        total = math.fsum(analytic.reselect_prob_mass(n, params) for n in range(40))
        assert total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", [-1, 3])
    def test_out_of_range(self, n):
        with pytest.raises(AnalyticDomainError):
            analytic.reselect_prob_mass(n, ModelParams(3))


class TestExpectedIdle:
    def test_no_collisions(self):
        assert analytic.expected_idle(ModelParams(100), 0.0) == 100

    def test_substitution(self):
        assert analytic.expected_idle(ModelParams(100), 0.1) == pytest.approx(104.95)

    def test_oracle_case(self):
        params = ModelParams(2, n_blocks=10, sps_periods=1, resel_prob=1.0)
        assert analytic.expected_idle(params, 0.124038) == pytest.approx(8.062019)

    def test_probability_checked(self):
        with pytest.raises(AnalyticDomainError):
            analytic.expected_idle(ModelParams(100), 1.2)


class TestCollisionCase1:
    def test_no_reselection(self):
        assert analytic.collision_case1(ModelParams(100, resel_prob=0.0), 90.0) == 0.0

    def test_single_vehicle(self):
        assert analytic.collision_case1(ModelParams(1), 150.0) == 0.0

    def test_oracle_case(self):
        params = ModelParams(2, n_blocks=10, sps_periods=1, resel_prob=1.0)
        assert analytic.collision_case1(params, 8.062019) == pytest.approx(1 / 8.062019)

    def test_no_idle_block(self):
        with pytest.raises(AnalyticDomainError):
            analytic.collision_case1(ModelParams(100), 0.5)

    def test_sum_matches_closed_form(self):
        rng = np.random.default_rng(20240601)
        for _ in range(1000):
            n_vehicles = int(rng.integers(1, 200))
            n_blocks = int(rng.integers(n_vehicles + 1, 401))
            params = ModelParams(
                n_vehicles=n_vehicles,
                n_blocks=n_blocks,
                sps_periods=int(rng.integers(1, 51)),
                resel_prob=float(rng.uniform(0.0, 1.0)),
            )
            n_idle = float(rng.uniform(1.0, n_blocks))
            assert analytic.collision_case1_sum(params, n_idle) == pytest.approx(
                analytic.collision_case1(params, n_idle), abs=1e-12
            )


class TestSolveFixedPoint:
    def test_quadratic_oracle(self):
        params = ModelParams(2, n_blocks=10, sps_periods=1, resel_prob=1.0)
        solution = analytic.solve_fixed_point(params)
        assert solution.p_c == pytest.approx(ORACLE_PC, abs=1e-9)
        assert solution.method == "picard"
        assert solution.n_idle == pytest.approx(8.0 + ORACLE_PC / 2.0)

    def test_quadratic_oracle_by_bisection(self):
        params = ModelParams(2, n_blocks=10, sps_periods=1, resel_prob=1.0)
        root = optimize.bisect(lambda x: x - analytic.fixed_point_rhs(params, x), 0.0, 1.0, xtol=1e-14)
        assert root == pytest.approx(ORACLE_PC, abs=1e-9)

    def test_no_reselection(self):
        assert analytic.solve_fixed_point(ModelParams(150, resel_prob=0.0)).p_c == 0.0

    def test_single_vehicle(self):
        assert analytic.solve_fixed_point(ModelParams(1)).p_c == 0.0

    def test_rejects_invalid_model(self):
        params = ModelParams(2, n_blocks=10)
        object.__setattr__(params, "n_vehicles", 10)
        with pytest.raises(ModelValidityError):
            analytic.solve_fixed_point(params)

    @given(valid_params())
    def test_residual_and_bisection_agree(self, params):
        solution = analytic.solve_fixed_point(params)
        assert 0.0 <= solution.p_c <= 1.0
        assert abs(solution.p_c - analytic.fixed_point_rhs(params, solution.p_c)) <= 1e-10
        assume(params.resel_prob > 0 and params.n_vehicles > 1)
        root = optimize.bisect(lambda x: x - analytic.fixed_point_rhs(params, x), 0.0, 1.0, xtol=1e-14)
        assert solution.p_c == pytest.approx(root, abs=1e-9)

    def test_falls_back_to_bisection(self, caplog):
        params = ModelParams(100)
        expected = analytic.solve_fixed_point(params).p_c
        with caplog.at_level(logging.WARNING, logger="utils.analytic"):
            solution = analytic.solve_fixed_point(params, max_iterations=2)
        assert solution.method == "bisection"
        assert solution.p_c == pytest.approx(expected, abs=1e-9)
        assert "falling back to bisection" in caplog.text

    def test_solver_error_reports_last_iterate(self, monkeypatch):
        monkeypatch.setattr(analytic.optimize, "bisect",
                            lambda *args, **kwargs: (0.9, SimpleNamespace(iterations=1)))
        with pytest.raises(SolverError) as excinfo:
            analytic.solve_fixed_point(ModelParams(100), max_iterations=1)
        assert excinfo.value.last_iterate == 0.9
        assert excinfo.value.residual > 1e-10

    def test_nondecreasing_in_rate(self):
        values = [
            analytic.solve_fixed_point(ModelParams(100, sps_periods=10, resel_prob=p)).p_c
            for p in np.linspace(0.0, 1.0, 21)
        ]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_fixed_ratio_increases_with_p(self):
        values = [
            analytic.solve_fixed_point(ModelParams(150, sps_periods=t_s, resel_prob=p)).p_c
            for p, t_s in [(0.2, 10), (0.5, 25), (1.0, 50)]
        ]
        assert values[0] < values[1] < values[2]


class TestCombinedCollision:
    @pytest.mark.parametrize("p_c, t_s, expected", [
        (0.0, 10, 0.0),
        (0.3, 1, 0.3),
        (0.1, 10, 0.1 / 9.1),
    ])
    def test_examples(self, p_c, t_s, expected):
        assert analytic.combined_collision_prob(p_c, t_s) == pytest.approx(expected, rel=1e-12)

    def test_degenerate_at_one(self, caplog):
        with caplog.at_level(logging.WARNING, logger="utils.analytic"):
            assert analytic.combined_collision_prob(1.0, 10) == 1.0
        assert "degenerate" in caplog.text

    def test_rejects_bad_arguments(self):
        with pytest.raises(AnalyticDomainError):
            analytic.combined_collision_prob(-0.1, 10)
        with pytest.raises(AnalyticDomainError):
            analytic.combined_collision_prob(0.1, 0)


class TestDelay:
    def test_initial_delay_only(self):
        stats = analytic.expected_delay(ModelParams(10), 0.0)
        assert stats.e_d_ini_ms == 50.0
        assert stats.e_d_total_ms == 50.0

    def test_single_period(self):
        params = ModelParams(10, sps_periods=1)
        assert analytic.expected_delay(params, 0.5).e_d_total_ms == pytest.approx(150.0)

    def test_chain_substitution(self):
        params = ModelParams(10, sps_periods=10)
        stats = analytic.expected_delay(params, 0.1)
        assert stats.e_d_total_ms == pytest.approx(50.0 + 100.0 / 9.0, rel=1e-12)
        assert stats.e_d_total_ms == pytest.approx(61.111, abs=1e-3)
        assert stats.e_d_total_ms == pytest.approx(geometric_delay_oracle(params, 0.1), rel=1e-9)

    def test_infinite_delay(self):
        with pytest.raises(InfiniteDelayError):
            analytic.expected_delay(ModelParams(10), 1.0)

    @given(valid_params(), st.one_of(st.just(0.0), st.floats(1e-6, 0.99)))
    def test_delay_floor(self, params, p_c):
        total = analytic.expected_delay(params, p_c).e_d_total_ms
        assert math.isfinite(total)
        if p_c == 0.0:
            assert total == params.period_ms / 2.0
        else:
            assert total > params.period_ms / 2.0

    def test_partial_examples(self):
        params = ModelParams(10, sps_periods=10)
        assert analytic.delay_partial(params, 0.0).e_d_total_ms == 50.0
        assert analytic.delay_partial(params, 0.2).e_d_total_ms == pytest.approx(75.0, rel=1e-12)
        assert analytic.delay_partial(params, 0.2).e_d_total_ms == pytest.approx(
            geometric_delay_oracle(params, 0.2), rel=1e-9
        )

    def test_partial_is_substitution(self):
        params = ModelParams(100)
        p_c = analytic.solve_fixed_point(params).p_c
        assert analytic.delay_partial(params, p_c) == analytic.expected_delay(params, p_c)


class TestHiddenTerminal:
    def test_params_derived_counts(self):
        ht = HiddenTerminalParams(100.0, 500.0)
        assert ht.vehicles_within_range == pytest.approx(50.0)
        assert ht.n_in_range == pytest.approx(100.0)
        assert ht.n_hidden == pytest.approx(100.0)

    def test_params_validation(self):
        with pytest.raises(ModelValidityError):
            HiddenTerminalParams(-1.0)
        with pytest.raises(ModelValidityError):
            HiddenTerminalParams(10.0, range_m=0.0)

    @pytest.mark.parametrize("density, expected", [
        (0.0, 0.995),
        (100.0, 149 / 150),
        (250.0, 74 / 75),
    ])
    def test_p_single(self, density, expected):
        assert analytic.p_single(200, HiddenTerminalParams(density, 500.0)) == pytest.approx(expected, rel=1e-12)

    def test_p_single_without_free_blocks(self):
        with pytest.raises(ModelValidityError):
            analytic.p_single(50, HiddenTerminalParams(100.0, 500.0))

    def test_collision_without_hidden_vehicles_is_exact(self):
        assert analytic.collision_with_hidden(0.1, 200, HiddenTerminalParams(0.0)) == 0.1

    def test_collision_certain(self):
        assert analytic.collision_with_hidden(1.0, 200, HiddenTerminalParams(100.0)) == 1.0

    def test_collision_example(self):
        value = analytic.collision_with_hidden(0.05, 200, HiddenTerminalParams(100.0, 500.0))
        assert value == pytest.approx(1.0 - 0.95 * math.exp(100 * math.log(149 / 150)), abs=1e-12)
        assert value == pytest.approx(0.5134, abs=1e-3)

    def test_per_limit(self):
        ht = HiddenTerminalParams(0.0)
        assert analytic.packet_error_ratio(0.3, 200, ht) == 0.3
        assert analytic.packet_error_ratio(0.0, 200, ht) == 0.0

    def test_per_example_against_quadrature(self):
        ht = HiddenTerminalParams(100.0, 500.0)
        assert analytic.packet_error_ratio(0.05, 200, ht) == pytest.approx(
            per_quadrature(0.05, 200, ht), abs=1e-9
        )

    def test_per_against_quadrature_grid(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n_blocks = int(rng.integers(50, 401))
            range_m = float(rng.uniform(100.0, 1000.0))
            max_density = (n_blocks - 2) / range_m * 1000.0
            ht = HiddenTerminalParams(float(rng.uniform(1.0, max_density)), range_m)
            p_c = float(rng.uniform(0.0, 0.99))
            assert analytic.packet_error_ratio(p_c, n_blocks, ht) == pytest.approx(
                per_quadrature(p_c, n_blocks, ht), abs=1e-9
            )

    @given(st.floats(0.0, 0.99), st.floats(0.5, 250.0))
    def test_per_bounded_by_hidden_collision(self, p_c, density):
        ht = HiddenTerminalParams(density, 500.0)
        per = analytic.packet_error_ratio(p_c, 200, ht)
        p_c_ht = analytic.collision_with_hidden(p_c, 200, ht)
        assert p_c <= per <= p_c_ht + 1e-15
        assert 0.0 <= per <= 1.0

    def test_per_at_distance_endpoints(self):
        ht = HiddenTerminalParams(100.0, 500.0)
        assert analytic.per_at_distance(0.05, 200, ht, 0.0) == pytest.approx(0.05)
        assert analytic.per_at_distance(0.05, 200, ht, 500.0) == pytest.approx(
            1.0 - 0.95 * (149 / 150) ** 50
        )
        with pytest.raises(AnalyticDomainError):
            analytic.per_at_distance(0.05, 200, ht, 600.0)

    def test_per_at_location_interior_matches_unbounded(self):
        road = HiddenTerminalParams(100.0, 500.0, road_length_m=10_000.0)
        unbounded = HiddenTerminalParams(100.0, 500.0)
        assert analytic.per_at_location(0.05, 200, road, 5000.0) == pytest.approx(
            analytic.packet_error_ratio(0.05, 200, unbounded), abs=1e-9
        )

    def test_per_at_location_edge(self):
        road = HiddenTerminalParams(100.0, 500.0, road_length_m=3000.0)
        edge = analytic.per_at_location(0.05, 200, road, 0.0)
        centre = analytic.per_at_location(0.05, 200, road, 1500.0)
        assert edge == pytest.approx(0.05, abs=1e-12)
        assert centre > edge
        with pytest.raises(AnalyticDomainError):
            analytic.per_at_location(0.05, 200, road, 3500.0)

    def test_per_at_location_without_road_length(self):
        ht = HiddenTerminalParams(100.0, 500.0)
        assert analytic.per_at_location(0.05, 200, ht, 1234.0) == analytic.packet_error_ratio(0.05, 200, ht)

    def test_model_params_for_road(self):
        params = analytic.model_params_for_road(HiddenTerminalParams(100.0, 500.0))
        assert params.n_vehicles == 101
        assert (params.n_blocks, params.sps_periods, params.resel_prob) == (200, 10, 0.2)

    def test_solution_without_hidden_vehicles_reduces_exactly(self):
        params = ModelParams(101)
        fc = analytic.solve_fixed_point(params)
        solution = analytic.solve_hidden_terminal(params, HiddenTerminalParams(0.0))
        assert solution.p_c == fc.p_c
        assert solution.p_c_ht == fc.p_c
        assert solution.per == fc.p_c
        assert solution.p_del == 1.0 - fc.p_c
        assert solution.e_d_total_ms == analytic.expected_delay(params, fc.p_c).e_d_total_ms

    def test_solution_ordering(self):
        ht = HiddenTerminalParams(100.0, 500.0)
        solution = analytic.solve_hidden_terminal(analytic.model_params_for_road(ht), ht)
        assert solution.p_c <= solution.per <= solution.p_c_ht
        assert solution.p_single == pytest.approx(149 / 150)
