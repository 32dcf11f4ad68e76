import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from oracles import eq11_breakeven_bisect
from tricds.contracts import standard_schedule
from tricds.errors import CalibrationFailed, GridMismatch, InvalidBounds, InvalidParams
from tricds.hazard import (
    CIRParams,
    calibrate_cir,
    cir_expected_survival,
    export_paths,
    period_survival,
    read_exported_paths,
    riskfree_breakeven_spread,
    riskfree_pathset,
    simulate_paths,
)
from tricds.market import build_curve, discount_factor, load_bundled_snapshot, shifted_credit_curve

TABLE2_A = CIRParams(a=0.14, b=0.035, sigma=0.022, h0=0.035)
GRID_5Y = np.concatenate([[0.0], np.arange(1, 21) * 0.25])


class TestSimulatePaths:
    def test_zero_vol_at_fixed_point(self):
        params = CIRParams(a=0.5, b=0.03, sigma=0.0, h0=0.03)
        ps = simulate_paths(params, GRID_5Y, n_paths=16, seed=1)
        assert np.allclose(ps.rates, 0.03, atol=1e-15)
        assert np.allclose(ps.integrals, 0.03 * 0.25, atol=1e-14)

    def test_zero_vol_matches_ode(self):
        params = CIRParams(a=0.4, b=0.05, sigma=0.0, h0=0.01)
        ps = simulate_paths(params, GRID_5Y, n_paths=2, seed=1, substeps_per_year=52)
        t = ps.time_grid
        exact = params.b + (params.h0 - params.b) * np.exp(-params.a * t)
        assert np.max(np.abs(ps.rates[0] - exact)) <= 1e-6

    def test_long_run_mean_near_b(self):
        # sample mean at a 30y horizon sits within 3 standard errors of the
        # long-term level for the softest calibrated parameter set
        grid = np.array([0.0, 30.0])
        ps = simulate_paths(TABLE2_A, grid, n_paths=100_000, seed=7, substeps_per_year=52)
        terminal = ps.rates[:, -1]
        se = terminal.std(ddof=1) / math.sqrt(terminal.size)
        assert abs(terminal.mean() - TABLE2_A.b) <= 3.0 * se

    def test_seed_determinism_bit_exact(self):
        a = simulate_paths(TABLE2_A, GRID_5Y, 500, seed=42, stream=1)
        b = simulate_paths(TABLE2_A, GRID_5Y, 500, seed=42, stream=1)
        assert np.array_equal(a.rates, b.rates)
        assert np.array_equal(a.integrals, b.integrals)
        c = simulate_paths(TABLE2_A, GRID_5Y, 500, seed=43, stream=1)
        assert not np.array_equal(a.rates, c.rates)

    def test_streams_are_independent_draws(self):
        a = simulate_paths(TABLE2_A, GRID_5Y, 500, seed=42, stream=0)
        b = simulate_paths(TABLE2_A, GRID_5Y, 500, seed=42, stream=1)
        assert not np.array_equal(a.rates, b.rates)

    @given(
        st.floats(min_value=0.05, max_value=1.5),
        st.floats(min_value=0.005, max_value=0.3),
        st.floats(min_value=0.0, max_value=0.6),
        st.floats(min_value=0.0, max_value=0.2),
        st.integers(0, 2**31 - 1),
    )
    @settings(deadline=None, max_examples=25)
    def test_paths_nonnegative_even_feller_violating(self, a, b, sigma, h0, seed):
        params = CIRParams(a=a, b=b, sigma=sigma, h0=h0)
        ps = simulate_paths(params, np.array([0.0, 0.5, 1.0]), 200, seed=seed)
        assert np.all(ps.rates >= 0.0)
        assert np.all(ps.integrals >= 0.0)

    def test_antithetic_pairing(self):
        ps = simulate_paths(TABLE2_A, GRID_5Y, 1000, seed=5, antithetic=True)
        # with zero vol the pairing is inert: both halves coincide
        flat = CIRParams(a=0.3, b=0.04, sigma=0.0, h0=0.02)
        anti = simulate_paths(flat, GRID_5Y, 100, seed=5, antithetic=True)
        raw = simulate_paths(flat, GRID_5Y, 100, seed=5, antithetic=False)
        assert np.allclose(anti.rates, raw.rates, atol=0)
        # sample mean stays unbiased at the 3-standard-error level
        terminal = ps.rates[:, -1]
        exact_mean = TABLE2_A.b + (TABLE2_A.h0 - TABLE2_A.b) * math.exp(-TABLE2_A.a * 5.0)
        se = terminal.std(ddof=1) / math.sqrt(terminal.size)
        assert abs(terminal.mean() - exact_mean) <= 3.0 * se

    def test_antithetic_needs_even_paths(self):
        with pytest.raises(InvalidParams):
            simulate_paths(TABLE2_A, GRID_5Y, 101, seed=1, antithetic=True)

    def test_bad_grid_rejected(self):
        with pytest.raises(GridMismatch):
            simulate_paths(TABLE2_A, np.array([0.5, 1.0]), 10, seed=1)
        with pytest.raises(GridMismatch):
            simulate_paths(TABLE2_A, np.array([0.0, 1.0, 1.0]), 10, seed=1)

    def test_invalid_params_rejected(self):
        with pytest.raises(InvalidParams):
            CIRParams(a=-0.1, b=0.05, sigma=0.1, h0=0.01)
        with pytest.raises(InvalidParams):
            CIRParams(a=0.1, b=0.05, sigma=-0.1, h0=0.01)


class TestPeriodSurvival:
    def test_zero_hazard(self):
        assert period_survival([0.0, 0.5, 1.0], [0.0, 0.0, 0.0]) == 1.0

    def test_constant_hazard(self):
        t = np.linspace(0.0, 1.0, 53)
        p = period_survival(t, np.full_like(t, 0.02))
        assert p == pytest.approx(math.exp(-0.02), abs=1e-14)

    def test_linear_hazard_exact_for_trapezoid(self):
        t = np.linspace(0.0, 1.0, 5)
        p = period_survival(t, 0.04 * t)
        assert p == pytest.approx(math.exp(-0.02), abs=1e-15)

    def test_multiplicative_across_periods(self):
        ps = simulate_paths(TABLE2_A, np.array([0.0, 0.25, 0.5]), 200, seed=3)
        joint = np.exp(-(ps.integrals[:, 0] + ps.integrals[:, 1]))
        split = ps.period_survival(0) * ps.period_survival(1)
        assert np.max(np.abs(joint - split)) <= 1e-14

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatch):
            period_survival([0.0, 1.0], [0.1])
        with pytest.raises(GridMismatch):
            period_survival([0.0, 0.0], [0.1, 0.1])
        ps = simulate_paths(TABLE2_A, np.array([0.0, 1.0]), 10, seed=1)
        with pytest.raises(GridMismatch):
            ps.period_survival(3)

    def test_survival_schedule_shape(self):
        ps = simulate_paths(TABLE2_A, GRID_5Y, 50, seed=2)
        sched = ps.survival_schedule()
        assert sched.p.shape == (50, 20)
        assert np.all(sched.p > 0.0) and np.all(sched.p <= 1.0)
        assert np.allclose(sched.q, 1.0 - sched.p, atol=0)


class TestExpectedSurvival:
    def _ode_oracle(self, params, tau):
        # Riccati system for the affine transform, integrated numerically
        def rhs(_, y):
            b_fn, log_a = y
            return [
                1.0 - params.a * b_fn - 0.5 * params.sigma**2 * b_fn**2,
                -params.a * params.b * b_fn,
            ]

        sol = solve_ivp(rhs, (0.0, tau), [0.0, 0.0], rtol=1e-11, atol=1e-13, dense_output=True)
        b_fn, log_a = sol.y[:, -1]
        return math.exp(log_a - b_fn * params.h0)

    def test_matches_riccati_ode(self):
        for params in (
            TABLE2_A,
            CIRParams(a=0.6, b=0.08, sigma=0.25, h0=0.02),
            CIRParams(a=0.05, b=0.2, sigma=0.02, h0=0.05),
        ):
            for tau in (0.25, 1.0, 5.0, 15.0):
                want = self._ode_oracle(params, tau)
                got = cir_expected_survival(params, tau)
                assert got == pytest.approx(want, rel=1e-8)

    def test_zero_vol_limit_is_deterministic_integral(self):
        params = CIRParams(a=0.3, b=0.05, sigma=0.0, h0=0.01)
        tau = 4.0
        integral = params.b * tau + (params.h0 - params.b) * (1 - math.exp(-params.a * tau)) / params.a
        assert cir_expected_survival(params, tau) == pytest.approx(math.exp(-integral), abs=1e-15)
        # tiny but positive vol stays continuous with the limit
        near = CIRParams(a=0.3, b=0.05, sigma=1e-6, h0=0.01)
        assert cir_expected_survival(near, tau) == pytest.approx(math.exp(-integral), rel=1e-9)

    def test_monte_carlo_agreement(self):
        params = CIRParams(a=0.2, b=0.06, sigma=0.08, h0=0.03)
        grid = np.array([0.0, 5.0])
        ps = simulate_paths(params, grid, 120_000, seed=11, substeps_per_year=52)
        mc = np.exp(-ps.integrals[:, 0])
        se = mc.std(ddof=1) / math.sqrt(mc.size)
        assert abs(mc.mean() - cir_expected_survival(params, 5.0)) <= 4.0 * se

    def test_shape_and_bounds(self):
        out = cir_expected_survival(TABLE2_A, np.array([0.0, 1.0, 2.0]))
        assert out[0] == 1.0
        assert np.all(np.diff(out) < 0)
        assert np.all((out > 0) & (out <= 1))


class TestRiskfreeBreakeven:
    def test_zero_hazard_spread_is_zero(self, snapshot):
        sched = standard_schedule(5.0)
        assert riskfree_breakeven_spread(0.0, snapshot.discount_curve, 0.4, sched) == 0.0

    def test_flat_hazard_against_direct_oracle(self, snapshot):
        sched = standard_schedule(5.0)
        times, accruals = np.asarray(sched[0]), np.asarray(sched[1])
        h, phi_c = 0.02, 0.4
        got = riskfree_breakeven_spread(h, snapshot.discount_curve, phi_c, sched)
        # credit-triangle approximation first
        assert got == pytest.approx(h * (1 - phi_c), rel=0.02)
        survival = np.exp(-h * times)
        discounts = np.array([discount_factor(snapshot.discount_curve, 0.0, t) for t in times])
        want = eq11_breakeven_bisect(times, accruals, survival, discounts, 1e7, phi_c)
        assert got == pytest.approx(want, abs=1e-10)

    def test_calibrated_a_quality_reprices_5y_node(self, snapshot):
        fit = calibrate_cir(snapshot.credit_curve, snapshot.discount_curve, recovery=0.4)
        got = riskfree_breakeven_spread(
            fit.params, snapshot.discount_curve, 0.4, standard_schedule(5.0)
        )
        assert got == pytest.approx(0.0070, abs=1e-4)


class TestCalibration:
    def test_round_trip_recovers_params(self, snapshot):
        true = CIRParams(a=0.3, b=0.06, sigma=0.05, h0=0.01)
        terms = [int(d) for d in (91, 182, 365, 730, 1095, 1825, 2555, 3650, 5475)]
        sched = standard_schedule(5.0)
        nodes = []
        for days in terms:
            tau = days / 365.0
            from tricds.hazard import _node_schedule
            times, accruals = _node_schedule(tau)
            survival = np.array([cir_expected_survival(true, t) for t in times])
            discounts = np.array(
                [discount_factor(snapshot.discount_curve, 0.0, t) for t in times]
            )
            from tricds.pricer import riskfree_breakeven

            nodes.append((days, riskfree_breakeven(survival, discounts, accruals, 0.4)))
        curve = build_curve("credit_spread", nodes)
        fit = calibrate_cir(curve, snapshot.discount_curve, recovery=0.4)
        for name in ("a", "b", "sigma", "h0"):
            got, want = getattr(fit.params, name), getattr(true, name)
            assert got == pytest.approx(want, rel=0.05), name

    def test_a_curve_lands_within_a_decade_of_reported_params(self, snapshot):
        fit = calibrate_cir(snapshot.credit_curve, snapshot.discount_curve, recovery=0.4)
        reported = {"a": 0.14, "b": 0.035, "sigma": 0.022}
        for name, want in reported.items():
            ratio = getattr(fit.params, name) / want
            assert 0.1 <= ratio <= 10.0, (name, ratio)
        assert fit.rms_error <= 2e-4

    def test_flat_curve_reduces_to_credit_triangle(self, snapshot):
        spread = 0.012
        curve = build_curve(
            "credit_spread", [(d, spread) for d in (91, 365, 730, 1825, 3650)]
        )
        fit = calibrate_cir(curve, snapshot.discount_curve, recovery=0.4)
        triangle = spread / 0.6
        assert fit.params.h0 == pytest.approx(triangle, rel=0.10)
        assert fit.params.b == pytest.approx(triangle, rel=0.15)
        assert fit.rms_error <= 1e-4

    def test_unfittable_curve_raises(self, snapshot):
        curve = build_curve(
            "credit_spread", [(91, 0.001), (365, 0.3), (730, 0.001), (1825, 0.3)]
        )
        with pytest.raises(CalibrationFailed):
            calibrate_cir(curve, snapshot.discount_curve, recovery=0.4)

    def test_needs_three_nodes(self, snapshot):
        curve = build_curve("credit_spread", [(91, 0.01), (365, 0.011)])
        with pytest.raises(InvalidParams):
            calibrate_cir(curve, snapshot.discount_curve)

    def test_invalid_bounds(self, snapshot):
        with pytest.raises(InvalidBounds):
            calibrate_cir(
                snapshot.credit_curve,
                snapshot.discount_curve,
                bounds={"a": (1.0, 0.5)},
            )

    def test_shifted_quality_repricing(self, snapshot):
        curve = shifted_credit_curve(snapshot.credit_curve, 200.0)
        fit = calibrate_cir(curve, snapshot.discount_curve, recovery=0.4)
        got = riskfree_breakeven_spread(
            fit.params, snapshot.discount_curve, 0.4, standard_schedule(5.0)
        )
        assert got == pytest.approx(0.0270, abs=2e-4)


class TestPathExport:
    def test_round_trip(self, tmp_path):
        ps = simulate_paths(TABLE2_A, GRID_5Y, 37, seed=9, stream=2)
        out = export_paths(ps, tmp_path / "paths.bin")
        grid, rates, seed, stream = read_exported_paths(out)
        assert np.array_equal(grid, ps.time_grid)
        assert np.array_equal(rates, ps.rates)
        assert seed == 9 and stream == 2

    def test_riskfree_pathset_is_zero(self):
        ps = riskfree_pathset(GRID_5Y, 10)
        assert np.all(ps.rates == 0.0)
        assert np.all(ps.survival_matrix() == 1.0)
