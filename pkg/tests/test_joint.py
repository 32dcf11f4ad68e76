import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_trivariate_cells, random_admissible_moments
from tricds.errors import (
    AdmissibilityError,
    DegenerateSeries,
    DimensionMismatch,
    OutOfRange,
)
from tricds.joint import (
    AXES,
    DependenceSpec,
    PeriodDependence,
    PeriodMarginals,
    admissibility_region,
    comvariance_from_comrelation,
    covariance_from_correlation,
    feasible_axis_bounds,
    feasible_axis_interval,
    nvariate_joint,
    sample_comrelation,
    third_abs_moment,
    trivariate_from_spec,
    trivariate_joint,
    trivariate_moment_vector,
)


class TestCovarianceFromCorrelation:
    def test_independence(self):
        assert covariance_from_correlation(0.3, 0.8, 0.0) == 0.0

    def test_symmetric_maximal(self):
        assert covariance_from_correlation(0.5, 0.5, 1.0) == pytest.approx(0.25, abs=1e-15)

    def test_hand_evaluated_scaling(self):
        # 0.5 * sqrt(0.9*0.1 * 0.8*0.2) = 0.5 * sqrt(0.0144) = 0.06
        assert covariance_from_correlation(0.9, 0.8, 0.5) == pytest.approx(0.06, abs=1e-15)

    def test_bounds_enforced(self):
        with pytest.raises(OutOfRange):
            covariance_from_correlation(1.2, 0.5, 0.1)
        with pytest.raises(OutOfRange):
            covariance_from_correlation(0.5, 0.5, 1.5)


class TestComvariance:
    def test_zero_comrelation(self):
        m = PeriodMarginals(0.3, 0.6, 0.9)
        assert comvariance_from_comrelation(m, 0.0) == 0.0

    def test_symmetric_half(self):
        # each third absolute moment is 0.5*0.5*(0.25+0.25) = 0.125
        m = PeriodMarginals(0.5, 0.5, 0.5)
        assert comvariance_from_comrelation(m, 1.0) == pytest.approx(0.125, abs=1e-15)
        assert comvariance_from_comrelation(m, 0.4) == pytest.approx(0.05, abs=1e-15)

    def test_third_abs_moment(self):
        assert third_abs_moment(0.5) == pytest.approx(0.125, abs=1e-16)
        q = 0.2
        assert third_abs_moment(0.8) == pytest.approx(0.8 * q * (0.64 + 0.04), abs=1e-16)

    @given(st.floats(min_value=-1.0, max_value=1.0))
    @settings(deadline=None)
    def test_linear_and_odd_in_zeta(self, zeta):
        m = PeriodMarginals(0.91, 0.76, 0.55)
        scale = comvariance_from_comrelation(m, 1.0)
        assert comvariance_from_comrelation(m, zeta) == pytest.approx(zeta * scale, abs=1e-15)
        assert comvariance_from_comrelation(m, -zeta) == pytest.approx(
            -comvariance_from_comrelation(m, zeta), abs=1e-18
        )


class TestTrivariateJoint:
    def test_independent_fair_coins(self):
        dist = trivariate_joint(PeriodMarginals(0.5, 0.5, 0.5), PeriodDependence(0, 0, 0, 0))
        assert np.allclose(dist.cells(), 0.125, atol=1e-15)

    def test_independence_reduces_to_product(self):
        m = PeriodMarginals(0.9, 0.8, 0.7)
        dist = trivariate_joint(m, PeriodDependence(0, 0, 0, 0))
        assert dist.p111 == pytest.approx(m.q_a * m.q_b * m.q_c, abs=1e-15)
        assert dist.p000 == pytest.approx(m.p_a * m.p_b * m.p_c, abs=1e-15)

    def test_against_moment_matching_oracle(self):
        m = PeriodMarginals(0.9, 0.8, 0.7)
        sigma_bc = covariance_from_correlation(0.8, 0.7, 0.5)
        assert sigma_bc == pytest.approx(0.5 * math.sqrt(0.16 * 0.21), abs=1e-15)
        dep = PeriodDependence(0.0, 0.0, sigma_bc, 0.0)
        dist = trivariate_joint(m, dep)
        want = oracle_trivariate_cells(m.q_a, m.q_b, m.q_c, 0.0, 0.0, sigma_bc, 0.0)
        assert np.allclose(dist.cells(), want, atol=1e-13)

    def test_oracle_equivalence_random(self, rng):
        cells, qa, qb, qc, sab, sac, sbc, th = random_admissible_moments(rng, 300)
        for i in range(300):
            m = PeriodMarginals(1 - qa[i], 1 - qb[i], 1 - qc[i])
            dep = PeriodDependence(sab[i], sac[i], sbc[i], th[i])
            dist = trivariate_joint(m, dep)
            assert np.allclose(dist.cells(), cells[i], atol=1e-12)
            # recovered moments round-trip
            assert np.allclose(dist.marginal_defaults(), (qa[i], qb[i], qc[i]), atol=1e-12)
            assert np.allclose(
                dist.pairwise_covariances(), (sab[i], sac[i], sbc[i]), atol=1e-12
            )
            assert dist.comvariance() == pytest.approx(th[i], abs=1e-12)

    def test_inadmissible_raises_with_cells(self):
        m = PeriodMarginals(0.99, 0.99, 0.99)
        with pytest.raises(AdmissibilityError) as err:
            trivariate_from_spec(m, DependenceSpec(rho_bc=-1.0))
        labels = [label for label, _ in err.value.violations]
        assert "p011" in labels

    def test_pair_marginalization(self):
        # summing over the reference entity leaves the bivariate (A, B) cells
        m = PeriodMarginals(0.85, 0.75, 0.65)
        sab = covariance_from_correlation(0.85, 0.75, 0.3)
        dist = trivariate_joint(m, PeriodDependence(sab, 0.0, 0.0, 0.0))
        p00, p10, p01, p11 = dist.marginalize_c()
        assert p00 == pytest.approx(m.p_a * m.p_b + sab, abs=1e-14)
        assert p10 == pytest.approx(m.q_a * m.p_b - sab, abs=1e-14)
        assert p01 == pytest.approx(m.p_a * m.q_b - sab, abs=1e-14)
        assert p11 == pytest.approx(m.q_a * m.q_b + sab, abs=1e-14)

    @given(st.integers(0, 2**32 - 1))
    @settings(deadline=None, max_examples=80)
    def test_cells_sum_to_one_and_marginalize(self, seed):
        rng = np.random.default_rng(seed)
        cells, qa, qb, qc, sab, sac, sbc, th = random_admissible_moments(rng, 1)
        m = PeriodMarginals(1 - qa[0], 1 - qb[0], 1 - qc[0])
        dist = trivariate_joint(m, PeriodDependence(sab[0], sac[0], sbc[0], th[0]))
        assert float(dist.cells().sum()) == pytest.approx(1.0, abs=1e-12)
        got_q = dist.marginal_defaults()
        assert got_q == pytest.approx((qa[0], qb[0], qc[0]), abs=1e-12)


class TestNvariateJoint:
    def test_single_variable_base_case(self):
        assert np.allclose(nvariate_joint([0.7], [1.0, 0.0]), [0.7, 0.3], atol=1e-15)

    def test_comonotone_coins(self):
        sigma = covariance_from_correlation(0.5, 0.5, 1.0)
        cells = nvariate_joint([0.5, 0.5], [1.0, 0.0, 0.0, sigma])
        assert np.allclose(cells, [0.5, 0.0, 0.0, 0.5], atol=1e-15)

    def test_matches_trivariate(self):
        m = PeriodMarginals(0.9, 0.8, 0.7)
        dep = PeriodDependence(0.01, 0.02, covariance_from_correlation(0.8, 0.7, 0.5), 0.004)
        tri = trivariate_joint(m, dep).cells()
        nv = nvariate_joint([m.p_a, m.p_b, m.p_c], trivariate_moment_vector(dep))
        assert np.max(np.abs(tri - nv)) <= 1e-14

    def test_matches_trivariate_on_1000_draws(self, rng):
        cells, qa, qb, qc, sab, sac, sbc, th = random_admissible_moments(rng, 1000)
        worst = 0.0
        for i in range(1000):
            m = PeriodMarginals(1 - qa[i], 1 - qb[i], 1 - qc[i])
            dep = PeriodDependence(sab[i], sac[i], sbc[i], th[i])
            tri = trivariate_joint(m, dep).cells()
            nv = nvariate_joint([m.p_a, m.p_b, m.p_c], trivariate_moment_vector(dep))
            worst = max(worst, float(np.max(np.abs(tri - nv))))
        assert worst <= 1e-13

    def test_four_variables_independent(self):
        p = [0.9, 0.8, 0.7, 0.6]
        sigma = np.zeros(16)
        sigma[0] = 1.0
        cells = nvariate_joint(p, sigma)
        assert cells.shape == (16,)
        assert float(cells.sum()) == pytest.approx(1.0, abs=1e-12)
        # cell (1,1,1,1) is the product of default probabilities
        assert cells[-1] == pytest.approx(0.1 * 0.2 * 0.3 * 0.4, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            nvariate_joint([0.5, 0.5], [1.0, 0.0, 0.0])

    def test_nonzero_first_moment_rejected(self):
        with pytest.raises(OutOfRange):
            nvariate_joint([0.5, 0.5], [1.0, 0.1, 0.0, 0.0])


class TestSampleComrelation:
    def test_odd_moment_cancellation(self):
        x = [-1.0, 1.0]
        assert sample_comrelation([x, x, x]) == 0.0

    def test_constant_series_degenerate(self):
        with pytest.raises(DegenerateSeries):
            sample_comrelation([[1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])

    def test_pairwise_reduces_to_correlation(self, rng):
        x = rng.normal(size=200)
        y = 0.4 * x + rng.normal(size=200)
        got = sample_comrelation([x, y])
        assert got == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)

    def test_equality_witnesses(self):
        x = [1.0, 1.0, 0.0, 0.0]
        y = [1.0, 0.0, 1.0, 0.0]
        z_xnor = [1.0, 0.0, 0.0, 1.0]
        z_xor = [0.0, 1.0, 1.0, 0.0]
        assert sample_comrelation([x, y, z_xnor]) == pytest.approx(1.0, abs=1e-12)
        assert sample_comrelation([x, y, z_xor]) == pytest.approx(-1.0, abs=1e-12)

    def test_two_sample_indicator_series(self):
        # identical two-sample indicator series cancel in the odd numerator,
        # and so does flipping one of them: the two centered products are
        # (+.5)(+.5)(-.5) and (-.5)(-.5)(+.5)
        assert sample_comrelation([[1.0, 0.0]] * 3) == pytest.approx(0.0, abs=1e-15)
        got = sample_comrelation([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        assert got == pytest.approx(0.0, abs=1e-15)
        assert abs(got) <= 1.0 + 1e-12

    @given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(2, 40))
    @settings(deadline=None, max_examples=120)
    def test_holder_bound_property(self, seed, k, n):
        rng = np.random.default_rng(seed)
        series = rng.normal(size=(k, n))
        if any(np.allclose(s, s[0]) for s in series):
            return
        zeta = sample_comrelation(series)
        assert abs(zeta) <= 1.0 + 1e-12


class TestAdmissibilityRegion:
    def test_independent_case_admissible(self):
        report = admissibility_region(PeriodMarginals(0.9, 0.8, 0.7), DependenceSpec())
        assert report.admissible
        assert report.violations == ()
        for axis in AXES:
            lo, hi = report.axis_bounds[axis]
            assert lo < 0.0 < hi

    def test_high_survival_negative_bc_inadmissible(self):
        m = PeriodMarginals(0.99, 0.99, 0.99)
        report = admissibility_region(m, DependenceSpec(rho_bc=-1.0))
        assert not report.admissible
        assert any(label == "p011" for label, _ in report.violations)
        lo, hi = report.axis_bounds["rho_bc"]
        # with equal rare marginals, full positive association stays feasible
        assert hi == pytest.approx(1.0, abs=1e-6)
        assert lo == pytest.approx(-0.01 / 0.99, abs=1e-4)

    def test_bisection_matches_exact_interval(self):
        m = PeriodMarginals(0.95, 0.9, 0.8)
        spec = DependenceSpec(rho_ab=0.1)
        report = admissibility_region(m, spec, tol=1e-7)
        for axis in AXES:
            lo, hi = feasible_axis_interval(m.p_a, m.p_b, m.p_c, spec, axis)
            blo, bhi = report.axis_bounds[axis]
            assert blo == pytest.approx(lo, abs=1e-6)
            assert bhi == pytest.approx(hi, abs=1e-6)

    def test_zeta_interval_against_grid_scan(self):
        m = PeriodMarginals(0.5, 0.5, 0.5)
        spec = DependenceSpec()
        lo, hi = feasible_axis_interval(m.p_a, m.p_b, m.p_c, spec, "zeta_abc")
        grid = np.linspace(-1, 1, 4001)
        feasible = []
        for z in grid:
            try:
                trivariate_from_spec(m, spec.replace(zeta_abc=float(z)))
                feasible.append(z)
            except AdmissibilityError:
                pass
        assert min(feasible) == pytest.approx(lo, abs=1e-3)
        assert max(feasible) == pytest.approx(hi, abs=1e-3)
        report = admissibility_region(m, spec)
        blo, bhi = report.axis_bounds["zeta_abc"]
        assert blo == pytest.approx(lo, abs=1e-6)
        assert bhi == pytest.approx(hi, abs=1e-6)

    def test_elementwise_bounds_intersection(self, rng):
        pa = rng.uniform(0.6, 0.999, size=64)
        pb = rng.uniform(0.6, 0.999, size=64)
        pc = rng.uniform(0.6, 0.999, size=64)
        spec = DependenceSpec()
        lo_arr, hi_arr = feasible_axis_bounds(pa, pb, pc, spec, "rho_bc")
        lo, hi = feasible_axis_interval(pa, pb, pc, spec, "rho_bc")
        assert lo == pytest.approx(float(lo_arr.max()), abs=0)
        assert hi == pytest.approx(float(hi_arr.min()), abs=0)
        # every element admits its own bound value
        for i in range(64):
            m = PeriodMarginals(pa[i], pb[i], pc[i])
            trivariate_from_spec(m, spec.replace(rho_bc=float(hi_arr[i])))
