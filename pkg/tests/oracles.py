"""Independent oracles the tests check the library against.

Everything here deliberately avoids the library's own formula paths: the
joint distribution is recovered by solving the full 8x8 moment system, the
period factors by state-by-state expectation of the settlement payoffs, and
the market-standard value by a plain per-period loop.
"""

import numpy as np

STATES = [(a, b, c) for c in (0, 1) for b in (0, 1) for a in (0, 1)]


def oracle_trivariate_cells(qa, qb, qc, sab, sac, sbc, theta):
    """Joint pmf from its moments via a linear solve over all 8 outcomes."""
    a_mat = np.zeros((8, 8))
    rhs = np.zeros(8)
    for a, b, c in STATES:
        j = a + 2 * b + 4 * c
        a_mat[0, j] = 1.0
        a_mat[1, j] = a
        a_mat[2, j] = b
        a_mat[3, j] = c
        a_mat[4, j] = a * b
        a_mat[5, j] = a * c
        a_mat[6, j] = b * c
        a_mat[7, j] = a * b * c
    rhs[0] = 1.0
    rhs[1], rhs[2], rhs[3] = qa, qb, qc
    rhs[4] = sab + qa * qb
    rhs[5] = sac + qa * qc
    rhs[6] = sbc + qb * qc
    rhs[7] = theta + qa * qb * qc + qc * sab + qb * sac + qa * sbc
    return np.linalg.solve(a_mat, rhs)


def random_admissible_moments(rng, n):
    """Draw joint pmfs and return their implied (marginals, moments).

    Sampling the cells directly (Dirichlet) guarantees admissibility; the
    implied correlations/comrelation then lie inside their bounds by the
    moment inequalities.
    """
    cells = rng.dirichlet(np.ones(8), size=n)
    qa = cells[:, [1, 3, 5, 7]].sum(axis=1)
    qb = cells[:, [2, 3, 6, 7]].sum(axis=1)
    qc = cells[:, [4, 5, 6, 7]].sum(axis=1)
    sab = cells[:, [3, 7]].sum(axis=1) - qa * qb
    sac = cells[:, [5, 7]].sum(axis=1) - qa * qc
    sbc = cells[:, [6, 7]].sum(axis=1) - qb * qc
    theta = cells[:, 7] - qa * qb * qc - qc * sab - qb * sac - qa * sbc
    return cells, qa, qb, qc, sab, sac, sbc, theta


def oracle_period_factors(cells, rec, discount=1.0):
    """Expected settlement coefficients over the 8 states (Table-style).

    ``cells`` is (..., 8) in index order a + 2b + 4c.  Returns the premium
    factor for each settlement branch and the protection factor.
    """
    cells = np.asarray(cells)
    coef_b = np.array([1.0, rec.phi_bar_b, rec.phi_b, rec.phi_ab])
    coef_a = np.array([1.0, rec.phi_a, rec.phi_bar_a, rec.phi_ab])
    phi_b = cells[..., :4] @ coef_b * discount
    phi_a = cells[..., :4] @ coef_a * discount
    omega = cells[..., 4:] @ coef_b * discount
    return phi_a, phi_b, omega


def eq11_direct(payment_times, accruals, survival, discounts, spread, notional, phi_c):
    """Market-standard CDS value by an explicit per-period loop."""
    value = 0.0
    p_prev = 1.0
    for i in range(len(payment_times)):
        accrued = 0.5 * spread * notional * accruals[i]
        r = notional * (1.0 - phi_c) - accrued
        dp = p_prev - survival[i]
        value += discounts[i] * dp * r
        value -= discounts[i] * survival[i] * spread * notional * accruals[i]
        p_prev = survival[i]
    return value


def eq11_breakeven_bisect(payment_times, accruals, survival, discounts, notional, phi_c,
                          lo=0.0, hi=1.0, tol=1e-14):
    """Breakeven of the direct summation by plain bisection."""
    f = lambda s: eq11_direct(payment_times, accruals, survival, discounts, s, notional, phi_c)
    f_lo, f_hi = f(lo), f(hi)
    assert f_lo >= 0 >= f_hi, "bisection bracket invalid"
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
