"""CDS valuation under trilateral default risk.

The general pricer rolls the contract value backward over the payment grid.
Each period contributes risk-adjusted discount factors built from the joint
default distribution of buyer, seller and reference entity: one factor
discounts the premium payment (chosen between the two settlement variants by
the sign of the continuation value plus the current cash flow) and one
discounts the protection payment.  Continuation values at each date are
estimated by cross-path least-squares regression on the hazard levels.

The market-standard special case (default-free counterparties, deterministic
discounting) is a direct double summation over expected survival
probabilities, with a closed-form breakeven ratio.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np
from scipy import optimize

from .contracts import CDSContract, CollateralSpec, RecoverySpec, default_payments
from .errors import AdmissibilityError, GridMismatch, NoBracket, NoRoot, RegressionSingular
from .joint import DependenceSpec, PeriodDependence, PeriodMarginals, joint_cells
from .market import Curve, discount_factor

if TYPE_CHECKING:  # pragma: no cover - import only for annotations
    from .hazard import HazardPathSet


# --- per-period risk-adjusted factors ----------------------------------------


def _factor_terms(pa, pb, pc, sab, sac, sbc, th, rec: RecoverySpec):
    """The three bracketed sums of the period-factor formulas (before D)."""
    qa, qb, qc = 1.0 - pa, 1.0 - pb, 1.0 - pc
    fa, fb = rec.phi_a, rec.phi_b
    fba, fbb = rec.phi_bar_a, rec.phi_bar_b
    fab = rec.phi_ab

    phi_a = (
        pa * pb * pc
        + qa * pb * pc * fa
        + pa * qb * pc * fba
        + qa * qb * pc * fab
        + pc * sab * (1.0 - fa - fba + fab)
        + sac * (pb * (1.0 - fa) + qb * (fba - fab))
        + sbc * (pa * (1.0 - fba) + qa * (fa - fab))
        + th * (-1.0 + fba - fab + fa)
    )
    phi_b = (
        pa * pb * pc
        + qa * pb * pc * fbb
        + pa * qb * pc * fb
        + qa * qb * pc * fab
        + pc * sab * (1.0 - fb - fbb + fab)
        + sac * (pb * (1.0 - fbb) + qb * (fb - fab))
        + sbc * (pa * (1.0 - fb) + qa * (fbb - fab))
        + th * (-1.0 + fbb - fab + fb)
    )
    omega = (
        pa * pb * qc
        + qa * pb * qc * fbb
        + pa * qb * qc * fb
        + qa * qb * qc * fab
        + qc * sab * (1.0 - fb - fbb + fab)
        - sac * (pb * (1.0 - fbb) + qb * (fb - fab))
        - sbc * (pa * (1.0 - fb) + qa * (fbb - fab))
        + th * (1.0 - fbb + fab - fb)
    )
    return phi_a, phi_b, omega


@dataclass(frozen=True)
class RiskyPeriodFactors:
    """Risk-adjusted discount factors for one period.

    ``phi_a_factor`` applies to the premium when the continuation value is
    against the buyer, ``phi_b_factor`` when it favors the buyer; ``omega``
    discounts the protection payment.  All include the risk-free factor
    ``discount``.
    """

    phi_a_factor: float
    phi_b_factor: float
    omega: float
    discount: float

    def o_factor(self, continuation_nonnegative: bool) -> float:
        return self.phi_b_factor if continuation_nonnegative else self.phi_a_factor


def period_factors(
    marginals: PeriodMarginals,
    dependence: PeriodDependence,
    recoveries: RecoverySpec,
    discount: float,
) -> RiskyPeriodFactors:
    """Evaluate the period-factor formulas for one period.

    The inputs must describe an admissible joint distribution; the implied
    cell probabilities are checked and an AdmissibilityError is raised
    otherwise (the factors are expectations over those cells).
    """
    cells = joint_cells(
        marginals.p_a, marginals.p_b, marginals.p_c,
        dependence.sigma_ab, dependence.sigma_ac, dependence.sigma_bc, dependence.theta_abc,
    )
    from .joint import CELL_LABELS, CELL_ATOL

    bad = [
        (CELL_LABELS[i], float(c))
        for i, c in enumerate(cells)
        if c < -CELL_ATOL or c > 1.0 + CELL_ATOL
    ]
    if bad:
        raise AdmissibilityError(f"inadmissible period distribution: {bad}", violations=bad)
    phi_a, phi_b, omega = _factor_terms(
        marginals.p_a, marginals.p_b, marginals.p_c,
        dependence.sigma_ab, dependence.sigma_ac, dependence.sigma_bc, dependence.theta_abc,
        recoveries,
    )
    return RiskyPeriodFactors(
        phi_a_factor=float(phi_a) * discount,
        phi_b_factor=float(phi_b) * discount,
        omega=float(omega) * discount,
        discount=discount,
    )


# --- continuation regression --------------------------------------------------


def _basis_matrix(state: np.ndarray, degree: int) -> np.ndarray:
    """Monomials of the state columns up to the given total degree."""
    n, k = state.shape
    cols = [np.ones(n)]
    for d in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(k), d):
            col = np.ones(n)
            for idx in combo:
                col = col * state[:, idx]
            cols.append(col)
    return np.column_stack(cols)


def regression_continuation(
    state_matrix: np.ndarray,
    realized_values: np.ndarray,
    degree: int = 2,
) -> tuple[np.ndarray, float]:
    """Least-squares fit of realized values on state monomials.

    Returns the per-path fitted values and the R^2 of the fit (defined as 1
    when the realized values are constant).  Raises RegressionSingular when
    there are fewer paths than basis functions.  Degenerate state columns
    (for instance a default-free party's identically-zero hazard) are
    harmless: they standardize to zero and the pseudo-inverse solve ignores
    them.
    """
    state = np.atleast_2d(np.asarray(state_matrix, dtype=float))
    if state.shape[0] == 1 and np.asarray(realized_values).size != 1:
        state = state.T
    y = np.asarray(realized_values, dtype=float)
    basis = _basis_matrix(state, degree)
    n, k = basis.shape
    if n < k:
        raise RegressionSingular(f"{n} paths cannot support {k} basis functions")
    # standardize the non-constant columns for conditioning
    mean = basis.mean(axis=0)
    std = basis.std(axis=0)
    std[0] = 1.0
    mean[0] = 0.0
    safe = np.where(std > 0, std, 1.0)
    b = (basis - mean) / safe
    b[:, std == 0.0] = 0.0
    b[:, 0] = 1.0
    gram = b.T @ b
    rhs = b.T @ y
    coef, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    fitted = b @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return fitted, 1.0
    ss_res = float(np.sum((y - fitted) ** 2))
    return fitted, 1.0 - ss_res / ss_tot


# --- results -------------------------------------------------------------------


@dataclass(frozen=True)
class ValuationResult:
    """Priced outputs: value, sampling error and optional decompositions."""

    value: float
    std_error: float
    breakeven_spread: float | None = None
    v_f: float | None = None
    psi_ab: float | None = None
    xi_abc: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")
        if self.v_f is not None:
            assembled = self.v_f + self.xi_abc / self.psi_ab
            if assembled != self.value:
                raise ValueError("collateral decomposition does not assemble to the value")

    @property
    def residual_exposure(self) -> float | None:
        """The exposure left over under full collateralization."""
        if self.v_f is None:
            return None
        return self.xi_abc / self.psi_ab


# --- market-standard (counterparty-risk-free) pricing ---------------------------


def riskfree_breakeven(survival, discounts, accruals, phi_c: float) -> float:
    """Closed-form breakeven of the market-standard summation.

    ``survival`` holds the expected cumulative survival of the reference
    entity at each payment date, ``discounts`` the bond prices P(0, T_i) and
    ``accruals`` the period year fractions.  The default payment inside each
    period is notional times (1 - phi_c) less half a period's accrued
    premium.
    """
    p = np.asarray(survival, dtype=float)
    disc = np.asarray(discounts, dtype=float)
    acc = np.asarray(accruals, dtype=float)
    p_prev = np.concatenate([[1.0], p[:-1]])
    dp = p_prev - p
    numerator = float(np.sum(disc * dp)) * (1.0 - phi_c)
    denominator = float(np.sum(disc * (p * acc + 0.5 * dp * acc)))
    if denominator <= 0.0:
        raise NoRoot("degenerate schedule: premium annuity is not positive")
    return numerator / denominator


def price_riskfree(
    contract: CDSContract,
    survival: Sequence[float] | np.ndarray,
    discount_curve: Curve,
    recoveries: RecoverySpec | float,
    spread: float | None = None,
) -> ValuationResult:
    """Value a CDS with default-free counterparties by direct summation.

    ``survival`` is the expected cumulative survival of the reference entity
    at each payment date (length m).  No simulation is involved; the
    standard error is zero.
    """
    p = np.asarray(survival, dtype=float)
    if p.shape != (contract.n_periods,):
        raise GridMismatch(
            f"survival needs one value per payment date ({contract.n_periods}), got {p.shape}"
        )
    phi_c = recoveries.phi_c if isinstance(recoveries, RecoverySpec) else float(recoveries)
    s = contract.spread if spread is None else spread
    times = np.asarray(contract.payment_times)
    acc = np.asarray(contract.accruals)
    disc = np.array([discount_factor(discount_curve, 0.0, t) for t in times])
    p_prev = np.concatenate([[1.0], p[:-1]])
    dp = p_prev - p
    protection = contract.notional * np.sum(disc * dp * (1.0 - phi_c - 0.5 * s * acc))
    premium = contract.notional * s * np.sum(disc * p * acc)
    value = float(protection - premium)
    be = riskfree_breakeven(p, disc, acc, phi_c)
    return ValuationResult(value=value, std_error=0.0, breakeven_spread=be,
                           diagnostics={"method": "direct-summation"})


# --- trilateral Monte Carlo engine -----------------------------------------------


class TrilateralPricer:
    """Backward-induction pricer over three simulated hazard path sets.

    Building the pricer precomputes everything that does not depend on the
    premium: per-period survival marginals, the dependence moments, the
    period factors and the discount factors.  Valuing at a spread then only
    reruns the (cheap) induction, so breakeven solving and scenario deltas
    reuse identical paths (common random numbers) by construction.
    """

    def __init__(
        self,
        contract: CDSContract,
        paths_a: "HazardPathSet",
        paths_b: "HazardPathSet",
        paths_c: "HazardPathSet",
        dependence: DependenceSpec,
        recoveries: RecoverySpec,
        discount_curve: Curve,
        regression_degree: int = 2,
        check_admissibility: bool = True,
    ):
        self.contract = contract
        self.recoveries = recoveries
        self.dependence = dependence
        self.regression_degree = regression_degree
        grid = contract.grid()
        for label, ps in (("A", paths_a), ("B", paths_b), ("C", paths_c)):
            if ps.time_grid.shape != grid.shape or not np.allclose(ps.time_grid, grid, atol=1e-12):
                raise GridMismatch(f"path set {label} grid does not match the contract schedule")
        n = paths_a.n_paths
        if paths_b.n_paths != n or paths_c.n_paths != n:
            raise GridMismatch("all path sets must hold the same number of paths")
        self.n_paths = n
        self.m = contract.n_periods

        self.pa = paths_a.survival_matrix()
        self.pb = paths_b.survival_matrix()
        self.pc = paths_c.survival_matrix()
        # hazard levels at the regression dates T_1 .. T_{m-1}
        self._states = (paths_a.rates, paths_b.rates, paths_c.rates)
        self.discounts = np.array(
            [discount_factor(discount_curve, grid[j], grid[j + 1]) for j in range(self.m)]
        )
        self._check = check_admissibility
        self._factors = None
        self._seed = (paths_a.seed, paths_b.seed, paths_c.seed)

    # -- construction helpers --

    def _period_moments(self, j: int):
        """Per-path survival marginals and dependence moments of period j."""
        spec = self.dependence
        pa, pb, pc = self.pa[:, j], self.pb[:, j], self.pc[:, j]
        qa, qb, qc = 1.0 - pa, 1.0 - pb, 1.0 - pc
        sab = spec.rho_ab * np.sqrt(pa * qa * pb * qb)
        sac = spec.rho_ac * np.sqrt(pa * qa * pc * qc)
        sbc = spec.rho_bc * np.sqrt(pb * qb * pc * qc)
        th = spec.zeta_abc * np.cbrt(
            (pa * qa * (pa**2 + qa**2))
            * (pb * qb * (pb**2 + qb**2))
            * (pc * qc * (pc**2 + qc**2))
        )
        return pa, pb, pc, sab, sac, sbc, th

    def _check_period(self, j: int, moments) -> None:
        pa, pb, pc, sab, sac, sbc, th = moments
        cells = joint_cells(pa, pb, pc, sab, sac, sbc, th)
        worst = float(cells.min())
        if worst < -1e-12 or float(cells.max()) > 1.0 + 1e-12:
            bad = np.any((cells < -1e-12) | (cells > 1.0 + 1e-12), axis=0)
            raise AdmissibilityError(
                f"period {j}: dependence {self.dependence} inadmissible on "
                f"{int(bad.sum())} of {self.n_paths} paths (worst cell {worst:.3e})"
            )

    def _ensure_factors(self):
        """Build the per-period factor arrays on first use.

        The full-collateralization route never consumes them (it needs only
        the reference survival and the first period's moments), so they are
        not built until an uncollateralized valuation asks for them.
        """
        if self._factors is None:
            n, m = self.n_paths, self.m
            phi_a_f = np.empty((n, m))
            phi_b_f = np.empty((n, m))
            omega = np.empty((n, m))
            for j in range(m):
                moments = self._period_moments(j)
                if self._check:
                    self._check_period(j, moments)
                fa, fb, om = _factor_terms(*moments, self.recoveries)
                d = self.discounts[j]
                phi_a_f[:, j] = fa * d
                phi_b_f[:, j] = fb * d
                omega[:, j] = om * d
            self._factors = (phi_a_f, phi_b_f, omega)
        return self._factors

    def _regression_states(self, node: int) -> np.ndarray:
        return np.column_stack([s[:, node] for s in self._states])

    # -- valuation --

    def _induct(self, spread: float):
        """Backward induction; returns per-path values and diagnostics."""
        phi_a_f, phi_b_f, omega = self._ensure_factors()
        contract = self.contract
        x = contract.premium_cashflows(spread)
        r = default_payments(contract, self.recoveries, spread)
        n, m = self.n_paths, self.m
        y = np.zeros(n)
        indicators = np.empty((n, m), dtype=bool)
        r2 = [math.nan] * m
        degree_used = [0] * m
        for j in range(m - 1, -1, -1):
            if j + 1 == m:
                v_hat = np.zeros(n)
            else:
                state = self._regression_states(j + 1)
                degree = self.regression_degree
                while True:
                    try:
                        v_hat, r2_j = regression_continuation(state, y, degree)
                        break
                    except RegressionSingular:
                        if degree == 0:
                            raise
                        degree -= 1
                r2[j + 1] = r2_j
                degree_used[j + 1] = degree
            nonneg = v_hat + x[j] >= 0.0
            indicators[:, j] = nonneg
            o = np.where(nonneg, phi_b_f[:, j], phi_a_f[:, j])
            y = o * (x[j] + y) + omega[:, j] * r[j]
        return y, indicators, r2, degree_used

    def path_values(self, spread: float | None = None) -> np.ndarray:
        """Per-path present values; the valuation is their mean.

        Scenario deltas estimated on these arrays benefit fully from common
        random numbers because two pricers built on the same path sets hold
        identical draws path by path.
        """
        s = self.contract.spread if spread is None else spread
        y, *_ = self._induct(s)
        return y

    def value(self, spread: float | None = None) -> ValuationResult:
        """Price at the contract spread (or an override) on the stored paths."""
        s = self.contract.spread if spread is None else spread
        y, indicators, r2, degree_used = self._induct(s)
        value = float(y.mean())
        se = float(y.std(ddof=1) / math.sqrt(self.n_paths)) if self.n_paths > 1 else 0.0
        return ValuationResult(
            value=value,
            std_error=se,
            diagnostics={
                "n_paths": self.n_paths,
                "seed": self._seed,
                "spread": s,
                "r_squared": r2,
                "regression_degree": degree_used,
                "fallbacks": sum(
                    1 for d in degree_used[1:] if d not in (0, self.regression_degree)
                ),
            },
        )

    def leg_values(self, spread: float | None = None) -> dict:
        """Per-period expected premium and protection contributions.

        Uses the sign decisions of a backward pass at the same spread; the
        two legs sum to the backward-induction value up to float rounding.
        """
        s = self.contract.spread if spread is None else spread
        _, indicators, _, _ = self._induct(s)
        phi_a_f, phi_b_f, omega = self._ensure_factors()
        x = self.contract.premium_cashflows(s)
        r = default_payments(self.contract, self.recoveries, s)
        cum = np.ones(self.n_paths)
        premium = np.empty(self.m)
        protection = np.empty(self.m)
        for j in range(self.m):
            protection[j] = float((cum * omega[:, j]).mean()) * r[j]
            o = np.where(indicators[:, j], phi_b_f[:, j], phi_a_f[:, j])
            cum = cum * o
            premium[j] = float(cum.mean()) * x[j]
        return {
            "payment_times": np.asarray(self.contract.payment_times),
            "premium_leg": premium,
            "protection_leg": protection,
            "total": float(premium.sum() + protection.sum()),
        }

    def breakeven(self, tol_scale: float = 1e-8) -> float:
        """Spread with zero inception value, solved on common random numbers."""
        return breakeven_spread(
            lambda s: self.value(spread=s).value,
            notional=self.contract.notional,
            tol_scale=tol_scale,
        )

    # -- full collateralization --

    def collateralized(self, spread: float | None = None) -> ValuationResult:
        """Value under full collateralization: V = V^F + xi / psi.

        V^F is the counterparty-risk-free value on the same paths (reference
        survival only); the residual term prices the first-period covariance
        between the counterparties' defaults and the contract payoff, and
        vanishes under independence.
        """
        s = self.contract.spread if spread is None else spread
        moments0 = self._period_moments(0)
        if self._check:
            # only the first period's joint distribution is consumed here
            self._check_period(0, moments0)
        x = self.contract.premium_cashflows(s)
        r = default_payments(self.contract, self.recoveries, s)
        n, m = self.n_paths, self.m
        y = np.zeros(n)
        y_at_1 = np.zeros(n)
        for j in range(m - 1, -1, -1):
            d = self.discounts[j]
            y = d * self.pc[:, j] * (x[j] + y) + d * (1.0 - self.pc[:, j]) * r[j]
            if j == 1:
                y_at_1 = y.copy()
        v_f = float(y.mean())
        se_vf = float(y.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0

        pa0, pb0, pc0, sab0, sac0, sbc0, th0 = moments0
        psi_paths = pa0 * pb0 + sab0
        psi = float(psi_paths.mean())
        value_at_u = x[0] + y_at_1
        xi_paths = self.discounts[0] * (pb0 * sac0 + pa0 * sbc0 - th0) * (value_at_u - r[0])
        xi = float(xi_paths.mean())
        se_xi = float(xi_paths.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0

        combined = y + xi_paths / psi
        se = float(combined.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return ValuationResult(
            value=v_f + xi / psi,
            std_error=se,
            v_f=v_f,
            psi_ab=psi,
            xi_abc=xi,
            diagnostics={
                "n_paths": n,
                "seed": self._seed,
                "spread": s,
                "se_v_f": se_vf,
                "se_xi": se_xi,
                "se_residual": se_xi / psi,
            },
        )


def price_trilateral(
    contract: CDSContract,
    paths_a: "HazardPathSet",
    paths_b: "HazardPathSet",
    paths_c: "HazardPathSet",
    dependence: DependenceSpec,
    recoveries: RecoverySpec,
    discount_curve: Curve,
    regression_degree: int = 2,
    with_breakeven: bool = False,
) -> ValuationResult:
    """Value a CDS under trilateral default risk on simulated hazard paths."""
    pricer = TrilateralPricer(
        contract, paths_a, paths_b, paths_c, dependence, recoveries, discount_curve,
        regression_degree=regression_degree,
    )
    result = pricer.value()
    if with_breakeven:
        be = pricer.breakeven()
        result = ValuationResult(
            value=result.value,
            std_error=result.std_error,
            breakeven_spread=be,
            diagnostics=result.diagnostics,
        )
    return result


def price_collateralized(
    contract: CDSContract,
    paths_a: "HazardPathSet",
    paths_b: "HazardPathSet",
    paths_c: "HazardPathSet",
    dependence: DependenceSpec,
    recoveries: RecoverySpec,
    discount_curve: Curve,
    collateral: CollateralSpec | None = None,
    regression_degree: int = 2,
) -> ValuationResult:
    """Value a fully collateralized CDS; only threshold 0 is priced."""
    collateral = collateral or CollateralSpec(0.0)
    if collateral.threshold != 0.0:
        raise NoRoot(
            f"only full collateralization (threshold 0) is priced, got {collateral.threshold}"
        )
    pricer = TrilateralPricer(
        contract, paths_a, paths_b, paths_c, dependence, recoveries, discount_curve,
        regression_degree=regression_degree,
    )
    return pricer.collateralized()


# --- breakeven solving ------------------------------------------------------------


def breakeven_spread(
    value_fn: Callable[[float], float],
    notional: float = 1.0,
    tol_scale: float = 1e-8,
    s_probe: float = 0.05,
    s_max: float = 5.0,
) -> float:
    """Root of V(s) = 0 in the premium.

    The value is affine in the spread between sign flips of the settlement
    indicator, so the two-point secant root is tried first and accepted when
    |V| <= notional * tol_scale; otherwise the root is polished by Brent on
    an expanding bracket.  The caller's value function is expected to reuse
    common random numbers across evaluations.
    """
    tol = abs(notional) * tol_scale
    v0 = value_fn(0.0)
    if abs(v0) <= tol:
        return 0.0
    v1 = value_fn(s_probe)
    if v1 == v0:
        raise NoBracket("value does not respond to the spread")
    s_lin = s_probe * v0 / (v0 - v1)
    if s_lin >= 0 and abs(value_fn(s_lin)) <= tol:
        return float(s_lin)
    # bracket: V(0) > 0 for any contract with protection value; expand upward
    lo, hi = 0.0, max(s_probe, min(abs(s_lin) * 2.0, s_max))
    v_lo, v_hi = v0, value_fn(hi)
    tries = 0
    while v_lo * v_hi > 0:
        hi *= 2.0
        tries += 1
        if hi > s_max or tries > 60:
            raise NoBracket(f"no sign change in V(s) on [0, {hi}]")
        v_hi = value_fn(hi)
    root = optimize.brentq(value_fn, lo, hi, xtol=1e-12, rtol=8.9e-16, maxiter=200)
    return float(root)
