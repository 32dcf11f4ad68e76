"""Joint default distributions of Bernoulli indicators.

Builds the eight joint probabilities of three default indicators from
marginals, pairwise covariances and the third-order comvariance, exposes the
n-variate generalization through a Kronecker-product generating function,
and provides the sample comrelation estimator.  Indicators take value 1 on
default, so a survival probability ``p`` pairs with default probability
``q = 1 - p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AdmissibilityError, DegenerateSeries, DimensionMismatch, OutOfRange

CELL_LABELS = ("p000", "p100", "p010", "p110", "p001", "p101", "p011", "p111")

#: numerical slack when testing cells against [0, 1]
CELL_ATOL = 1e-12

AXES = ("rho_ab", "rho_ac", "rho_bc", "zeta_abc")


def _check_prob(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise OutOfRange(f"{name} must lie in [0, 1], got {value}")
    return float(value)


def _check_unit(name: str, value: float) -> float:
    if not -1.0 <= value <= 1.0:
        raise OutOfRange(f"{name} must lie in [-1, 1], got {value}")
    return float(value)


@dataclass(frozen=True)
class PeriodMarginals:
    """Survival probabilities of the three parties over one period."""

    p_a: float
    p_b: float
    p_c: float

    def __post_init__(self):
        _check_prob("p_a", self.p_a)
        _check_prob("p_b", self.p_b)
        _check_prob("p_c", self.p_c)

    @property
    def q_a(self) -> float:
        return 1.0 - self.p_a

    @property
    def q_b(self) -> float:
        return 1.0 - self.p_b

    @property
    def q_c(self) -> float:
        return 1.0 - self.p_c

    def survivals(self) -> tuple[float, float, float]:
        return (self.p_a, self.p_b, self.p_c)


@dataclass(frozen=True)
class DependenceSpec:
    """Pairwise correlations and three-way comrelation of the indicators.

    These are dimensionless and period-independent; per-period covariances
    and comvariance are rebuilt from each period's marginals.
    """

    rho_ab: float = 0.0
    rho_ac: float = 0.0
    rho_bc: float = 0.0
    zeta_abc: float = 0.0

    def __post_init__(self):
        for name in AXES:
            _check_unit(name, getattr(self, name))

    def replace(self, **kwargs) -> "DependenceSpec":
        fields = {name: getattr(self, name) for name in AXES}
        fields.update(kwargs)
        return DependenceSpec(**fields)

    @staticmethod
    def independent() -> "DependenceSpec":
        return DependenceSpec(0.0, 0.0, 0.0, 0.0)


def covariance_from_correlation(p_i: float, p_j: float, rho_ij: float) -> float:
    """Covariance of two default indicators with Pearson correlation ``rho_ij``."""
    _check_prob("p_i", p_i)
    _check_prob("p_j", p_j)
    _check_unit("rho_ij", rho_ij)
    q_i, q_j = 1.0 - p_i, 1.0 - p_j
    return rho_ij * math.sqrt(p_i * q_i * p_j * q_j)


def third_abs_moment(p: float) -> float:
    """E|Y - q|^3 of a Bernoulli default indicator with survival ``p``."""
    q = 1.0 - p
    return p * q * (p * p + q * q)


def comvariance_from_comrelation(marginals: PeriodMarginals, zeta: float) -> float:
    """Comvariance implied by a comrelation via the third absolute moments."""
    _check_unit("zeta", zeta)
    prod = (
        third_abs_moment(marginals.p_a)
        * third_abs_moment(marginals.p_b)
        * third_abs_moment(marginals.p_c)
    )
    return zeta * float(np.cbrt(prod))


@dataclass(frozen=True)
class PeriodDependence:
    """Covariances and comvariance of the indicators over one period."""

    sigma_ab: float
    sigma_ac: float
    sigma_bc: float
    theta_abc: float

    @staticmethod
    def from_spec(marginals: PeriodMarginals, spec: DependenceSpec) -> "PeriodDependence":
        return PeriodDependence(
            sigma_ab=covariance_from_correlation(marginals.p_a, marginals.p_b, spec.rho_ab),
            sigma_ac=covariance_from_correlation(marginals.p_a, marginals.p_c, spec.rho_ac),
            sigma_bc=covariance_from_correlation(marginals.p_b, marginals.p_c, spec.rho_bc),
            theta_abc=comvariance_from_comrelation(marginals, spec.zeta_abc),
        )

    def validate_against(self, marginals: PeriodMarginals, atol: float = 1e-12) -> None:
        """Check the covariances and comvariance against their moment bounds."""
        pa, pb, pc = marginals.survivals()
        qa, qb, qc = marginals.q_a, marginals.q_b, marginals.q_c
        bounds = {
            "sigma_ab": math.sqrt(pa * qa * pb * qb),
            "sigma_ac": math.sqrt(pa * qa * pc * qc),
            "sigma_bc": math.sqrt(pb * qb * pc * qc),
            "theta_abc": float(
                np.cbrt(third_abs_moment(pa) * third_abs_moment(pb) * third_abs_moment(pc))
            ),
        }
        for name, bound in bounds.items():
            value = getattr(self, name)
            if abs(value) > bound + atol:
                raise OutOfRange(f"|{name}|={abs(value)} exceeds moment bound {bound}")


def joint_cells(pa, pb, pc, sigma_ab, sigma_ac, sigma_bc, theta):
    """The eight joint probabilities, vectorized over array inputs.

    Returns an array of shape ``(8,) + broadcast_shape`` ordered as
    ``CELL_LABELS`` (index ``a + 2b + 4c`` for indicator values a, b, c).
    """
    pa, pb, pc = np.asarray(pa, float), np.asarray(pb, float), np.asarray(pc, float)
    qa, qb, qc = 1.0 - pa, 1.0 - pb, 1.0 - pc
    sab = np.asarray(sigma_ab, float)
    sac = np.asarray(sigma_ac, float)
    sbc = np.asarray(sigma_bc, float)
    th = np.asarray(theta, float)
    return np.stack(
        [
            pa * pb * pc + pc * sab + pb * sac + pa * sbc - th,
            qa * pb * pc - pc * sab - pb * sac + qa * sbc + th,
            pa * qb * pc - pc * sab + qb * sac - pa * sbc + th,
            qa * qb * pc + pc * sab - qb * sac - qa * sbc - th,
            pa * pb * qc + qc * sab - pb * sac - pa * sbc + th,
            qa * pb * qc - qc * sab + pb * sac - qa * sbc - th,
            pa * qb * qc - qc * sab - qb * sac + pa * sbc - th,
            qa * qb * qc + qc * sab + qb * sac + qa * sbc + th,
        ]
    )


@dataclass(frozen=True)
class TrivariateDistribution:
    """The eight joint probabilities indexed by (Y_A, Y_B, Y_C)."""

    p000: float
    p100: float
    p010: float
    p110: float
    p001: float
    p101: float
    p011: float
    p111: float

    def __post_init__(self):
        cells = self.cells()
        bad = [
            (CELL_LABELS[i], float(c))
            for i, c in enumerate(cells)
            if c < -CELL_ATOL or c > 1.0 + CELL_ATOL
        ]
        if bad:
            raise AdmissibilityError(f"joint probabilities outside [0, 1]: {bad}", violations=bad)
        total = float(cells.sum())
        if abs(total - 1.0) > 1e-12:
            raise AdmissibilityError(f"joint probabilities sum to {total}, not 1")

    def cells(self) -> np.ndarray:
        return np.array(
            [self.p000, self.p100, self.p010, self.p110, self.p001, self.p101, self.p011, self.p111]
        )

    def marginal_defaults(self) -> tuple[float, float, float]:
        """(q_A, q_B, q_C) recovered by summing cells with the indicator set."""
        c = self.cells()
        return (
            float(c[[1, 3, 5, 7]].sum()),
            float(c[[2, 3, 6, 7]].sum()),
            float(c[[4, 5, 6, 7]].sum()),
        )

    def pairwise_covariances(self) -> tuple[float, float, float]:
        """(sigma_AB, sigma_AC, sigma_BC) recovered from the cells."""
        c = self.cells()
        qa, qb, qc = self.marginal_defaults()
        e_ab = float(c[[3, 7]].sum())
        e_ac = float(c[[5, 7]].sum())
        e_bc = float(c[[6, 7]].sum())
        return (e_ab - qa * qb, e_ac - qa * qc, e_bc - qb * qc)

    def comvariance(self) -> float:
        c = self.cells()
        qa, qb, qc = self.marginal_defaults()
        sab, sac, sbc = self.pairwise_covariances()
        return float(c[7] - qa * qb * qc - qc * sab - qb * sac - qa * sbc)

    def marginalize_c(self) -> tuple[float, float, float, float]:
        """Bivariate (A, B) cells: (p00, p10, p01, p11) after summing over C."""
        c = self.cells()
        return (
            float(c[0] + c[4]),
            float(c[1] + c[5]),
            float(c[2] + c[6]),
            float(c[3] + c[7]),
        )


def trivariate_joint(
    marginals: PeriodMarginals, dependence: PeriodDependence
) -> TrivariateDistribution:
    """Evaluate the eight joint-probability formulas for one period.

    Raises AdmissibilityError when the requested moments push any cell
    outside [0, 1]; the error lists the violating cells.
    """
    cells = joint_cells(
        marginals.p_a,
        marginals.p_b,
        marginals.p_c,
        dependence.sigma_ab,
        dependence.sigma_ac,
        dependence.sigma_bc,
        dependence.theta_abc,
    )
    return TrivariateDistribution(*[float(c) for c in cells])


def trivariate_from_spec(marginals: PeriodMarginals, spec: DependenceSpec) -> TrivariateDistribution:
    return trivariate_joint(marginals, PeriodDependence.from_spec(marginals, spec))


def nvariate_joint(marginals: Sequence[float], sigma_n: Sequence[float]) -> np.ndarray:
    """Joint distribution of n Bernoulli indicators from central cross-moments.

    ``sigma_n`` has 2^n entries: entry ``k`` (0-based) is
    ``E(prod_i (Y_i - q_i)^{k_i})`` where ``k = sum_i k_i 2^(i-1)``, so
    variable 1 occupies the least significant bit.  Entries with exactly one
    bit set are centered first moments and must be zero.  The result vector
    uses the same bit order; for n = 3 it matches the trivariate cells.
    """
    p = np.asarray(marginals, dtype=float)
    n = p.size
    if n < 1:
        raise DimensionMismatch("need at least one marginal")
    if np.any((p < 0.0) | (p > 1.0)):
        raise OutOfRange(f"marginals must lie in [0, 1], got {p}")
    sigma = np.asarray(sigma_n, dtype=float)
    if sigma.shape != (2**n,):
        raise DimensionMismatch(f"sigma vector must have 2^{n} = {2**n} entries, got {sigma.shape}")
    if abs(sigma[0] - 1.0) > 1e-12:
        raise OutOfRange(f"zeroth moment must be 1, got {sigma[0]}")
    for i in range(n):
        if abs(sigma[1 << i]) > 1e-12:
            raise OutOfRange(f"centered first moment of variable {i + 1} must be 0")
    q = 1.0 - p
    mat = np.array([[1.0]])
    for i in range(n):
        mat = np.kron(np.array([[p[i], -1.0], [q[i], 1.0]]), mat)
    cells = mat @ sigma
    bad = [(format(i, f"0{n}b")[::-1], float(c)) for i, c in enumerate(cells) if c < -CELL_ATOL or c > 1 + CELL_ATOL]
    if bad:
        raise AdmissibilityError(f"joint probabilities outside [0, 1]: {bad}", violations=bad)
    return cells


def trivariate_moment_vector(dependence: PeriodDependence) -> np.ndarray:
    """Central-moment vector (length 8) feeding ``nvariate_joint`` for n = 3."""
    return np.array(
        [
            1.0,
            0.0,
            0.0,
            dependence.sigma_ab,
            0.0,
            dependence.sigma_ac,
            dependence.sigma_bc,
            dependence.theta_abc,
        ]
    )


def sample_comrelation(series: Sequence[Sequence[float]]) -> float:
    """Sample comrelation of k aligned series (k = 2 reduces to correlation).

    Implements the measurement-form estimator: the numerator sums the
    product of centered observations and the denominator is the k-th root
    of the product of summed k-th absolute central moments.
    """
    arrays = [np.asarray(s, dtype=float) for s in series]
    k = len(arrays)
    if k < 2:
        raise DimensionMismatch("need at least two series")
    n = arrays[0].size
    if n < 2:
        raise DegenerateSeries("series must have at least 2 observations")
    if any(a.size != n for a in arrays):
        raise DimensionMismatch("all series must have equal length")
    centered = [a - a.mean() for a in arrays]
    denom_parts = [float(np.sum(np.abs(c) ** k)) for c in centered]
    if any(d == 0.0 for d in denom_parts):
        raise DegenerateSeries("a series is constant; comrelation undefined")
    numerator = float(np.sum(np.prod(centered, axis=0)))
    denominator = float(np.prod([d ** (1.0 / k) for d in denom_parts]))
    return numerator / denominator


# --- admissibility ----------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of checking a dependence spec against period marginals.

    ``axis_bounds`` maps each dependence axis to the feasible closed
    interval of that parameter with the other three held at their given
    values (endpoints located by bisection).  ``violations`` lists the
    cells outside [0, 1] at the requested point, if any.
    """

    admissible: bool
    cells: tuple[float, ...]
    violations: tuple[tuple[str, float], ...]
    axis_bounds: dict[str, tuple[float, float]]
    marginals: PeriodMarginals
    dependence: DependenceSpec


def _cells_at(marginals: PeriodMarginals, spec: DependenceSpec) -> np.ndarray:
    dep = PeriodDependence.from_spec(marginals, spec)
    return joint_cells(
        marginals.p_a, marginals.p_b, marginals.p_c,
        dep.sigma_ab, dep.sigma_ac, dep.sigma_bc, dep.theta_abc,
    )


def _is_admissible(cells: np.ndarray, atol: float = CELL_ATOL) -> bool:
    return bool(np.all(cells >= -atol) and np.all(cells <= 1.0 + atol))


def _bisect_edge(marginals, spec, axis, feasible_x, direction, tol):
    """Push the axis value from ``feasible_x`` toward ``direction`` (+-1)."""
    hi = float(direction)
    if _is_admissible(_cells_at(marginals, spec.replace(**{axis: hi}))):
        return hi
    lo = feasible_x
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if _is_admissible(_cells_at(marginals, spec.replace(**{axis: mid}))):
            lo = mid
        else:
            hi = mid
    return lo


def admissibility_region(
    marginals: PeriodMarginals,
    dependence_spec: DependenceSpec,
    tol: float = 1e-6,
) -> AdmissibilityReport:
    """Report cell admissibility and per-axis feasible intervals.

    Feasibility along one axis (others fixed) is an interval because every
    cell is affine in each dependence parameter; the endpoints are located
    by bisection to ``tol``.  Bisection anchors at the requested value when
    it is feasible, else at zero; an axis with no feasible anchor reports
    an empty (nan, nan) interval.
    """
    cells = _cells_at(marginals, dependence_spec)
    violations = tuple(
        (CELL_LABELS[i], float(c))
        for i, c in enumerate(cells)
        if c < -CELL_ATOL or c > 1.0 + CELL_ATOL
    )
    admissible = not violations
    bounds: dict[str, tuple[float, float]] = {}
    for axis in AXES:
        anchor = None
        for cand in (getattr(dependence_spec, axis), 0.0):
            if _is_admissible(_cells_at(marginals, dependence_spec.replace(**{axis: cand}))):
                anchor = cand
                break
        if anchor is None:
            bounds[axis] = (math.nan, math.nan)
            continue
        lo = _bisect_edge(marginals, dependence_spec, axis, anchor, -1.0, tol)
        hi = _bisect_edge(marginals, dependence_spec, axis, anchor, +1.0, tol)
        bounds[axis] = (lo, hi)
    return AdmissibilityReport(
        admissible=admissible,
        cells=tuple(float(c) for c in cells),
        violations=violations,
        axis_bounds=bounds,
        marginals=marginals,
        dependence=dependence_spec,
    )


def feasible_axis_bounds(pa, pb, pc, spec: DependenceSpec, axis: str):
    """Element-wise feasible interval of one axis parameter.

    ``pa, pb, pc`` may be arrays (e.g. per path and period); for each
    element the feasible values of the axis parameter (others held at the
    values in ``spec``) form an interval because every cell is affine in
    it.  Returns ``(lo, hi)`` arrays clipped to [-1, 1]; ``lo > hi`` marks
    elements where nothing is feasible.
    """
    if axis not in AXES:
        raise OutOfRange(f"unknown axis {axis!r}")
    base = spec.replace(**{axis: 0.0})
    pa, pb, pc = np.asarray(pa, float), np.asarray(pb, float), np.asarray(pc, float)
    pa, pb, pc = np.broadcast_arrays(pa, pb, pc)
    qa, qb, qc = 1.0 - pa, 1.0 - pb, 1.0 - pc
    scales = {
        "rho_ab": np.sqrt(pa * qa * pb * qb),
        "rho_ac": np.sqrt(pa * qa * pc * qc),
        "rho_bc": np.sqrt(pb * qb * pc * qc),
        "zeta_abc": np.cbrt(
            (pa * qa * (pa**2 + qa**2))
            * (pb * qb * (pb**2 + qb**2))
            * (pc * qc * (pc**2 + qc**2))
        ),
    }
    c0 = joint_cells(
        pa, pb, pc,
        base.rho_ab * scales["rho_ab"],
        base.rho_ac * scales["rho_ac"],
        base.rho_bc * scales["rho_bc"],
        base.zeta_abc * scales["zeta_abc"],
    )
    # slope of each cell in the axis parameter (cells are affine in it and
    # the slope does not depend on the other dependence parameters)
    slot = {name: scales[name] if name == axis else 0.0 for name in AXES}
    c1 = joint_cells(
        pa, pb, pc, slot["rho_ab"], slot["rho_ac"], slot["rho_bc"], slot["zeta_abc"]
    ) - joint_cells(pa, pb, pc, 0.0, 0.0, 0.0, 0.0)
    lo = np.full(pa.shape, -1.0)
    hi = np.full(pa.shape, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        for bound, keep_above in ((0.0, True), (1.0, False)):
            # constraint: c0 + c1 * x >= 0  (resp. <= 1)
            edge = (bound - c0) / np.where(c1 == 0.0, np.nan, c1)
            pos, neg = c1 > 0, c1 < 0
            if keep_above:
                lo = np.maximum(lo, np.where(pos, edge, -1.0).max(axis=0))
                hi = np.minimum(hi, np.where(neg, edge, 1.0).min(axis=0))
                dead = ((c1 == 0) & (c0 < -CELL_ATOL)).any(axis=0)
            else:
                hi = np.minimum(hi, np.where(pos, edge, 1.0).min(axis=0))
                lo = np.maximum(lo, np.where(neg, edge, -1.0).max(axis=0))
                dead = ((c1 == 0) & (c0 > bound + CELL_ATOL)).any(axis=0)
            lo = np.where(dead, 1.0, lo)
            hi = np.where(dead, -1.0, hi)
    return lo, hi


def feasible_axis_interval(pa, pb, pc, spec: DependenceSpec, axis: str) -> tuple[float, float]:
    """Intersection of the element-wise feasible intervals of one axis.

    Exact (closed-form) counterpart of the bisection bounds in
    ``admissibility_region``; ``lo > hi`` means no axis value is feasible
    across every element.
    """
    lo, hi = feasible_axis_bounds(pa, pb, pc, spec, axis)
    return float(np.max(lo)), float(np.min(hi))
