"""Contract terms: payment schedule, recovery and settlement conventions."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import OutOfRange

FREQUENCIES = {"monthly": 12, "quarterly": 4, "semiannual": 2, "annual": 1}

ONE_WAY = "one-way"
TWO_WAY = "two-way"


@dataclass(frozen=True)
class RecoverySpec:
    """Recovery rates and the settlement rule applied on counterparty default.

    ``phi_a``/``phi_b`` apply when the defaulting party owes; the non-default
    recoveries ``phi_bar_a``/``phi_bar_b`` apply when the surviving party
    owes the defaulter (0 = one-way payment rule, 1 = two-way).  ``phi_ab``
    is the joint recovery when both counterparties default together and
    defaults to the product ``phi_a * phi_b``.  ``phi_c`` is the reference
    entity's recovery driving the protection payment.
    """

    phi_a: float = 0.4
    phi_b: float = 0.4
    phi_c: float = 0.4
    phi_bar_a: float = 1.0
    phi_bar_b: float = 1.0
    phi_ab: float | None = None

    def __post_init__(self):
        for name in ("phi_a", "phi_b", "phi_c", "phi_bar_a", "phi_bar_b"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise OutOfRange(f"{name} must lie in [0, 1], got {v}")
        if self.phi_ab is None:
            object.__setattr__(self, "phi_ab", self.phi_a * self.phi_b)
        elif not 0.0 <= self.phi_ab <= 1.0:
            raise OutOfRange(f"phi_ab must lie in [0, 1], got {self.phi_ab}")

    @staticmethod
    def with_settlement(rule: str = TWO_WAY, **kwargs) -> "RecoverySpec":
        """Build a spec with both non-default recoveries set by the rule name."""
        if rule not in (ONE_WAY, TWO_WAY):
            raise OutOfRange(f"settlement rule must be '{ONE_WAY}' or '{TWO_WAY}', got {rule!r}")
        bar = 1.0 if rule == TWO_WAY else 0.0
        return RecoverySpec(phi_bar_a=bar, phi_bar_b=bar, **kwargs)

    @property
    def settlement_rule(self) -> str:
        if self.phi_bar_a == self.phi_bar_b == 1.0:
            return TWO_WAY
        if self.phi_bar_a == self.phi_bar_b == 0.0:
            return ONE_WAY
        return "mixed"


@dataclass(frozen=True)
class CDSContract:
    """A CDS paying ``spread`` on ``notional`` at the scheduled dates.

    ``payment_times`` are year fractions T_1 < ... < T_m measured from the
    valuation date T_0 = 0; ``accruals`` are the year fractions of each
    premium period.  The protection buyer pays the premium and receives
    ``notional * (1 - phi_c)`` less half a period's accrued premium if the
    reference entity defaults within a period.
    """

    notional: float
    spread: float
    payment_times: tuple[float, ...]
    accruals: tuple[float, ...]
    buyer: str = "A"
    seller: str = "B"

    def __post_init__(self):
        if self.notional <= 0:
            raise OutOfRange(f"notional must be positive, got {self.notional}")
        if len(self.payment_times) < 1:
            raise OutOfRange("schedule needs at least one payment date")
        if len(self.accruals) != len(self.payment_times):
            raise OutOfRange("one accrual factor per payment date is required")
        times = (0.0,) + self.payment_times
        if any(b <= a for a, b in zip(times, times[1:])):
            raise OutOfRange(f"payment dates must be strictly increasing, got {self.payment_times}")
        if any(d <= 0 for d in self.accruals):
            raise OutOfRange("accrual factors must be positive")

    @property
    def n_periods(self) -> int:
        return len(self.payment_times)

    @property
    def maturity(self) -> float:
        return self.payment_times[-1]

    def grid(self) -> np.ndarray:
        """Full time grid T_0 = 0, T_1, ..., T_m."""
        return np.concatenate([[0.0], np.asarray(self.payment_times)])

    def premium_cashflows(self, spread: float | None = None) -> np.ndarray:
        """X_i = -spread * notional * accrual_i (buyer's perspective)."""
        s = self.spread if spread is None else spread
        return -s * self.notional * np.asarray(self.accruals)

    def with_spread(self, spread: float) -> "CDSContract":
        return replace(self, spread=spread)


@dataclass(frozen=True)
class DefaultPayment:
    """Protection amount on reference default within one period."""

    amount: float
    accrued: float

    @staticmethod
    def for_period(contract: CDSContract, recovery: RecoverySpec, period: int,
                   spread: float | None = None) -> "DefaultPayment":
        s = contract.spread if spread is None else spread
        accrued = 0.5 * s * contract.notional * contract.accruals[period]
        return DefaultPayment(
            amount=contract.notional * (1.0 - recovery.phi_c) - accrued,
            accrued=accrued,
        )


def default_payments(contract: CDSContract, recovery: RecoverySpec,
                     spread: float | None = None) -> np.ndarray:
    """R(T_{i-1}, T_i) for every period: N(1 - phi_c) minus half-period accrual."""
    s = contract.spread if spread is None else spread
    accrued = 0.5 * s * contract.notional * np.asarray(contract.accruals)
    return contract.notional * (1.0 - recovery.phi_c) - accrued


@dataclass(frozen=True)
class CollateralSpec:
    """Collateral threshold; only full collateralization (H = 0) is priced."""

    threshold: float = 0.0

    @property
    def mode(self) -> str:
        if self.threshold == 0.0:
            return "full"
        return "partial" if self.threshold > 0 else "over"


def standard_schedule(maturity_years: float, frequency: str | int = "quarterly",
                      start: float = 0.0) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Evenly spaced payment times and accruals from ``start`` to maturity."""
    per_year = FREQUENCIES[frequency] if isinstance(frequency, str) else int(frequency)
    if per_year < 1:
        raise OutOfRange(f"payments per year must be >= 1, got {per_year}")
    n = round((maturity_years - start) * per_year)
    if n < 1 or abs(start + n / per_year - maturity_years) > 1e-9:
        raise OutOfRange(
            f"maturity {maturity_years}y is not a whole number of {frequency} periods from {start}"
        )
    step = 1.0 / per_year
    times = tuple(start + step * (i + 1) for i in range(n))
    accruals = (step,) * n
    return times, accruals


def standard_cds(notional: float, spread: float, maturity_years: float = 5.0,
                 frequency: str | int = "quarterly") -> CDSContract:
    """The experiment contract: e.g. a new 5y CDS with quarterly payments."""
    times, accruals = standard_schedule(maturity_years, frequency)
    return CDSContract(notional=notional, spread=spread, payment_times=times, accruals=accruals)
