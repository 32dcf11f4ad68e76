"""Market term structures: discounting, credit spreads, caplet vols.

Terms are stored in days from the valuation date and converted with an
ACT/365-fixed day count.  The interest curve interpolates linearly in the
continuously compounded zero rate; the credit and caplet curves interpolate
linearly in the quoted value.  Beyond the last node both ends extrapolate
flat unless disabled per query.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    EmptyCurve,
    NonMonotoneTerms,
    OutOfRangeTerm,
    ParseError,
    SchemaError,
    WrongCurveKind,
)

DAYS_PER_YEAR = 365.0

INTEREST = "interest"
CREDIT_SPREAD = "credit_spread"
CAPLET_VOL = "caplet_vol"

_KINDS = (INTEREST, CREDIT_SPREAD, CAPLET_VOL)

# Short aliases used in the CSV interface.
_CSV_KIND = {INTEREST: "interest", CREDIT_SPREAD: "credit", CAPLET_VOL: "caplet"}
_KIND_FROM_CSV = {v: k for k, v in _CSV_KIND.items()}


@dataclass(frozen=True)
class CurvePoint:
    """One node: integer days from the valuation date and a decimal value."""

    term_days: int
    value: float

    def __post_init__(self):
        if self.term_days <= 0:
            raise NonMonotoneTerms(f"term_days must be positive, got {self.term_days}")
        if not math.isfinite(self.value):
            raise ValueError(f"curve value must be finite, got {self.value}")


@dataclass(frozen=True)
class Curve:
    """Immutable term structure of one market quantity.

    ``kind`` is one of ``interest``, ``credit_spread``, ``caplet_vol``.
    Points must be strictly increasing in term; at least two are required.
    """

    kind: str
    points: tuple[CurvePoint, ...]
    day_count: str = "ACT/365F"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise WrongCurveKind(f"unknown curve kind {self.kind!r}")
        if len(self.points) < 2:
            raise EmptyCurve(f"curve needs at least 2 points, got {len(self.points)}")
        terms = [p.term_days for p in self.points]
        if any(b <= a for a, b in zip(terms, terms[1:])):
            raise NonMonotoneTerms(f"terms must be strictly increasing, got {terms}")

    @property
    def term_years(self) -> tuple[float, ...]:
        return tuple(p.term_days / DAYS_PER_YEAR for p in self.points)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(p.value for p in self.points)

    def value_at(self, term_years: float, extrapolate: bool = True) -> float:
        """Piecewise-linear interpolation in the quoted value."""
        terms = self.term_years
        vals = self.values
        if term_years <= terms[0]:
            if term_years < terms[0] and not extrapolate:
                raise OutOfRangeTerm(f"term {term_years}y before first node {terms[0]}y")
            return vals[0]
        if term_years >= terms[-1]:
            if term_years > terms[-1] and not extrapolate:
                raise OutOfRangeTerm(f"term {term_years}y beyond last node {terms[-1]}y")
            return vals[-1]
        # bisect over the (short) node list
        lo, hi = 0, len(terms) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if terms[mid] <= term_years:
                lo = mid
            else:
                hi = mid
        w = (term_years - terms[lo]) / (terms[hi] - terms[lo])
        return vals[lo] * (1.0 - w) + vals[hi] * w


@dataclass(frozen=True)
class MarketSnapshot:
    """All curves observed on one valuation date."""

    discount_curve: Curve
    credit_curve: Curve
    caplet_curve: Curve
    valuation_date: _dt.date | None = None
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.discount_curve.kind != INTEREST:
            raise WrongCurveKind("discount_curve must have kind 'interest'")
        if self.credit_curve.kind != CREDIT_SPREAD:
            raise WrongCurveKind("credit_curve must have kind 'credit_spread'")
        if self.caplet_curve.kind != CAPLET_VOL:
            raise WrongCurveKind("caplet_curve must have kind 'caplet_vol'")


def build_curve(kind: str, points: Iterable[tuple[int, float] | CurvePoint]) -> Curve:
    """Construct a validated curve from (term_days, value) pairs."""
    pts = tuple(p if isinstance(p, CurvePoint) else CurvePoint(int(p[0]), float(p[1])) for p in points)
    if not pts:
        raise EmptyCurve("no curve points supplied")
    return Curve(kind=kind, points=pts)


def zero_rate(curve: Curve, term_years: float, extrapolate: bool = True) -> float:
    """Continuously compounded zero rate at ``term_years`` (linear in rate)."""
    if curve.kind != INTEREST:
        raise WrongCurveKind(f"zero_rate needs an interest curve, got {curve.kind!r}")
    return curve.value_at(term_years, extrapolate=extrapolate)


def discount_factor(curve: Curve, t_years: float, u_years: float, extrapolate: bool = True) -> float:
    """Discount factor D(t, u) implied by the zero-rate curve.

    D(0, t) = exp(-r(t) * t) with r linearly interpolated, so
    D(t, u) = D(0, u) / D(0, t).  D(t, t) = 1 exactly and the factor is
    multiplicative across adjacent intervals by construction.
    """
    if curve.kind != INTEREST:
        raise WrongCurveKind(f"discount_factor needs an interest curve, got {curve.kind!r}")
    if t_years < 0 or u_years < t_years:
        raise ValueError(f"need 0 <= t <= u, got t={t_years}, u={u_years}")
    if u_years == t_years:
        return 1.0
    log_d_u = -zero_rate(curve, u_years, extrapolate) * u_years
    log_d_t = -zero_rate(curve, t_years, extrapolate) * t_years if t_years > 0 else 0.0
    return math.exp(log_d_u - log_d_t)


def spread_at(curve: Curve, term_years: float, shift_bps: float = 0.0) -> float:
    """Interpolated credit spread with an optional parallel shift in bps."""
    if curve.kind != CREDIT_SPREAD:
        raise WrongCurveKind(f"spread_at needs a credit_spread curve, got {curve.kind!r}")
    return curve.value_at(term_years) + shift_bps * 1e-4


def shifted_credit_curve(curve: Curve, shift_bps: float) -> Curve:
    """Credit curve with every node moved in parallel by ``shift_bps``."""
    if curve.kind != CREDIT_SPREAD:
        raise WrongCurveKind(f"expected a credit_spread curve, got {curve.kind!r}")
    pts = tuple(CurvePoint(p.term_days, p.value + shift_bps * 1e-4) for p in curve.points)
    return Curve(kind=CREDIT_SPREAD, points=pts)


# --- snapshot I/O -----------------------------------------------------------


def _snapshot_from_rows(rows, warnings, valuation_date):
    by_kind: dict[str, list[CurvePoint]] = {k: [] for k in _KINDS}
    for kind, term, value in rows:
        by_kind[kind].append(CurvePoint(term, value))
        if kind in (INTEREST, CREDIT_SPREAD) and value < 0:
            warnings.append(f"negative {kind} value {value} at term {term}d")
    missing = [k for k in _KINDS if len(by_kind[k]) < 2]
    if missing:
        raise SchemaError(f"snapshot is missing curve sections: {', '.join(missing)}")
    return MarketSnapshot(
        discount_curve=Curve(INTEREST, tuple(by_kind[INTEREST])),
        credit_curve=Curve(CREDIT_SPREAD, tuple(by_kind[CREDIT_SPREAD])),
        caplet_curve=Curve(CAPLET_VOL, tuple(by_kind[CAPLET_VOL])),
        valuation_date=valuation_date,
        warnings=tuple(warnings),
    )


def _parse_csv_text(text: str) -> MarketSnapshot:
    rows = []
    warnings: list[str] = []
    valuation_date = None
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.startswith("valuation_date="):
                valuation_date = _dt.date.fromisoformat(body.split("=", 1)[1].strip())
            continue
        cells = [c.strip() for c in line.split(",")]
        if not header_seen:
            if [c.lower() for c in cells] != ["kind", "term_days", "value"]:
                raise ParseError("expected header 'kind,term_days,value'", line=lineno)
            header_seen = True
            continue
        if len(cells) != 3:
            raise ParseError(f"expected 3 fields, got {len(cells)}", line=lineno)
        kind_raw, term_raw, value_raw = cells
        kind = _KIND_FROM_CSV.get(kind_raw.lower())
        if kind is None:
            raise ParseError(f"unknown kind {kind_raw!r}", line=lineno, field="kind")
        try:
            term = int(term_raw)
        except ValueError:
            raise ParseError(f"bad integer {term_raw!r}", line=lineno, field="term_days") from None
        try:
            value = float(value_raw)
        except ValueError:
            raise ParseError(f"bad decimal {value_raw!r}", line=lineno, field="value") from None
        rows.append((kind, term, value))
    if not header_seen:
        raise ParseError("file has no header row", line=1)
    return _snapshot_from_rows(rows, warnings, valuation_date)


def _parse_json_obj(obj) -> MarketSnapshot:
    if not isinstance(obj, dict) or "curves" not in obj:
        raise SchemaError("JSON snapshot must be an object with a 'curves' list")
    valuation_date = None
    if obj.get("valuation_date") is not None:
        valuation_date = _dt.date.fromisoformat(obj["valuation_date"])
    rows = []
    warnings: list[str] = []
    for entry in obj["curves"]:
        for key in ("kind", "term_days", "value"):
            if key not in entry:
                raise SchemaError(f"curve entry missing field {key!r}: {entry}")
        kind = _KIND_FROM_CSV.get(str(entry["kind"]).lower())
        if kind is None:
            raise SchemaError(f"unknown kind {entry['kind']!r}")
        rows.append((kind, int(entry["term_days"]), float(entry["value"])))
    return _snapshot_from_rows(rows, warnings, valuation_date)


def load_snapshot(path: str | Path) -> MarketSnapshot:
    """Load a market snapshot from a CSV or JSON file.

    CSV schema: header ``kind,term_days,value`` with kinds
    ``interest|credit|caplet``; ``#`` lines are comments and may carry
    ``# valuation_date=YYYY-MM-DD``.  A ``.json`` file holds the same fields
    under a ``curves`` list.  Negative interest/credit values are accepted
    and reported through ``MarketSnapshot.warnings``.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
        return _parse_json_obj(obj)
    return _parse_csv_text(text)


def emit_snapshot(snapshot: MarketSnapshot, path: str | Path) -> Path:
    """Write a snapshot back to CSV; values round-trip bit-exactly."""
    path = Path(path)
    lines = []
    if snapshot.valuation_date is not None:
        lines.append(f"# valuation_date={snapshot.valuation_date.isoformat()}")
    lines.append("kind,term_days,value")
    for curve in (snapshot.discount_curve, snapshot.credit_curve, snapshot.caplet_curve):
        short = _CSV_KIND[curve.kind]
        for p in curve.points:
            lines.append(f"{short},{p.term_days},{p.value!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def bundled_snapshot_path() -> Path:
    """Path to the packaged spot-market snapshot used by the experiments."""
    return Path(resources.files("tricds").joinpath("data/table1.csv"))


def load_bundled_snapshot() -> MarketSnapshot:
    return load_snapshot(bundled_snapshot_path())
