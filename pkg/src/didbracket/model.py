"""Core domain types: panel data, study designs, summaries, and reports.

Everything here is an immutable value object; all operations are pure, so
instances are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import DataError, InvariantError


@dataclass(frozen=True)
class PanelRecord:
    """One unit-year observation: an outcome rate per 100,000 persons."""

    unit_id: str
    year: int
    rate: float
    population: int
    se: Optional[float] = None
    deaths: Optional[int] = None

    def __post_init__(self):
        if not self.unit_id:
            raise DataError("unit_id must be a nonempty string")
        if not math.isfinite(self.rate) or self.rate < 0:
            raise DataError(f"{self.unit_id} {self.year}: rate must be finite and >= 0")
        if self.population <= 0:
            raise DataError(f"{self.unit_id} {self.year}: population must be positive")
        if self.se is not None and (not math.isfinite(self.se) or self.se < 0):
            raise DataError(f"{self.unit_id} {self.year}: se must be finite and >= 0")
        if self.deaths is not None and self.deaths < 0:
            raise DataError(f"{self.unit_id} {self.year}: deaths must be >= 0")


class PanelDataset:
    """Immutable collection of unit-year records with unique (unit, year) keys."""

    __slots__ = ("_records", "_index", "_units")

    def __init__(self, records):
        recs = tuple(records)
        index = {}
        for r in recs:
            key = (r.unit_id, r.year)
            if key in index:
                raise DataError(f"duplicate record for {r.unit_id} {r.year}")
            index[key] = r
        object.__setattr__(self, "_records", recs)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_units", frozenset(r.unit_id for r in recs))

    @property
    def records(self) -> tuple:
        return self._records

    @property
    def units(self) -> frozenset:
        return self._units

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, key) -> bool:
        return key in self._index

    def get(self, unit_id: str, year: int) -> PanelRecord:
        try:
            return self._index[(unit_id, year)]
        except KeyError:
            raise DataError(f"no record for {unit_id} {year}") from None

    def has(self, unit_id: str, year: int) -> bool:
        return (unit_id, year) in self._index

    def years(self, unit_id: str):
        return sorted(r.year for r in self._records if r.unit_id == unit_id)


@dataclass(frozen=True, order=True)
class PeriodRange:
    """Inclusive range of calendar years."""

    start_year: int
    end_year: int

    def __post_init__(self):
        if self.start_year > self.end_year:
            raise DataError(f"period start {self.start_year} after end {self.end_year}")

    def years(self) -> Iterator[int]:
        return iter(range(self.start_year, self.end_year + 1))

    def __len__(self) -> int:
        return self.end_year - self.start_year + 1

    def __str__(self) -> str:
        return f"{self.start_year}-{self.end_year}"


@dataclass(frozen=True)
class StudyDesign:
    """Treated unit, the two control groups, and the three analysis periods.

    Construction performs only type-level normalization; semantic problems
    (overlapping periods, empty groups, missing data) are reported by
    :func:`validate_design` as data, not raised.
    """

    treated: str
    lower_controls: frozenset
    upper_controls: frozenset
    prestudy: PeriodRange
    before: PeriodRange
    after: PeriodRange

    def __post_init__(self):
        object.__setattr__(self, "lower_controls", frozenset(self.lower_controls))
        object.__setattr__(self, "upper_controls", frozenset(self.upper_controls))

    def all_units(self) -> frozenset:
        return self.lower_controls | self.upper_controls | {self.treated}

    def all_controls(self) -> frozenset:
        return self.lower_controls | self.upper_controls


@dataclass(frozen=True)
class Violation:
    """Machine-readable design violation."""

    code: str
    subject: str = ""
    detail: str = ""

    def __str__(self) -> str:
        subj = f"({self.subject})" if self.subject else ""
        return f"{self.code}{subj}: {self.detail}" if self.detail else f"{self.code}{subj}"


def validate_design(panel: PanelDataset, design: StudyDesign) -> list:
    """Return every violated design invariant; an empty list means valid.

    Deterministic and independent of panel record order: violations are
    sorted by (code, subject).
    """
    violations = []
    if design.treated in design.lower_controls | design.upper_controls:
        violations.append(Violation("TreatedInControls", design.treated))
    overlap = design.lower_controls & design.upper_controls
    for unit in sorted(overlap):
        violations.append(Violation("ControlSetsOverlap", unit))
    if not design.lower_controls:
        violations.append(Violation("EmptyControlGroup", "lower"))
    if not design.upper_controls:
        violations.append(Violation("EmptyControlGroup", "upper"))
    if design.prestudy.end_year >= design.before.start_year:
        violations.append(
            Violation("PeriodOverlap", "prestudy/before",
                      f"{design.prestudy} does not precede {design.before}")
        )
    if design.before.end_year >= design.after.start_year:
        violations.append(
            Violation("PeriodOverlap", "before/after",
                      f"{design.before} does not precede {design.after}")
        )
    for unit in sorted(design.all_units()):
        missing = [
            year
            for period in (design.prestudy, design.before, design.after)
            for year in period.years()
            if not panel.has(unit, year)
        ]
        if missing:
            years = ", ".join(str(y) for y in missing[:6])
            more = "" if len(missing) <= 6 else f" (+{len(missing) - 6} more)"
            violations.append(Violation("MissingUnitYears", unit, years + more))
    violations.sort(key=lambda v: (v.code, v.subject))
    return violations


@dataclass(frozen=True)
class PeriodSummary:
    """Population-weighted mean outcome for a group over a period.

    ``se`` is None when any contributing record lacks one; ``total_weight``
    is the person-years behind the mean.
    """

    mean: float
    se: Optional[float]
    total_weight: float

    def __post_init__(self):
        if self.total_weight <= 0:
            raise InvariantError("total_weight must be positive")
        if self.se is not None and self.se < 0:
            raise InvariantError("se must be >= 0")


@dataclass(frozen=True)
class ConfInterval:
    lower: float
    upper: float
    level: float

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise InvariantError(f"confidence level {self.level} not in (0, 1)")
        if self.lower > self.upper:
            raise InvariantError(f"interval [{self.lower}, {self.upper}] is inverted")

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class EffectEstimate:
    """A DiD rate-difference estimate with its percent-change companion.

    ``denom`` is the implied counterfactual after-period mean used as the
    percent denominator. ``pct_ci`` scales the rate CI endpoints;
    ``pct_se_delta`` is the delta-method standard error of the percent
    estimate, reported alongside.
    """

    point: float
    se: float
    ci: ConfInterval
    pct_point: float
    pct_ci: ConfInterval
    pct_se_delta: float
    denom: float

    def __post_init__(self):
        if not self.ci.contains(self.point):
            raise InvariantError("point estimate outside its own CI")
        if self.denom <= 0:
            raise InvariantError("percent denominator must be positive")


@dataclass(frozen=True)
class DiffEstimate:
    point: float
    ci: ConfInterval


@dataclass(frozen=True)
class OrderingReport:
    """Before-period check that the constructed groups straddle the treated unit."""

    diff_uc_minus_t: DiffEstimate
    diff_t_minus_lc: DiffEstimate
    period: PeriodRange
    flags: tuple = ()


@dataclass(frozen=True)
class BracketReport:
    """Full bracketing analysis: both arms, bounds, min-max CI, diagnostics."""

    est_lower_ctrl: EffectEstimate
    est_upper_ctrl: EffectEstimate
    bracket: tuple
    minmax_ci: ConfInterval
    ordering: OrderingReport
    alpha: float
    est_all_ctrl: Optional[EffectEstimate] = None
    all_ctrl_note: str = "assumes parallel trends"
    diagnostics: tuple = field(default=None)

    def __post_init__(self):
        lo, hi = self.bracket
        if lo > hi:
            raise InvariantError("bracket bounds out of order")
        for arm in (self.est_lower_ctrl, self.est_upper_ctrl):
            if not (self.minmax_ci.lower <= arm.ci.lower and arm.ci.upper <= self.minmax_ci.upper):
                raise InvariantError("min-max CI does not contain a component CI")
