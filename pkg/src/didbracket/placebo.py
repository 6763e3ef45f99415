"""Placebo engine: rerun the bracketing construction on every eligible unit.

Each unit takes a turn as the sham-treated unit with its in-panel
neighbors as candidates, classified against the same pre-study window.
The resulting point estimates form reference distributions (one per arm)
against which the genuinely treated unit's estimates are ranked. Standard
errors are not required: this is permutation-style inference on points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .bracketing import classify_candidates
from .errors import ArmUnavailableError, DataError, MissingDataError, OutOfDomainError
from .estimation import did_point, weighted_period_mean
from .model import PanelDataset, PeriodRange

ARMS = ("lc", "uc")

EXCLUDED_NO_LOWER = "NoLowerNeighbors"
EXCLUDED_NO_UPPER = "NoUpperNeighbors"
EXCLUDED_MISSING = "MissingData"
EXCLUDED_EXPLICIT = "ExplicitExclusion"


@dataclass(frozen=True)
class AdjacencyGraph:
    """Undirected unit adjacency; edges are canonical sorted pairs."""

    edges: frozenset

    @classmethod
    def from_pairs(cls, pairs) -> "AdjacencyGraph":
        edges = set()
        for a, b in pairs:
            if a == b:
                raise DataError(f"self-edge on {a!r}")
            edges.add((a, b) if a < b else (b, a))
        return cls(edges=frozenset(edges))

    def neighbors(self, unit: str) -> frozenset:
        return frozenset(
            b if a == unit else a for a, b in self.edges if unit in (a, b)
        )

    def units(self) -> frozenset:
        return frozenset(u for edge in self.edges for u in edge)


@dataclass(frozen=True)
class PlaceboResult:
    unit_id: str
    effect_lc: Optional[float] = None
    effect_uc: Optional[float] = None
    excluded_reason: Optional[str] = None

    def __post_init__(self):
        included = self.effect_lc is not None or self.effect_uc is not None
        if included and self.excluded_reason is not None:
            raise DataError(f"{self.unit_id}: included result cannot carry an exclusion reason")
        if not included and self.excluded_reason is None:
            raise DataError(f"{self.unit_id}: excluded result must carry a reason")

    def arm(self, arm: str) -> Optional[float]:
        if arm not in ARMS:
            raise OutOfDomainError(f"arm must be one of {ARMS}, got {arm!r}")
        return self.effect_lc if arm == "lc" else self.effect_uc


def _arm_point(panel, treated, controls, before, after) -> float:
    return did_point(
        weighted_period_mean(panel, {treated}, before),
        weighted_period_mean(panel, {treated}, after),
        weighted_period_mean(panel, controls, before),
        weighted_period_mean(panel, controls, after),
    )


def run_placebo_study(
    panel: PanelDataset,
    adjacency: AdjacencyGraph,
    prestudy: PeriodRange,
    before: PeriodRange,
    after: PeriodRange,
    exclusions=(),
) -> tuple:
    """One PlaceboResult per non-excluded panel unit, sorted by unit id.

    Candidates for each unit are its neighbors present in the panel. Units
    whose classification leaves a side empty lack that arm; units with no
    usable arm, or with missing data anywhere along their construction,
    are excluded with a reason instead of aborting the study.
    """
    excluded = frozenset(exclusions)
    results = []
    for unit in sorted(panel.units):
        if unit in excluded:
            results.append(PlaceboResult(unit, excluded_reason=EXCLUDED_EXPLICIT))
            continue
        candidates = adjacency.neighbors(unit) & panel.units
        try:
            groups = classify_candidates(panel, unit, candidates, prestudy)
            effect_lc = (
                _arm_point(panel, unit, groups.lower, before, after)
                if groups.lower
                else None
            )
            effect_uc = (
                _arm_point(panel, unit, groups.upper, before, after)
                if groups.upper
                else None
            )
        except MissingDataError:
            results.append(PlaceboResult(unit, excluded_reason=EXCLUDED_MISSING))
            continue
        if effect_lc is None and effect_uc is None:
            reason = EXCLUDED_NO_LOWER if not groups.lower else EXCLUDED_NO_UPPER
            results.append(PlaceboResult(unit, excluded_reason=reason))
        else:
            results.append(PlaceboResult(unit, effect_lc=effect_lc, effect_uc=effect_uc))
    return tuple(results)


@dataclass(frozen=True)
class RankResult:
    n_total: int
    n_strictly_greater: int
    rank: int


def rank_effect(results, unit: str, arm: str, subset=None) -> RankResult:
    """Rank a unit's arm estimate by strict exceedance among the results.

    Ties count as not-greater. ``subset`` optionally restricts the
    comparison units (the unit itself is always kept).
    """
    pool = [
        r
        for r in results
        if r.arm(arm) is not None and (subset is None or r.unit_id in subset or r.unit_id == unit)
    ]
    target = next((r for r in pool if r.unit_id == unit), None)
    if target is None:
        raise ArmUnavailableError(f"{unit} has no {arm} placebo estimate")
    own = target.arm(arm)
    greater = sum(1 for r in pool if r.unit_id != unit and r.arm(arm) > own)
    return RankResult(n_total=len(pool), n_strictly_greater=greater, rank=greater + 1)


@dataclass(frozen=True)
class HistBin:
    lower: float
    upper: float  # exclusive
    count: int


def histogram_export(results, arm: str, bin_width: float) -> tuple:
    """Left-closed right-open bins anchored at 0, covering the arm's values."""
    if not bin_width > 0:
        raise OutOfDomainError(f"bin_width must be positive, got {bin_width}")
    values = sorted(r.arm(arm) for r in results if r.arm(arm) is not None)
    if not values:
        return ()
    first = math.floor(values[0] / bin_width)
    last = math.floor(values[-1] / bin_width)
    counts = {k: 0 for k in range(first, last + 1)}
    for v in values:
        counts[math.floor(v / bin_width)] += 1
    return tuple(
        HistBin(lower=k * bin_width, upper=(k + 1) * bin_width, count=counts[k])
        for k in range(first, last + 1)
    )
