"""Relative-trends diagnostics for the before period.

Two patterns are incompatible with the model behind the bracketing bounds:
(iii) the upper-vs-treated gap widens while the treated-vs-lower gap
narrows, and (iv) the reverse. Each is tested with an intersection-union
test: evidence only if both component one-sided tests reject, so the
combined p-value is the max of the components.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BadSplitError, EmptyGroupError, MissingSEError, OutOfDomainError
from .estimation import normal_cdf, wald_ci, weighted_period_mean
from .model import PanelDataset, PeriodRange, StudyDesign

PATTERNS = ("iii", "iv")
DIRECTIONS = ("widens", "narrows")


@dataclass(frozen=True)
class PatternTestReport:
    split_year: int
    p_a: float
    p_b: float
    pattern: str
    iu_pvalue: float
    evidence: bool
    alpha: float


def _gap(panel, group_hi, group_lo, period):
    hi = weighted_period_mean(panel, group_hi, period)
    lo = weighted_period_mean(panel, group_lo, period)
    if hi.se is None or lo.se is None:
        raise MissingSEError("gap tests need SEs for both groups in both sub-periods")
    return hi.mean - lo.mean, hi.se**2 + lo.se**2


def gap_change_test(
    panel: PanelDataset,
    group_hi,
    group_lo,
    first: PeriodRange,
    second: PeriodRange,
    direction: str,
) -> float:
    """One-sided Wald p-value for a change in the hi-minus-lo gap.

    direction="widens" tests H1: gap(second) - gap(first) > 0;
    "narrows" tests the opposite tail. The statistic divides the gap
    change by the quadrature SE of the four group-period cells.
    """
    if direction not in DIRECTIONS:
        raise OutOfDomainError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    gap1, var1 = _gap(panel, group_hi, group_lo, first)
    gap2, var2 = _gap(panel, group_hi, group_lo, second)
    se = (var1 + var2) ** 0.5
    if se == 0:
        # Degenerate reference: the sign decides, equal gaps split the mass.
        change = gap2 - gap1
        if change == 0:
            return 0.5
        grew = change > 0
        return 0.0 if grew == (direction == "widens") else 1.0
    stat = (gap2 - gap1) / se
    return normal_cdf(-stat) if direction == "widens" else normal_cdf(stat)


def split_before(before: PeriodRange, split_year: int):
    """Split the before period after ``split_year`` into two sub-periods."""
    if not before.start_year <= split_year < before.end_year:
        raise BadSplitError(
            f"split year {split_year} not strictly inside {before}"
        )
    return (
        PeriodRange(before.start_year, split_year),
        PeriodRange(split_year + 1, before.end_year),
    )


def pattern_test(
    panel: PanelDataset,
    design: StudyDesign,
    split_year: int,
    pattern: str,
    alpha: float = 0.05,
) -> PatternTestReport:
    """Intersection-union test for one model-violating pattern.

    Pattern iii pairs (a) upper-vs-treated gap widens with (b)
    treated-vs-lower gap narrows across the split; pattern iv reverses
    both directions. Evidence requires both component p-values below
    alpha, i.e. max(p_a, p_b) < alpha.
    """
    if pattern not in PATTERNS:
        raise OutOfDomainError(f"pattern must be one of {PATTERNS}, got {pattern!r}")
    first, second = split_before(design.before, split_year)
    treated = {design.treated}
    dir_a, dir_b = ("widens", "narrows") if pattern == "iii" else ("narrows", "widens")
    p_a = gap_change_test(panel, design.upper_controls, treated, first, second, dir_a)
    p_b = gap_change_test(panel, treated, design.lower_controls, first, second, dir_b)
    iu = max(p_a, p_b)
    return PatternTestReport(
        split_year=split_year,
        p_a=p_a,
        p_b=p_b,
        pattern=pattern,
        iu_pvalue=iu,
        evidence=iu < alpha,
        alpha=alpha,
    )


@dataclass(frozen=True)
class TrendRow:
    year: int  # single year, or sub-period start when by_year=False
    end_year: int
    group: str
    mean: float
    ci_lower: float
    ci_upper: float


def relative_trends_table(
    panel: PanelDataset,
    design: StudyDesign,
    by_year: bool = True,
    alpha: float = 0.05,
    period: PeriodRange = None,
) -> tuple:
    """Per-year (or per-period) group means with Wald CIs, for plotting.

    Covers the treated, lower, and upper groups over ``period`` (default:
    the before period when by_year, else all three design periods).
    """
    groups = [
        ("treated", {design.treated}),
        ("lower", design.lower_controls),
        ("upper", design.upper_controls),
    ]
    for name, members in groups:
        if not members:
            raise EmptyGroupError(f"{name} group is empty")
    if by_year:
        span = period if period is not None else design.before
        windows = [PeriodRange(y, y) for y in span.years()]
    else:
        windows = [design.prestudy, design.before, design.after] if period is None else [period]

    rows = []
    for window in windows:
        for name, members in groups:
            summary = weighted_period_mean(panel, members, window)
            if summary.se is None:
                raise MissingSEError(f"{name} group lacks SEs in {window}")
            ci = wald_ci(summary.mean, summary.se, alpha)
            rows.append(
                TrendRow(
                    year=window.start_year,
                    end_year=window.end_year,
                    group=name,
                    mean=summary.mean,
                    ci_lower=ci.lower,
                    ci_upper=ci.upper,
                )
            )
    return tuple(rows)
