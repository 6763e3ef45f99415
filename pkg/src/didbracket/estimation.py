"""Estimators: weighted summaries, DiD points and SEs, percent changes, CIs.

The four DiD cells (treated/control x before/after) are treated as
independent throughout, so SEs combine in quadrature. All functions are
pure and reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    EmptyGroupError,
    MissingDataError,
    MissingSEError,
    NonpositiveDenominatorError,
    OutOfDomainError,
)
from .model import ConfInterval, PanelDataset, PeriodRange, PeriodSummary

RATE_SCALE = 100_000.0

# Rational-approximation coefficients for the inverse standard normal CDF
# (Wichura's PPND16). Absolute error below 1e-15 over (0, 1).
_CENTRAL_NUM = (
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
)
_CENTRAL_DEN = (
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_MIDDLE_NUM = (
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
)
_MIDDLE_DEN = (
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_TAIL_NUM = (
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
)
_TAIL_DEN = (
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly(coeffs, x: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF.

    Raises OutOfDomainError unless 0 < p < 1.
    """
    if not 0.0 < p < 1.0:
        raise OutOfDomainError(f"normal_quantile requires 0 < p < 1, got {p}")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_CENTRAL_NUM, r) / _poly(_CENTRAL_DEN, r)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        value = _poly(_MIDDLE_NUM, r) / _poly(_MIDDLE_DEN, r)
    else:
        r -= 5.0
        value = _poly(_TAIL_NUM, r) / _poly(_TAIL_DEN, r)
    return -value if q < 0 else value


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class NormalTail:
    """Two-sided tail setup: alpha and the matching upper 1 - alpha/2 quantile."""

    alpha: float
    z: float

    @classmethod
    def from_alpha(cls, alpha: float) -> "NormalTail":
        if not 0.0 < alpha < 1.0:
            raise OutOfDomainError(f"alpha must be in (0, 1), got {alpha}")
        return cls(alpha=alpha, z=normal_quantile(1.0 - alpha / 2.0))


def weighted_period_mean(panel: PanelDataset, group, period: PeriodRange) -> PeriodSummary:
    """Population-weighted mean rate for ``group`` over ``period``.

    Weights are person-years: each unit-year contributes its population.
    The summary SE combines record SEs in quadrature (present only when all
    records carry one). Missing unit-years raise MissingDataError.
    """
    units = sorted(group)
    if not units:
        raise EmptyGroupError("cannot summarize an empty group")
    missing = [(u, y) for u in units for y in period.years() if not panel.has(u, y)]
    if missing:
        raise MissingDataError(missing)

    total_weight = 0.0
    weighted_sum = 0.0
    var_sum = 0.0
    all_se = True
    for unit in units:
        for year in period.years():
            rec = panel.get(unit, year)
            w = float(rec.population)
            total_weight += w
            weighted_sum += w * rec.rate
            if rec.se is None:
                all_se = False
            elif all_se:
                var_sum += (w * rec.se) ** 2
    mean = weighted_sum / total_weight
    se = math.sqrt(var_sum) / total_weight if all_se else None
    return PeriodSummary(mean=mean, se=se, total_weight=total_weight)


def poisson_rate_se(deaths: int, population: int) -> float:
    """SE of a crude rate per 100,000 under a Poisson count model."""
    if deaths < 0:
        raise OutOfDomainError("deaths must be >= 0")
    if population <= 0:
        raise OutOfDomainError("population must be positive")
    return math.sqrt(deaths) / population * RATE_SCALE


def did_point(
    t_before: PeriodSummary,
    t_after: PeriodSummary,
    c_before: PeriodSummary,
    c_after: PeriodSummary,
) -> float:
    """Moment difference-in-differences: (treated change) - (control change)."""
    return (t_after.mean - t_before.mean) - (c_after.mean - c_before.mean)


def _require_ses(*summaries) -> list:
    ses = []
    for s in summaries:
        if s.se is None:
            raise MissingSEError("all four period summaries must carry SEs")
        ses.append(s.se)
    return ses


def did_se(
    t_before: PeriodSummary,
    t_after: PeriodSummary,
    c_before: PeriodSummary,
    c_after: PeriodSummary,
) -> float:
    """SE of the DiD point under independence of the four cells."""
    ses = _require_ses(t_before, t_after, c_before, c_after)
    return math.sqrt(sum(se * se for se in ses))


def wald_ci(point: float, se: float, alpha: float) -> ConfInterval:
    """Two-sided normal interval, the intersection of two one-sided 1 - alpha/2 intervals."""
    if se < 0:
        raise OutOfDomainError("se must be >= 0")
    z = NormalTail.from_alpha(alpha).z
    return ConfInterval(point - z * se, point + z * se, level=1.0 - alpha)


def pct_denominator(
    t_before: PeriodSummary, c_before: PeriodSummary, c_after: PeriodSummary
) -> float:
    """Counterfactual after-period mean: treated baseline plus the control change."""
    return t_before.mean + (c_after.mean - c_before.mean)


def pct_change(
    point: float,
    t_before: PeriodSummary,
    c_before: PeriodSummary,
    c_after: PeriodSummary,
):
    """Percent change implied by a DiD point; returns (pct_point, denom)."""
    denom = pct_denominator(t_before, c_before, c_after)
    if denom <= 0:
        raise NonpositiveDenominatorError(f"percent denominator {denom} is not positive")
    return 100.0 * point / denom, denom


def pct_change_se_delta(
    t_before: PeriodSummary,
    t_after: PeriodSummary,
    c_before: PeriodSummary,
    c_after: PeriodSummary,
) -> float:
    """Delta-method SE of the percent-change estimate.

    With A the DiD numerator and B the counterfactual denominator, the
    gradient of 100*A/B in the four cell means is (100/B, -100(A+B)/B^2,
    100(A+B)/B^2, -100(A+B)/B^2) for (t_after, t_before, c_before, c_after);
    cells are independent.
    """
    se_tb, se_ta, se_cb, se_ca = (
        _require_ses(t_before, t_after, c_before, c_after)
    )
    a = did_point(t_before, t_after, c_before, c_after)
    b = pct_denominator(t_before, c_before, c_after)
    if b <= 0:
        raise NonpositiveDenominatorError(f"percent denominator {b} is not positive")
    d_ta = 100.0 / b
    d_tb = -100.0 * (a + b) / (b * b)
    d_ca = -100.0 * (a + b) / (b * b)
    d_cb = 100.0 * (a + b) / (b * b)
    return math.sqrt(
        (d_tb * se_tb) ** 2
        + (d_ta * se_ta) ** 2
        + (d_cb * se_cb) ** 2
        + (d_ca * se_ca) ** 2
    )


def pct_ci_scaled(ci: ConfInterval, denom: float) -> ConfInterval:
    """Percent CI obtained by scaling the rate CI endpoints by the denominator."""
    if denom <= 0:
        raise NonpositiveDenominatorError(f"percent denominator {denom} is not positive")
    return ConfInterval(100.0 * ci.lower / denom, 100.0 * ci.upper / denom, level=ci.level)
