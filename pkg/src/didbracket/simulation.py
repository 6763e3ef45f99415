"""Monte Carlo verification of the bracketing bounds and min-max coverage.

Data are generated from the group-confounder model the method assumes: a
latent confounder drawn once per unit and reused across periods, a time
profile that may amplify it after the intervention, independent noise, and
the treatment effect added only to the treated-after cell. Replications
use per-replication child seeds of one named generator (PCG64), so runs
reproduce across platforms and are order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidScenarioError, OutOfDomainError
from .estimation import did_point, did_se, wald_ci
from .model import PeriodSummary

GROUPS = ("lc", "t", "uc")
TIME_EFFECTS = ("additive", "linear_interaction", "convex_after")


@dataclass(frozen=True)
class ConfounderSpec:
    """Latent-confounder distribution per group, ordered lc <= t <= uc.

    kind="normal": lc/t/uc are means with common sd.
    kind="exponential": lc/t/uc are scales (sd ignored).
    """

    kind: str
    lc: float
    t: float
    uc: float
    sd: float = 1.0

    def __post_init__(self):
        if self.kind not in ("normal", "exponential"):
            raise InvalidScenarioError(f"unknown confounder kind {self.kind!r}")
        if not self.lc <= self.t <= self.uc:
            raise InvalidScenarioError(
                f"confounder parameters must be ordered lc <= t <= uc, got "
                f"({self.lc}, {self.t}, {self.uc})"
            )
        if self.kind == "normal" and self.sd < 0:
            raise InvalidScenarioError("normal confounder sd must be >= 0")
        if self.kind == "exponential" and self.lc <= 0:
            raise InvalidScenarioError("exponential scales must be positive")

    def param(self, group: str) -> float:
        return {"lc": self.lc, "t": self.t, "uc": self.uc}[group]


@dataclass(frozen=True)
class DriftSpec:
    """After-period confounder drift (latent value change), normal per group.

    The bracketing bounds survive drift when the drift distributions are
    themselves ordered lc <= t <= uc; a violated ordering is allowed here
    but flagged, so the effect of breaking the condition can be studied.
    """

    lc: float
    t: float
    uc: float
    sd: float = 0.0

    def __post_init__(self):
        if self.sd < 0:
            raise InvalidScenarioError("drift sd must be >= 0")

    def ordered(self) -> bool:
        return self.lc <= self.t <= self.uc

    def param(self, group: str) -> float:
        return {"lc": self.lc, "t": self.t, "uc": self.uc}[group]


@dataclass(frozen=True)
class Scenario:
    """One data-generating configuration for the Monte Carlo experiments."""

    effect: float
    confounder: ConfounderSpec
    time_effect: str
    noise_sd: float = 0.0
    n_per_cell: int = 100
    tau: float = 0.0      # additive common time shift
    gamma: float = 0.0    # interaction slope for linear_interaction
    drift: Optional[DriftSpec] = None

    def __post_init__(self):
        if self.time_effect not in TIME_EFFECTS:
            raise InvalidScenarioError(f"unknown time effect {self.time_effect!r}")
        if self.noise_sd < 0:
            raise InvalidScenarioError("noise_sd must be >= 0")
        if self.n_per_cell < 1:
            raise InvalidScenarioError("n_per_cell must be >= 1")
        if (
            self.time_effect == "convex_after"
            and self.confounder.kind == "exponential"
            and self.confounder.uc >= 1.0
        ):
            raise InvalidScenarioError(
                "convex_after with exponential confounders needs scales < 1 "
                "for a finite after-period mean"
            )

    def assumption_flags(self) -> tuple:
        if self.drift is not None and not self.drift.ordered():
            return ("AssumptionViolation:drift_ordering",)
        return ()


def _time_profile(scenario: Scenario, u: np.ndarray, period: int) -> np.ndarray:
    if scenario.time_effect == "additive":
        return u + scenario.tau * period
    if scenario.time_effect == "linear_interaction":
        return u * (1.0 + scenario.gamma * period)
    return np.exp(u) if period == 1 else u  # convex_after


@dataclass(frozen=True)
class SimulatedPanel:
    """Cell-level view of one simulated draw: mean, SE, n per (group, period)."""

    cells: dict  # (group, period) -> PeriodSummary
    effect: float

    def summary(self, group: str, period: int) -> PeriodSummary:
        return self.cells[(group, period)]

    def arm_points(self) -> tuple:
        """(estimate vs lower controls, estimate vs upper controls)."""
        t0, t1 = self.summary("t", 0), self.summary("t", 1)
        return (
            did_point(t0, t1, self.summary("lc", 0), self.summary("lc", 1)),
            did_point(t0, t1, self.summary("uc", 0), self.summary("uc", 1)),
        )

    def arm_cis(self, alpha: float) -> tuple:
        t0, t1 = self.summary("t", 0), self.summary("t", 1)
        out = []
        for group in ("lc", "uc"):
            c0, c1 = self.summary(group, 0), self.summary(group, 1)
            point = did_point(t0, t1, c0, c1)
            out.append(wald_ci(point, did_se(t0, t1, c0, c1), alpha))
        return tuple(out)


def _cell_summary(values: np.ndarray) -> PeriodSummary:
    n = values.size
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return PeriodSummary(mean=float(values.mean()), se=se, total_weight=float(n))


def _draw_confounder(rng, spec: ConfounderSpec, group: str, n: int) -> np.ndarray:
    if spec.kind == "normal":
        return rng.normal(spec.param(group), spec.sd, n)
    return rng.exponential(spec.param(group), n)


def _generate(scenario: Scenario, rng) -> SimulatedPanel:
    n = scenario.n_per_cell
    cells = {}
    for group in GROUPS:
        u0 = _draw_confounder(rng, scenario.confounder, group, n)
        if scenario.drift is not None:
            u1 = u0 + rng.normal(scenario.drift.param(group), scenario.drift.sd, n)
        else:
            u1 = u0
        eps0 = rng.normal(0.0, scenario.noise_sd, n) if scenario.noise_sd else np.zeros(n)
        eps1 = rng.normal(0.0, scenario.noise_sd, n) if scenario.noise_sd else np.zeros(n)
        y0 = _time_profile(scenario, u0, 0) + eps0
        y1 = _time_profile(scenario, u1, 1) + eps1
        if group == "t":
            y1 = y1 + scenario.effect
        cells[(group, 0)] = _cell_summary(y0)
        cells[(group, 1)] = _cell_summary(y1)
    return SimulatedPanel(cells=cells, effect=scenario.effect)


def generate_panel(scenario: Scenario, seed: int) -> SimulatedPanel:
    """One simulated draw; identical seeds give identical panels."""
    return _generate(scenario, np.random.default_rng(np.random.SeedSequence(seed)))


def _rep_rngs(seed: int, reps: int):
    for child in np.random.SeedSequence(seed).spawn(reps):
        yield np.random.default_rng(child)


@dataclass(frozen=True)
class McReport:
    reps: int
    true_effect: float
    mean_effect_lc: float
    mcse_lc: float
    mean_effect_uc: float
    mcse_uc: float
    bracket_holds: bool
    coverage: Optional[float] = None
    flags: tuple = field(default=())

    def __post_init__(self):
        if self.coverage is not None and not 0.0 <= self.coverage <= 1.0:
            raise InvalidScenarioError("coverage must lie in [0, 1]")


def _mc_summary(points: np.ndarray):
    mean = float(points.mean())
    mcse = float(points.std(ddof=1) / math.sqrt(points.size)) if points.size > 1 else 0.0
    return mean, mcse


def verify_bracketing(scenario: Scenario, reps: int, seed: int) -> McReport:
    """Average both arm estimators over replications and check the bounds.

    bracket_holds allows three Monte Carlo standard errors of slack on
    each side, so a true boundary case (additive time effect) still
    registers as holding.
    """
    if reps < 1:
        raise OutOfDomainError("reps must be >= 1")
    lc = np.empty(reps)
    uc = np.empty(reps)
    for i, rng in enumerate(_rep_rngs(seed, reps)):
        lc[i], uc[i] = _generate(scenario, rng).arm_points()
    mean_lc, mcse_lc = _mc_summary(lc)
    mean_uc, mcse_uc = _mc_summary(uc)
    slack = 3.0 * max(mcse_lc, mcse_uc)
    lo, hi = min(mean_lc, mean_uc), max(mean_lc, mean_uc)
    return McReport(
        reps=reps,
        true_effect=scenario.effect,
        mean_effect_lc=mean_lc,
        mcse_lc=mcse_lc,
        mean_effect_uc=mean_uc,
        mcse_uc=mcse_uc,
        bracket_holds=(lo - slack <= scenario.effect <= hi + slack),
        flags=scenario.assumption_flags(),
    )


@dataclass(frozen=True)
class CoverageResult:
    coverage: float
    mcse: float
    reps: int
    alpha: float


def coverage_experiment(
    scenario: Scenario, reps: int, alpha: float, seed: int
) -> CoverageResult:
    """Fraction of replications whose min-max interval contains the effect."""
    if reps < 100:
        raise OutOfDomainError("coverage experiments need reps >= 100")
    hits = 0
    for rng in _rep_rngs(seed, reps):
        ci_lc, ci_uc = _generate(scenario, rng).arm_cis(alpha)
        lower = min(ci_lc.lower, ci_uc.lower)
        upper = max(ci_lc.upper, ci_uc.upper)
        if lower <= scenario.effect <= upper:
            hits += 1
    coverage = hits / reps
    mcse = math.sqrt(coverage * (1.0 - coverage) / reps)
    return CoverageResult(coverage=coverage, mcse=mcse, reps=reps, alpha=alpha)


def time_varying_scenario_check(scenario: Scenario, reps: int, seed: int) -> McReport:
    """verify_bracketing for a scenario with confounder drift.

    The drift ordering condition is not enforced: a violated ordering is
    reported through the AssumptionViolation flag so the resulting bracket
    failure can be observed rather than asserted away.
    """
    if scenario.drift is None:
        raise InvalidScenarioError("scenario has no confounder drift configured")
    return verify_bracketing(scenario, reps, seed)


# Appendix-style synthetic-control comparison: exponential confounders with
# these scales in the lower and upper control groups, identity before and
# exponential after.
SYNTH_LOWER_SCALE = 0.2
SYNTH_UPPER_SCALE = 0.5


@dataclass(frozen=True)
class SynthControlResult:
    tau: float
    weight_lower: float
    weight_upper: float
    synthetic_before_mean: float
    synthetic_after_mean: float
    counterfactual_after_mean: float
    bias: float
    mode: str


def synthetic_control_comparison(
    tau: float, analytic: bool = True, reps: int = 1_000_000, seed: int = 0
) -> SynthControlResult:
    """Bias of the before-period-matching convex combination of controls.

    The weights are the unique convex pair on the control scales that
    reproduces the treated group's before-period mean tau; the comparison
    is between that combination's after-period mean and the treated
    group's counterfactual after-period mean. Analytic mode uses
    E[exp(U)] = 1/(1 - scale); Monte Carlo mode estimates the same means
    from draws.
    """
    if not SYNTH_LOWER_SCALE < tau < SYNTH_UPPER_SCALE:
        raise OutOfDomainError(
            f"tau must lie strictly between {SYNTH_LOWER_SCALE} and {SYNTH_UPPER_SCALE}"
        )
    span = SYNTH_UPPER_SCALE - SYNTH_LOWER_SCALE
    w_lower = (SYNTH_UPPER_SCALE - tau) / span
    w_upper = (tau - SYNTH_LOWER_SCALE) / span
    if analytic:
        synth_before = w_lower * SYNTH_LOWER_SCALE + w_upper * SYNTH_UPPER_SCALE
        synth_after = w_lower / (1.0 - SYNTH_LOWER_SCALE) + w_upper / (1.0 - SYNTH_UPPER_SCALE)
        counterfactual = 1.0 / (1.0 - tau)
        mode = "analytic"
    else:
        if reps < 1:
            raise OutOfDomainError("reps must be >= 1")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        u_lower = rng.exponential(SYNTH_LOWER_SCALE, reps)
        u_upper = rng.exponential(SYNTH_UPPER_SCALE, reps)
        u_treated = rng.exponential(tau, reps)
        synth_before = w_lower * float(u_lower.mean()) + w_upper * float(u_upper.mean())
        synth_after = w_lower * float(np.exp(u_lower).mean()) + w_upper * float(
            np.exp(u_upper).mean()
        )
        counterfactual = float(np.exp(u_treated).mean())
        mode = "monte_carlo"
    return SynthControlResult(
        tau=tau,
        weight_lower=w_lower,
        weight_upper=w_upper,
        synthetic_before_mean=synth_before,
        synthetic_after_mean=synth_after,
        counterfactual_after_mean=counterfactual,
        bias=synth_after - counterfactual,
        mode=mode,
    )


def shipped_scenarios() -> dict:
    """Named scenarios used by the CLI and the acceptance experiments."""
    return {
        "additive": Scenario(
            effect=1.0,
            confounder=ConfounderSpec("normal", 0.0, 1.0, 2.0, sd=1.0),
            time_effect="additive",
            tau=0.5,
            noise_sd=0.5,
            n_per_cell=200,
        ),
        "linear_interaction": Scenario(
            effect=1.0,
            confounder=ConfounderSpec("normal", 0.0, 1.0, 2.0, sd=1.0),
            time_effect="linear_interaction",
            gamma=0.5,
            noise_sd=0.5,
            n_per_cell=100,
        ),
        "linear_interaction_neg": Scenario(
            effect=1.0,
            confounder=ConfounderSpec("normal", 0.0, 1.0, 2.0, sd=1.0),
            time_effect="linear_interaction",
            gamma=-0.5,
            noise_sd=0.5,
            n_per_cell=100,
        ),
        "convex_after": Scenario(
            effect=1.0,
            confounder=ConfounderSpec("exponential", 0.2, 0.3, 0.4),
            time_effect="convex_after",
            noise_sd=0.5,
            n_per_cell=200,
        ),
        "time_varying": Scenario(
            effect=1.0,
            confounder=ConfounderSpec("normal", 0.0, 0.5, 1.0, sd=0.5),
            time_effect="convex_after",
            noise_sd=0.5,
            n_per_cell=200,
            drift=DriftSpec(lc=0.0, t=0.1, uc=0.2, sd=0.1),
        ),
    }
