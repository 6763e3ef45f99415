"""Data ingestion, configuration, and report emission.

File formats are deliberately plain: CSV for panels, adjacency, and
tables; a flat ``key = value`` config grammar; versioned JSON for machine
reports; hand-built SVG for plots. All writes are atomic
(write-temp-then-rename) and byte-deterministic for fixed inputs.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import ConfigError, DataError, InvariantError, ParseError, SchemaError
from .estimation import poisson_rate_se
from .model import (
    BracketReport,
    ConfInterval,
    PanelDataset,
    PanelRecord,
    PeriodRange,
    StudyDesign,
)
from .placebo import AdjacencyGraph

PANEL_REQUIRED = ("unit", "year", "rate", "population")
PANEL_OPTIONAL = ("se", "deaths")
SCHEMA_VERSION = 1

BUNDLED = "bundled"  # sentinel path meaning the packaged data file


def bundled_path(name: str) -> Path:
    return Path(resources.files("didbracket").joinpath("data", name))


def resolve_data_path(value, default_name: str) -> Path:
    if value in (None, BUNDLED):
        return bundled_path(default_name)
    return Path(value)


def _parse_float(text: str, path, line_no: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, line_no, f"column {column!r}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(path, line_no, f"column {column!r}: non-finite value")
    return value


def _parse_int(text: str, path, line_no: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(path, line_no, f"column {column!r}: not an integer: {text!r}") from None


def parse_panel_csv(path) -> PanelDataset:
    """Strict parse of a unit-year panel CSV.

    Header required; columns must be unit,year,rate,population plus
    optionally se and deaths. Rows carrying deaths but no se get the
    Poisson-model se derived for them. Any malformed row aborts with its
    line number.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"panel file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header required") from None
        cols = [c.strip() for c in header]
        missing = [c for c in PANEL_REQUIRED if c not in cols]
        unknown = [c for c in cols if c not in PANEL_REQUIRED + PANEL_OPTIONAL]
        if missing or unknown:
            raise SchemaError(
                f"{path}: header must contain {PANEL_REQUIRED} and only "
                f"optional {PANEL_OPTIONAL}; missing={missing} unknown={unknown}"
            )
        idx = {c: i for i, c in enumerate(cols)}
        records = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(cols):
                raise ParseError(path, line_no, f"expected {len(cols)} fields, got {len(row)}")
            unit = row[idx["unit"]].strip()
            if not unit:
                raise ParseError(path, line_no, "empty unit id")
            year = _parse_int(row[idx["year"]], path, line_no, "year")
            rate = _parse_float(row[idx["rate"]], path, line_no, "rate")
            if rate < 0:
                raise ParseError(path, line_no, f"negative rate {rate}")
            population = _parse_int(row[idx["population"]], path, line_no, "population")
            if population <= 0:
                raise ParseError(path, line_no, f"nonpositive population {population}")
            se = None
            if "se" in idx and row[idx["se"]].strip():
                se = _parse_float(row[idx["se"]], path, line_no, "se")
                if se < 0:
                    raise ParseError(path, line_no, f"negative se {se}")
            deaths = None
            if "deaths" in idx and row[idx["deaths"]].strip():
                deaths = _parse_int(row[idx["deaths"]], path, line_no, "deaths")
                if deaths < 0:
                    raise ParseError(path, line_no, f"negative deaths {deaths}")
            if se is None and deaths is not None:
                se = poisson_rate_se(deaths, population)
            records.append(
                PanelRecord(
                    unit_id=unit, year=year, rate=rate, population=population, se=se,
                    deaths=deaths,
                )
            )
    try:
        return PanelDataset(records)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_panel_csv(panel: PanelDataset, path) -> None:
    """Inverse of parse_panel_csv for valid panels (field-for-field)."""
    rows = sorted(panel.records, key=lambda r: (r.unit_id, r.year))
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["unit", "year", "rate", "se", "deaths", "population"])
    for r in rows:
        writer.writerow(
            [
                r.unit_id,
                r.year,
                format_number(r.rate),
                "" if r.se is None else format_number(r.se),
                "" if r.deaths is None else r.deaths,
                r.population,
            ]
        )
    atomic_write_text(path, buf.getvalue())


def parse_adjacency_csv(path) -> AdjacencyGraph:
    """Parse the two-column undirected edge list (header unit_a,unit_b)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"adjacency file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header required") from None
        if [c.strip() for c in header] != ["unit_a", "unit_b"]:
            raise SchemaError(f"{path}: header must be exactly unit_a,unit_b")
        pairs = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                raise ParseError(path, line_no, "expected two nonempty fields")
            a, b = row[0].strip(), row[1].strip()
            if a == b:
                raise ParseError(path, line_no, f"self-edge on {a!r}")
            pairs.append((a, b))
    return AdjacencyGraph.from_pairs(pairs)


# --- configuration -----------------------------------------------------------

CONFIG_KEYS = {
    "panel", "adjacency", "treated", "candidates", "lower_controls",
    "upper_controls", "prestudy", "before", "after", "alpha", "split_year",
    "exclusions", "format", "emit_plots", "out_dir", "seed", "reps",
    "scenario", "mode", "tau", "bin_width", "rank_unit",
}


@dataclass
class AnalysisConfig:
    """Flat configuration; flags override file values, file overrides defaults."""

    panel: str = BUNDLED
    adjacency: str = BUNDLED
    treated: Optional[str] = None
    candidates: tuple = ()          # unit ids, or ("neighbors",)
    lower_controls: tuple = ()
    upper_controls: tuple = ()
    prestudy: Optional[PeriodRange] = None
    before: Optional[PeriodRange] = None
    after: Optional[PeriodRange] = None
    alpha: float = 0.05
    split_year: Optional[int] = None
    exclusions: tuple = ()
    format: str = "json"
    emit_plots: bool = False
    out_dir: str = "out"
    seed: int = 0
    reps: int = 1000
    scenario: str = "linear_interaction"
    mode: str = "bracket"
    tau: float = 0.35
    bin_width: float = 0.25
    rank_unit: Optional[str] = None
    sources: dict = field(default_factory=dict)


def parse_period(text: str) -> PeriodRange:
    """Parse 'START-END' or a single year."""
    text = text.strip()
    try:
        if "-" in text[1:]:
            start, _, end = text.partition("-")
            return PeriodRange(int(start), int(end))
        return PeriodRange(int(text), int(text))
    except (ValueError, DataError) as exc:
        raise ConfigError(f"bad period {text!r}: {exc}") from None


def parse_config_text(text: str, origin: str = "<config>", allowed=None) -> dict:
    """Parse the flat config grammar.

    One ``key = value`` per line; blank lines and lines starting with '#'
    ignored; list values comma-separated; booleans true/false; periods as
    START-END year ranges. Unknown keys are errors.
    """
    if allowed is None:
        allowed = CONFIG_KEYS
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in allowed:
            raise ConfigError(f"{origin}:{line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{origin}:{line_no}: duplicate key {key!r}")
        values[key] = value
    return values


def _as_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {value!r}")


def _as_list(value: str) -> tuple:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def config_from_values(values: dict) -> AnalysisConfig:
    cfg = AnalysisConfig()
    cfg.sources = dict(values)
    for key, value in values.items():
        try:
            if key in ("prestudy", "before", "after"):
                setattr(cfg, key, parse_period(value))
            elif key in ("candidates", "lower_controls", "upper_controls", "exclusions"):
                setattr(cfg, key, _as_list(value))
            elif key in ("alpha", "tau", "bin_width"):
                setattr(cfg, key, float(value))
            elif key in ("split_year", "seed", "reps"):
                setattr(cfg, key, int(value))
            elif key == "emit_plots":
                cfg.emit_plots = _as_bool(value, key)
            elif key == "format":
                if value not in ("json", "csv"):
                    raise ConfigError(f"format must be json or csv, got {value!r}")
                cfg.format = value
            else:
                setattr(cfg, key, value)
        except ValueError:
            raise ConfigError(f"{key}: bad value {value!r}") from None
    return cfg


def load_config(path) -> AnalysisConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return config_from_values(parse_config_text(path.read_text(encoding="utf-8"), str(path)))


def resolve_design(cfg: AnalysisConfig, panel: PanelDataset,
                   adjacency: Optional[AdjacencyGraph]) -> StudyDesign:
    """Build a StudyDesign from configuration.

    Explicit lower/upper control lists win; otherwise candidates (or the
    treated unit's neighbors) are classified against the pre-study period.
    """
    for key in ("treated", "prestudy", "before", "after"):
        if getattr(cfg, key) in (None, ""):
            raise ConfigError(f"missing required config key {key!r}")
    if cfg.lower_controls and cfg.upper_controls:
        lower, upper = frozenset(cfg.lower_controls), frozenset(cfg.upper_controls)
    else:
        if cfg.candidates == ("neighbors",) or not cfg.candidates:
            if adjacency is None:
                raise ConfigError("candidates = neighbors requires an adjacency file")
            candidates = adjacency.neighbors(cfg.treated) & panel.units
        else:
            candidates = frozenset(cfg.candidates)
        from .bracketing import construct_control_groups

        groups = construct_control_groups(panel, cfg.treated, candidates, cfg.prestudy)
        lower, upper = groups.lower, groups.upper
    return StudyDesign(
        treated=cfg.treated,
        lower_controls=lower,
        upper_controls=upper,
        prestudy=cfg.prestudy,
        before=cfg.before,
        after=cfg.after,
    )


# --- scenario files -----------------------------------------------------------

SCENARIO_KEYS = {
    "effect", "confounder_kind", "confounder_lc", "confounder_t", "confounder_uc",
    "confounder_sd", "time_effect", "tau_shift", "gamma", "noise_sd", "n_per_cell",
    "drift_lc", "drift_t", "drift_uc", "drift_sd",
}


def scenario_from_values(values: dict):
    """Build a simulation scenario from flat key = value pairs.

    Required: effect, confounder_kind, confounder_lc/t/uc, time_effect.
    Optional: confounder_sd, tau_shift, gamma, noise_sd, n_per_cell, and the
    drift_* block (all four drift keys together).
    """
    from .errors import InvalidScenarioError
    from .simulation import ConfounderSpec, DriftSpec, Scenario

    unknown = set(values) - SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    required = {"effect", "confounder_kind", "confounder_lc", "confounder_t",
                "confounder_uc", "time_effect"}
    missing = required - set(values)
    if missing:
        raise ConfigError(f"missing scenario keys: {sorted(missing)}")

    def num(key, default=None):
        if key not in values:
            return default
        try:
            return float(values[key])
        except ValueError:
            raise ConfigError(f"{key}: bad number {values[key]!r}") from None

    drift_keys = {k for k in values if k.startswith("drift_")}
    drift = None
    if drift_keys:
        if drift_keys != {"drift_lc", "drift_t", "drift_uc", "drift_sd"}:
            raise ConfigError("drift requires all of drift_lc, drift_t, drift_uc, drift_sd")
        drift = DriftSpec(
            lc=num("drift_lc"), t=num("drift_t"), uc=num("drift_uc"), sd=num("drift_sd")
        )
    try:
        return Scenario(
            effect=num("effect"),
            confounder=ConfounderSpec(
                kind=values["confounder_kind"],
                lc=num("confounder_lc"),
                t=num("confounder_t"),
                uc=num("confounder_uc"),
                sd=num("confounder_sd", 1.0),
            ),
            time_effect=values["time_effect"],
            tau=num("tau_shift", 0.0),
            gamma=num("gamma", 0.0),
            noise_sd=num("noise_sd", 0.0),
            n_per_cell=int(num("n_per_cell", 100)),
            drift=drift,
        )
    except InvalidScenarioError as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None


def load_scenario(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    values = parse_config_text(
        path.read_text(encoding="utf-8"), str(path), allowed=SCENARIO_KEYS
    )
    return scenario_from_values(values)


# --- emission ----------------------------------------------------------------


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_number(x: float) -> str:
    """Stable decimal rendering for CSV tables (6 decimals, no exponent)."""
    if not math.isfinite(x):
        raise InvariantError(f"refusing to serialize non-finite value {x!r}")
    text = f"{x:.6f}".rstrip("0").rstrip(".")
    return text if text not in ("", "-0") else "0"


def _assert_finite(obj, where="report"):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise InvariantError(f"non-finite number in {where}")
    elif isinstance(obj, dict):
        for k, v in obj.items():
            _assert_finite(v, f"{where}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _assert_finite(v, f"{where}[{i}]")


def to_json(payload: dict) -> str:
    _assert_finite(payload)
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def ci_dict(ci: ConfInterval) -> dict:
    return {"lower": ci.lower, "upper": ci.upper, "level": ci.level}


def effect_dict(est) -> dict:
    return {
        "point": est.point,
        "se": est.se,
        "ci": ci_dict(est.ci),
        "pct_point": est.pct_point,
        "pct_ci": ci_dict(est.pct_ci),
        "pct_se_delta": est.pct_se_delta,
        "denom": est.denom,
    }


def bracket_report_dict(report: BracketReport, design: StudyDesign) -> dict:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "alpha": report.alpha,
        "design": {
            "treated": design.treated,
            "lower_controls": sorted(design.lower_controls),
            "upper_controls": sorted(design.upper_controls),
            "prestudy": str(design.prestudy),
            "before": str(design.before),
            "after": str(design.after),
        },
        "lower_ctrl": effect_dict(report.est_lower_ctrl),
        "upper_ctrl": effect_dict(report.est_upper_ctrl),
        "bracket": list(report.bracket),
        "minmax_ci": ci_dict(report.minmax_ci),
        "ordering": {
            "period": str(report.ordering.period),
            "upper_minus_treated": {
                "point": report.ordering.diff_uc_minus_t.point,
                "ci": ci_dict(report.ordering.diff_uc_minus_t.ci),
            },
            "treated_minus_lower": {
                "point": report.ordering.diff_t_minus_lc.point,
                "ci": ci_dict(report.ordering.diff_t_minus_lc.ci),
            },
            "flags": list(report.ordering.flags),
        },
    }
    if report.est_all_ctrl is not None:
        payload["all_controls"] = effect_dict(report.est_all_ctrl)
        payload["all_controls"]["note"] = report.all_ctrl_note
    if report.diagnostics is not None:
        payload["diagnostics"] = [
            {
                "pattern": d.pattern,
                "split_year": d.split_year,
                "p_a": d.p_a,
                "p_b": d.p_b,
                "iu_pvalue": d.iu_pvalue,
                "evidence": d.evidence,
                "alpha": d.alpha,
            }
            for d in report.diagnostics
        ]
    return payload


def round_half_up(x: float, digits: int = 0) -> float:
    """Display rounding: half away from zero, matching published tables."""
    scale = 10.0**digits
    return math.copysign(math.floor(abs(x) * scale + 0.5) / scale, x)


def display_rate(x: float) -> str:
    return f"{round_half_up(x, 1):.1f}"


def display_pct(x: float) -> str:
    return f"{round_half_up(x, 0):.0f}%"


def summary_text(report: BracketReport, design: StudyDesign) -> str:
    """Human-readable summary; display rounding only, computation untouched."""
    lines = [
        f"Bracketing analysis: treated={design.treated}",
        f"  periods: prestudy {design.prestudy}, before {design.before}, after {design.after}",
        f"  lower controls: {', '.join(sorted(design.lower_controls))}",
        f"  upper controls: {', '.join(sorted(design.upper_controls))}",
        "",
        "Control group   Estimate  CI                Pct    Pct CI",
    ]

    def row(label, est):
        ci = f"[{display_rate(est.ci.lower)}, {display_rate(est.ci.upper)}]"
        pci = f"[{display_pct(est.pct_ci.lower)}, {display_pct(est.pct_ci.upper)}]"
        return (
            f"{label:<15} {display_rate(est.point):>8}  {ci:<17} "
            f"{display_pct(est.pct_point):>5}  {pci}"
        )

    if report.est_all_ctrl is not None:
        lines.append(row("All controls", report.est_all_ctrl) + f"   ({report.all_ctrl_note})")
    lines.append(row("Upper controls", report.est_upper_ctrl))
    lines.append(row("Lower controls", report.est_lower_ctrl))
    lines += [
        "",
        f"bracket: [{display_rate(report.bracket[0])}, {display_rate(report.bracket[1])}]",
        f"min-max {100 * (1 - report.alpha):.0f}% CI: "
        f"[{display_rate(report.minmax_ci.lower)}, {display_rate(report.minmax_ci.upper)}]",
        "ordering check (before period): "
        f"upper-treated {display_rate(report.ordering.diff_uc_minus_t.point)}, "
        f"treated-lower {display_rate(report.ordering.diff_t_minus_lc.point)}",
    ]
    if report.ordering.flags:
        lines.append("  flags: " + ", ".join(report.ordering.flags))
    if report.diagnostics:
        for diag in report.diagnostics:
            lines.append(
                f"pattern {diag.pattern}: iu p-value {diag.iu_pvalue:.3f} "
                f"(components {diag.p_a:.3f}, {diag.p_b:.3f}) -> "
                + ("evidence of violation" if diag.evidence else "no evidence")
            )
    return "\n".join(lines) + "\n"


def rows_to_csv(header, rows) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [format_number(v) if isinstance(v, float) else v for v in row]
        )
    return buf.getvalue()


# --- SVG ---------------------------------------------------------------------

_SVG_W, _SVG_H, _SVG_PAD = 640, 400, 48
_SERIES_COLORS = {"treated": "#000000", "lower": "#c0392b", "upper": "#2c5aa0"}


def _scale(vmin, vmax, size, pad):
    span = (vmax - vmin) or 1.0
    return lambda v: pad + (v - vmin) / span * (size - 2 * pad)


def line_chart_svg(rows) -> str:
    """Static line chart with CI bars from relative-trends rows."""
    xs = [r.year for r in rows]
    los = [r.ci_lower for r in rows]
    his = [r.ci_upper for r in rows]
    sx = _scale(min(xs), max(xs), _SVG_W, _SVG_PAD)
    sy_raw = _scale(min(los), max(his), _SVG_H, _SVG_PAD)
    sy = lambda v: _SVG_H - sy_raw(v)  # noqa: E731  (flip: SVG y grows downward)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
    ]
    groups = sorted({r.group for r in rows})
    for group in groups:
        color = _SERIES_COLORS.get(group, "#555555")
        series = [r for r in rows if r.group == group]
        points = " ".join(f"{sx(r.year):.2f},{sy(r.mean):.2f}" for r in series)
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'stroke-dasharray="4 3" points="{points}"/>'
        )
        for r in series:
            x = sx(r.year)
            parts.append(
                f'<line x1="{x:.2f}" y1="{sy(r.ci_lower):.2f}" '
                f'x2="{x:.2f}" y2="{sy(r.ci_upper):.2f}" stroke="{color}" stroke-width="1"/>'
            )
        parts.append(
            f'<text x="{_SVG_W - _SVG_PAD + 4}" y="{sy(series[-1].mean):.2f}" '
            f'fill="{color}" font-size="12">{group}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def histogram_svg(bins, marker: Optional[float] = None) -> str:
    """Static histogram; optional dashed vertical marker (e.g. the treated unit)."""
    if not bins:
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}">'
            "</svg>\n"
        )
    vmin = min(b.lower for b in bins)
    vmax = max(b.upper for b in bins)
    cmax = max(b.count for b in bins)
    sx = _scale(vmin, vmax, _SVG_W, _SVG_PAD)
    sy = _scale(0, cmax, _SVG_H, _SVG_PAD)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
    ]
    for b in bins:
        x0, x1 = sx(b.lower), sx(b.upper)
        height = sy(b.count) - sy(0)
        y = _SVG_H - _SVG_PAD - height
        parts.append(
            f'<rect x="{x0:.2f}" y="{y:.2f}" width="{x1 - x0:.2f}" height="{height:.2f}" '
            'fill="#9bb7d4" stroke="#2c5aa0"/>'
        )
    if marker is not None and vmin <= marker <= vmax:
        x = sx(marker)
        parts.append(
            f'<line x1="{x:.2f}" y1="{_SVG_PAD}" x2="{x:.2f}" y2="{_SVG_H - _SVG_PAD}" '
            'stroke="black" stroke-dasharray="6 4"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
