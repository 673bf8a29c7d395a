"""Experiment specs, seeded Monte-Carlo orchestration and CSV/plot emission.

A spec is a flat text file of ``key = value`` lines with dotted keys and ``#``
comments. Powers are written in dBm or dB and converted to linear units once,
in :func:`parse_spec`; everything downstream is linear until values are
formatted for output.
"""

from __future__ import annotations

import concurrent.futures as cf
import dataclasses
import hashlib
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import SchemeTag, gas_initial_layout, grid_sites, run_scheme
from .bcd import InfeasibleError
from .config import (
    BcdConfig,
    PenaltyConfig,
    ScenarioConfig,
    ScenarioGeometry,
    db_to_linear,
    dbm_to_watt,
    linear_to_db,
    watt_to_dbm,
)
from .geometry import planar_grid, sample_channels

log = logging.getLogger(__name__)

__all__ = [
    "SpecError",
    "ExperimentSpec",
    "ResultRow",
    "TrialOutcome",
    "ExperimentResult",
    "DEFAULTS",
    "PRESETS",
    "parse_spec",
    "load_spec",
    "apply_overrides",
    "run_trial",
    "run_experiment",
    "write_outputs",
    "format_number",
    "parse_seeds",
]

DESK_SIZES = {"scenario.users": "2", "scenario.antennas": "4", "scenario.ris_elements": "16"}


class SpecError(ValueError):
    """Spec could not be parsed or validated; ``errors`` lists ``field: message`` strings."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# key -> (default text, kind). Defaults are the full-scale simulation parameters.
DEFAULTS: dict[str, tuple[str, str]] = {
    "scenario.users": ("3", "int"),
    "scenario.antennas": ("8", "int"),
    "scenario.ris_elements": ("32", "int"),
    "scenario.paths": ("4", "int"),
    "scenario.wavelength": ("0.1", "float"),
    "scenario.min_distance": ("auto", "float_auto"),  # auto = wavelength / 2
    "scenario.region_size": ("auto", "float_auto"),  # auto = 2 * wavelength
    "scenario.power_dbm": ("30", "float"),
    "scenario.qos_db": ("10", "float"),
    "scenario.noise_dbm": ("-80", "float"),
    "scenario.radar_noise_dbm": ("-80", "float"),
    "scenario.target_angles_deg": ("30/45", "pairs"),
    "scenario.clutter_angles_deg": ("120/90, 135/60", "pairs"),
    "scenario.target_gain_db": ("0", "float"),
    "scenario.clutter_gain_db": ("0", "float"),
    "geometry.bs": ("0, 0", "point"),
    "geometry.ris": ("30, 5", "point"),
    "geometry.user_center": ("30, 0", "point"),
    "geometry.user_radius": ("3", "float"),
    "geometry.c0_db": ("-30", "float"),
    "geometry.exponent_bs_ris": ("2.4", "float"),
    "geometry.exponent_ris_user": ("2.8", "float"),
    "geometry.exponent_target": ("2.6", "float"),
    "geometry.target_distance": ("40", "float"),
    "sweep.axis": ("none", "choice:none,power,qos"),
    "sweep.values": ("", "floats"),
    "run.schemes": ("proposed", "schemes"),
    "run.seeds": ("20", "seeds"),
    "run.scale": ("paper", "choice:paper,desk"),
    "run.out": ("results", "str"),
    "bcd.outer_tol": ("1e-3", "float"),
    "bcd.max_outer": ("30", "int"),
    "bcd.w_max_inner": ("10", "int"),
    "bcd.w_inner_tol": ("1e-4", "float"),
    "bcd.pos_max_inner": ("15", "int"),
    "bcd.pos_tol": ("1e-4", "float"),
    "bcd.pos_curvature_start": ("0.0625", "float"),
    "bcd.link_rounds": ("1", "int"),
    "bcd.link_tol": ("1e-4", "float"),
    "bcd.rx_adapt_filter": ("true", "bool"),
    "penalty.rho_init_fraction": ("0.05", "float"),
    "penalty.tau": ("5", "float"),
    "penalty.xi1": ("1e-4", "float"),
    "penalty.xi2": ("1e-3", "float"),
    "penalty.max_outer": ("10", "int"),
    "penalty.max_inner": ("20", "int"),
}


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"20"`` -> seeds 0..19; ``"3-7"`` -> 3..7; ``"1, 4, 9"`` -> those seeds."""
    text = text.strip()
    if not text:
        raise ValueError("empty seed list")
    if "," not in text and "-" not in text.lstrip("-"):
        count = int(text)
        if count < 1:
            raise ValueError("seed count must be positive")
        return tuple(range(count))
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part.lstrip("-"):
            lo, hi = part.split("-", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if any(s < 0 for s in seeds):
        raise ValueError("seeds must be nonnegative")
    if len(set(seeds)) != len(seeds):
        raise ValueError("duplicate seeds")
    return tuple(seeds)


def _convert(kind: str, text: str):
    text = text.strip()
    if kind == "int":
        return int(text)
    if kind == "float":
        value = float(text)
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value
    if kind == "float_auto":
        return None if text == "auto" else _convert("float", text)
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind == "str":
        return text
    if kind.startswith("choice:"):
        options = kind.split(":", 1)[1].split(",")
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text
    if kind == "floats":
        return tuple(_convert("float", p) for p in text.split(",") if p.strip())
    if kind == "point":
        parts = [p for p in text.split(",") if p.strip()]
        if len(parts) != 2:
            raise ValueError("expected 'x, y'")
        return tuple(_convert("float", p) for p in parts)
    if kind == "pairs":
        pairs = []
        for item in (p for p in text.split(",") if p.strip()):
            halves = item.split("/")
            if len(halves) != 2:
                raise ValueError("expected 'elevation/azimuth' pairs in degrees")
            pairs.append(tuple(_convert("float", h) for h in halves))
        return tuple(pairs)
    if kind == "schemes":
        names = [p.strip() for p in text.split(",") if p.strip()]
        if not names:
            raise ValueError("no schemes given")
        tags = tuple(SchemeTag(n) for n in names)
        if len(set(tags)) != len(tags):
            raise ValueError("duplicate schemes")
        return tags
    if kind == "seeds":
        return parse_seeds(text)
    raise AssertionError(kind)


@dataclass(frozen=True)
class ExperimentSpec:
    """Normalized experiment: linear-unit scenario plus run settings.

    ``sweep_values`` are linear (Watts for power, ratio for QoS). ``canonical``
    is the fully defaulted key-value text whose SHA-256 tags every output.
    """

    scenario: ScenarioConfig
    bcd: BcdConfig
    sweep_axis: str
    sweep_values: tuple[float, ...]
    schemes: tuple[SchemeTag, ...]
    seeds: tuple[int, ...]
    scale: str
    out: str
    canonical: str = field(repr=False)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical.encode()).hexdigest()

    def points(self) -> tuple[float | None, ...]:
        return self.sweep_values if self.sweep_axis != "none" else (None,)

    def scenario_at(self, value: float | None) -> ScenarioConfig:
        if self.sweep_axis == "power":
            return replace(self.scenario, power=value)
        if self.sweep_axis == "qos":
            return replace(self.scenario, qos=value)
        return self.scenario

    def sweep_label(self, value: float | None) -> float | None:
        """Sweep value in the units it was written in (dBm or dB)."""
        if value is None:
            return None
        return float(watt_to_dbm(value) if self.sweep_axis == "power" else linear_to_db(value))


def _read_pairs(text: str, source: str) -> tuple[dict[str, str], list[str]]:
    values: dict[str, str] = {}
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{source}:{lineno}: expected 'key = value'")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            errors.append(f"{key}: unknown key")
            continue
        if key in values:
            errors.append(f"{key}: given twice")
            continue
        values[key] = value
    return values, errors


def parse_spec(text: str, overrides: dict[str, str] | None = None,
               source: str = "<spec>") -> ExperimentSpec:
    """Parse, default-fill, convert and validate a spec.

    ``overrides`` replace file values key by key (same text syntax). Every
    problem is collected and raised together as :class:`SpecError`.
    """
    given, errors = _read_pairs(text, source)
    for key in overrides or {}:
        if key not in DEFAULTS:
            errors.append(f"{key}: unknown key")
    given.update({k: v for k, v in (overrides or {}).items() if k in DEFAULTS})
    if given.get("run.scale", DEFAULTS["run.scale"][0]).strip() == "desk":
        given.update(DESK_SIZES)

    raw = {k: given.get(k, default) for k, (default, _) in DEFAULTS.items()}
    vals = {}
    for key, (_, kind) in DEFAULTS.items():
        try:
            vals[key] = _convert(kind, raw[key])
        except ValueError as exc:
            errors.append(f"{key}: {exc}")
    if errors:
        raise SpecError(errors)

    errors.extend(_validate(vals))
    if errors:
        raise SpecError(errors)

    lam = vals["scenario.wavelength"]
    geometry = ScenarioGeometry(
        bs=vals["geometry.bs"],
        ris=vals["geometry.ris"],
        user_center=vals["geometry.user_center"],
        user_radius=vals["geometry.user_radius"],
        c0=db_to_linear(vals["geometry.c0_db"]),
        exponent_bs_ris=vals["geometry.exponent_bs_ris"],
        exponent_ris_user=vals["geometry.exponent_ris_user"],
        exponent_target=vals["geometry.exponent_target"],
        target_distance=vals["geometry.target_distance"],
    )
    rad = math.radians
    scenario = ScenarioConfig(
        users=vals["scenario.users"],
        antennas=vals["scenario.antennas"],
        ris_elements=vals["scenario.ris_elements"],
        paths=vals["scenario.paths"],
        wavelength=lam,
        min_distance=vals["scenario.min_distance"],
        region_size=vals["scenario.region_size"],
        power=dbm_to_watt(vals["scenario.power_dbm"]),
        qos=db_to_linear(vals["scenario.qos_db"]),
        noise=dbm_to_watt(vals["scenario.noise_dbm"]),
        radar_noise=dbm_to_watt(vals["scenario.radar_noise_dbm"]),
        target_angles=tuple(rad(a) for a in vals["scenario.target_angles_deg"][0]),
        clutter_angles=tuple(tuple(rad(a) for a in p) for p in vals["scenario.clutter_angles_deg"]),
        target_gain=db_to_linear(vals["scenario.target_gain_db"]),
        clutter_gain=db_to_linear(vals["scenario.clutter_gain_db"]),
        geometry=geometry,
    )
    penalty = PenaltyConfig(**{k.split(".", 1)[1]: v for k, v in vals.items()
                               if k.startswith("penalty.")})
    bcd = BcdConfig(penalty=penalty, **{k.split(".", 1)[1]: v for k, v in vals.items()
                                        if k.startswith("bcd.")})
    axis = vals["sweep.axis"]
    convert = dbm_to_watt if axis == "power" else db_to_linear
    sweep = tuple(convert(x) for x in vals["sweep.values"]) if axis != "none" else ()
    canonical = "".join(f"{k} = {raw[k].strip()}\n" for k in sorted(DEFAULTS))
    return ExperimentSpec(
        scenario=scenario,
        bcd=bcd,
        sweep_axis=axis,
        sweep_values=sweep,
        schemes=vals["run.schemes"],
        seeds=vals["run.seeds"],
        scale=vals["run.scale"],
        out=vals["run.out"],
        canonical=canonical,
    )


def _validate(v) -> list[str]:
    errors = []

    def need(cond, key, msg):
        if not cond:
            errors.append(f"{key}: {msg}")

    for key in ("scenario.users", "scenario.antennas", "scenario.ris_elements", "scenario.paths"):
        need(v[key] >= 1, key, "must be at least 1")
    need(v["scenario.wavelength"] > 0, "scenario.wavelength", "must be positive")
    lam = v["scenario.wavelength"]
    D = v["scenario.min_distance"] if v["scenario.min_distance"] is not None else lam / 2
    A = v["scenario.region_size"] if v["scenario.region_size"] is not None else 2 * lam
    need(D > 0, "scenario.min_distance", "must be positive")
    need(A > 0, "scenario.region_size", "must be positive")
    need(D <= A, "scenario.min_distance", f"minimum spacing {D:g} m exceeds region size {A:g} m")
    targets = v["scenario.target_angles_deg"]
    need(len(targets) == 1, "scenario.target_angles_deg", "exactly one elevation/azimuth pair")
    for key in ("scenario.target_angles_deg", "scenario.clutter_angles_deg"):
        for pair in v[key]:
            need(all(0.0 <= a <= 180.0 for a in pair), key, f"angles {pair} outside [0, 180] degrees")
    need(v["geometry.user_radius"] >= 0, "geometry.user_radius", "must be nonnegative")
    need(v["geometry.target_distance"] > 0, "geometry.target_distance", "must be positive")
    bs, ris, uc = (np.asarray(v[k]) for k in ("geometry.bs", "geometry.ris", "geometry.user_center"))
    need(np.hypot(*(ris - bs)) > 0, "geometry.ris", "coincides with the base station")
    need(np.hypot(*(ris - uc)) > v["geometry.user_radius"], "geometry.user_radius",
         "user disc reaches the RIS")
    for key in ("bcd.outer_tol", "bcd.w_inner_tol", "bcd.pos_tol", "bcd.link_tol",
                "bcd.pos_curvature_start", "penalty.rho_init_fraction", "penalty.xi1", "penalty.xi2"):
        need(v[key] > 0, key, "must be positive")
    for key in ("bcd.max_outer", "bcd.w_max_inner", "bcd.pos_max_inner", "bcd.link_rounds",
                "penalty.max_outer", "penalty.max_inner"):
        need(v[key] >= 1, key, "must be at least 1")
    need(v["penalty.tau"] > 1, "penalty.tau", "must exceed 1")

    axis, values = v["sweep.axis"], v["sweep.values"]
    if axis == "none":
        need(not values, "sweep.values", "given without a sweep axis")
    else:
        need(len(values) >= 1, "sweep.values", f"a {axis} sweep needs at least one value")
        need(len(set(values)) == len(values), "sweep.values", "duplicate values")

    N = v["scenario.antennas"]
    schemes = set(v["run.schemes"])
    if schemes & {SchemeTag.PROPOSED, SchemeTag.FPA} and lam > 0 and A > 0:
        extent = 2 * float(np.max(np.abs(planar_grid(N, lam / 2)))) if N > 1 else 0.0
        need(extent <= A * (1 + 1e-12), "scenario.antennas",
             f"{N}-element half-wavelength array ({extent:g} m) does not fit the {A:g} m region")
    if SchemeTag.GAS in schemes and lam > 0 and A > 0 and D > 0:
        try:
            gas_initial_layout(N, grid_sites(A, lam / 2), D)
        except ValueError:
            errors.append(f"scenario.antennas: fewer spacing-compatible grid sites than {N} antennas")
    return errors


def load_spec(path, overrides: dict[str, str] | None = None) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise SpecError([f"{path}: no such spec file"])
    return parse_spec(path.read_text(), overrides, source=str(path))


def apply_overrides(seeds=None, out=None, schemes=None, scale=None) -> dict[str, str]:
    """CLI flags as spec-key overrides."""
    over = {}
    if seeds is not None:
        over["run.seeds"] = str(seeds)
    if out is not None:
        over["run.out"] = str(out)
    if schemes:
        over["run.schemes"] = ",".join(schemes)
    if scale is not None:
        over["run.scale"] = scale
    return over


PRESETS: dict[str, tuple[str, str]] = {
    "paper": (
        "Full-scale parameter set, proposed scheme only, no sweep.",
        "# full-scale simulation parameters\n"
        "run.schemes = proposed\n"
        "run.seeds = 20\n",
    ),
    "fig2": (
        "Objective-versus-pass traces of the proposed design.",
        "# convergence traces; one trace file per seed\n"
        "run.schemes = proposed\n"
        "run.seeds = 20\n"
        "run.out = results/fig2\n",
    ),
    "fig3": (
        "Radar SINR versus transmit power for all five schemes.",
        "sweep.axis = power\n"
        "sweep.values = 20, 22, 24, 26, 28, 30, 32\n"
        "run.schemes = proposed, fpa, rpa, random_ris, gas\n"
        "run.seeds = 20\n"
        "run.out = results/fig3\n",
    ),
    "fig4": (
        "Radar SINR versus the QoS target for the proposed design and FPA.",
        "sweep.axis = qos\n"
        "sweep.values = 6, 8, 10, 12, 14, 16\n"
        "run.schemes = proposed, fpa\n"
        "run.seeds = 20\n"
        "run.out = results/fig4\n",
    ),
}


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    seed: int
    sweep: float | None  # in dBm / dB
    radar_sinr_db: float
    min_qos_margin_db: float
    passes: int
    status: str
    seconds: float

    def key(self):
        return (self.scheme, -math.inf if self.sweep is None else self.sweep, self.seed)


@dataclass(frozen=True)
class TrialOutcome:
    scheme: str
    seed: int
    sweep: float | None
    row: ResultRow | None  # None when infeasible
    trace: tuple[tuple[int, float, float, float], ...]  # (pass, objective, radar SINR, margin)
    reason: str = ""


def run_trial(spec: ExperimentSpec, scheme: SchemeTag, value: float | None, seed: int) -> TrialOutcome:
    """One (scheme, sweep point, seed) trial. Channels depend on the seed only."""
    scenario = spec.scenario_at(value)
    label = spec.sweep_label(value)
    channel = sample_channels(np.random.default_rng([seed, 0]), scenario)
    start = time.perf_counter()
    try:
        res = run_scheme(scheme, channel, scenario, spec.bcd, seed)
    except InfeasibleError as exc:
        return TrialOutcome(scheme.value, seed, label, None, (), str(exc))
    seconds = time.perf_counter() - start
    last = res.trace[-1]
    row = ResultRow(
        scheme=scheme.value,
        seed=seed,
        sweep=label,
        radar_sinr_db=float(linear_to_db(last.radar_sinr)),
        min_qos_margin_db=float(linear_to_db(last.min_qos_margin)),
        passes=res.passes,
        status=res.status,
        seconds=seconds,
    )
    trace = tuple((p.index, p.objective, p.radar_sinr, p.min_qos_margin) for p in res.trace)
    return TrialOutcome(scheme.value, seed, label, row, trace)


def _call_trial(args):
    return run_trial(*args)


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("DFRC_THREADS")
    workers = os.cpu_count() or 1
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer DFRC_THREADS=%r", cap)
    return max(1, min(workers, n_tasks))


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    outcomes: list[TrialOutcome]

    @property
    def rows(self) -> list[ResultRow]:
        return sorted((o.row for o in self.outcomes if o.row is not None), key=ResultRow.key)

    @property
    def infeasible(self) -> list[TrialOutcome]:
        return [o for o in self.outcomes if o.row is None]

    def summary(self) -> list[dict]:
        """Per (scheme, sweep point): feasible/infeasible counts, mean and standard error."""
        groups: dict[tuple, list[TrialOutcome]] = {}
        for o in self.outcomes:
            groups.setdefault((o.scheme, o.sweep), []).append(o)
        out = []
        for (scheme, sweep), items in groups.items():
            sinr = np.array([o.row.radar_sinr_db for o in items if o.row is not None])
            passes = np.array([o.row.passes for o in items if o.row is not None])
            n = sinr.size
            out.append({
                "scheme": scheme,
                "sweep": sweep,
                "feasible": n,
                "infeasible": len(items) - n,
                "mean_radar_sinr_db": float(sinr.mean()) if n else math.nan,
                "se_radar_sinr_db": float(sinr.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
                "mean_passes": float(passes.mean()) if n else math.nan,
            })
        order = {s.value: i for i, s in enumerate(SchemeTag)}
        out.sort(key=lambda d: (order[d["scheme"]], -math.inf if d["sweep"] is None else d["sweep"]))
        return out


def run_experiment(spec: ExperimentSpec, workers: int | None = None, progress=None) -> ExperimentResult:
    """Run every (scheme, sweep point, seed) trial of ``spec``.

    Trials are independent and may run in worker processes; results are
    collected and later sorted, so output does not depend on completion order.
    """
    tasks = [(spec, scheme, value, seed)
             for scheme in spec.schemes for value in spec.points() for seed in spec.seeds]
    workers = worker_count(len(tasks)) if workers is None else max(1, workers)
    outcomes: list[TrialOutcome] = []
    if workers == 1:
        for task in tasks:
            outcomes.append(_call_trial(task))
            if progress:
                progress(outcomes[-1], len(outcomes), len(tasks))
    else:
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            for outcome in pool.map(_call_trial, tasks):
                outcomes.append(outcome)
                if progress:
                    progress(outcome, len(outcomes), len(tasks))
    return ExperimentResult(spec, outcomes)


def format_number(x) -> str:
    """Decimal with 9 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".9g")


def _write_csv(path: Path, spec: ExperimentSpec, header, rows) -> None:
    lines = [f"# spec_sha256={spec.sha256} version={__version__}", ",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else format_number(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_outputs(result: ExperimentResult, out_dir, plots: bool = True) -> list[Path]:
    """Write the CSV tables (and SVG plots) for ``result`` into ``out_dir``.

    Wall-clock times go to ``timing.csv`` so every other file is a pure
    function of the spec and seeds.
    """
    spec = result.spec
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    rows = result.rows
    path = out / "results.csv"
    _write_csv(path, spec, ["scheme", "seed", "sweep_value", "radar_sinr_db", "min_qos_margin_db",
                            "passes", "status"],
               [(r.scheme, r.seed, r.sweep, r.radar_sinr_db, r.min_qos_margin_db, r.passes, r.status)
                for r in rows])
    written.append(path)

    path = out / "timing.csv"
    _write_csv(path, spec, ["scheme", "seed", "sweep_value", "seconds"],
               [(r.scheme, r.seed, r.sweep, r.seconds) for r in rows])
    written.append(path)

    infeasible = sorted(result.infeasible,
                        key=lambda o: (o.scheme, -math.inf if o.sweep is None else o.sweep, o.seed))
    path = out / "infeasible.csv"
    _write_csv(path, spec, ["scheme", "seed", "sweep_value", "reason"],
               [(o.scheme, o.seed, o.sweep, o.reason.replace(",", ";")) for o in infeasible])
    written.append(path)

    summary = result.summary()
    path = out / "summary.csv"
    _write_csv(path, spec, ["scheme", "sweep_value", "feasible", "infeasible", "mean_radar_sinr_db",
                            "se_radar_sinr_db", "mean_passes"],
               [(s["scheme"], s["sweep"], s["feasible"], s["infeasible"], s["mean_radar_sinr_db"],
                 s["se_radar_sinr_db"], s["mean_passes"]) for s in summary])
    written.append(path)

    by_seed: dict[int, list[TrialOutcome]] = {}
    for o in result.outcomes:
        if o.row is not None:
            by_seed.setdefault(o.seed, []).append(o)
    for seed, items in sorted(by_seed.items()):
        items.sort(key=lambda o: (o.scheme, -math.inf if o.sweep is None else o.sweep))
        trace_rows = [(o.scheme, o.sweep, p, obj, float(linear_to_db(sinr)), float(linear_to_db(m)))
                      for o in items for (p, obj, sinr, m) in o.trace]
        path = out / f"trace_{seed}.csv"
        _write_csv(path, spec, ["scheme", "sweep_value", "pass", "objective", "radar_sinr_db",
                                "min_qos_margin_db"], trace_rows)
        written.append(path)

    if plots and rows:
        from .plots import convergence_plot, sweep_plot

        written.append(convergence_plot(result, out / "convergence.svg"))
        if spec.sweep_axis != "none":
            written.append(sweep_plot(result, out / f"sinr_vs_{spec.sweep_axis}.svg"))
    return written


def summary_table(result: ExperimentResult) -> str:
    """Plain-text version of the summary for terminal output."""
    axis = {"power": "P_t [dBm]", "qos": "gamma [dB]"}.get(result.spec.sweep_axis, "")
    lines = [f"{'scheme':<11} {axis:>11} {'ok':>4} {'fail':>4} {'SINR [dB]':>10} {'SE':>6} {'passes':>6}"]
    for s in result.summary():
        sweep = "" if s["sweep"] is None else f"{s['sweep']:.4g}"
        lines.append(f"{s['scheme']:<11} {sweep:>11} {s['feasible']:>4} {s['infeasible']:>4} "
                     f"{s['mean_radar_sinr_db']:>10.3f} {s['se_radar_sinr_db']:>6.3f} "
                     f"{s['mean_passes']:>6.2f}")
    return "\n".join(lines)


def spec_fields(spec: ExperimentSpec) -> dict:
    """Flat view of a normalized spec, for display."""
    return {
        "scenario": dataclasses.asdict(spec.scenario),
        "bcd": dataclasses.asdict(spec.bcd),
        "sweep_axis": spec.sweep_axis,
        "sweep_values": list(spec.sweep_values),
        "schemes": [s.value for s in spec.schemes],
        "seeds": list(spec.seeds),
        "scale": spec.scale,
        "out": spec.out,
        "sha256": spec.sha256,
    }
