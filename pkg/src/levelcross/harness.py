"""Experiment runner: configs, single runs, sweeps, figure data and the LZSM check.

All numbers written to disk go through :func:`fmt` (12 significant digits),
so identical configurations produce byte-identical files regardless of the
number of worker processes.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .crossing import CrossingReport, theta_jump
from .errors import ConfigError, LevelCrossError
from .pulses import Constant, ExpGap, Linear, Schedule, SineAbs, TSine, _is_number
from .propagator import Trajectory, TwoStateKet, eta_scan, propagate

__all__ = [
    "fmt",
    "SweepSpec",
    "ExperimentConfig",
    "SingleResult",
    "SweepRow",
    "LZRow",
    "FigureData",
    "SWEEP_COLUMNS",
    "run_single",
    "run_sweep",
    "write_sweep_csv",
    "lz_check",
    "figure_config",
    "emit_figure_data",
    "run_eta_scan",
]

DEFAULT_TOL = 1e-8
DEFAULT_SAMPLES = 1001
# eta exclusion half-width as a fraction of the window
DEFAULT_EXCLUSION_FRACTION = 0.02
# minimum number of points used when reporting eta away from crossings
ETA_GRID_POINTS = 20001

SWEEP_COLUMNS = (
    "param_value", "p_up_final", "p_down_final", "predicted_survival",
    "abs_error", "max_eta_outside_crossing", "error",
)


def fmt(x) -> str:
    """Locale-independent rendering with 12 significant digits."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"
    return format(x, ".12g")


def _round12(obj):
    """Recursively round floats for JSON output; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    x = float(obj)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return float(fmt(x))


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(_round12(obj), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple


def _lookup(d: Any, path: str):
    """Return (container, key) for a dotted path; list indices are integers."""
    parts = path.split(".")
    node = d
    for part in parts[:-1]:
        node = _child(node, part, path)
    last = parts[-1]
    _child(node, last, path)
    return node, (int(last) if isinstance(node, list) else last)


def _child(node, part, path):
    if isinstance(node, dict) and part in node:
        return node[part]
    if isinstance(node, list) and part.isdigit() and int(part) < len(node):
        return node[int(part)]
    raise ConfigError("sweep.parameter", f"path {path!r} does not resolve")


def _parse_state(obj, path="initial_state") -> TwoStateKet:
    if obj == "down":
        return TwoStateKet.down()
    if obj == "up":
        return TwoStateKet.up()
    if not isinstance(obj, dict) or set(obj) != {"c_down", "c_up"}:
        raise ConfigError(path, 'expected "down", "up" or {"c_down": [re, im], "c_up": [re, im]}')
    amps = []
    for key in ("c_down", "c_up"):
        v = obj[key]
        if not (isinstance(v, list) and len(v) == 2 and all(_is_number(x) for x in v)):
            raise ConfigError(f"{path}.{key}", "expected [re, im]")
        amps.append(complex(v[0], v[1]))
    ket = TwoStateKet(*amps)
    if abs(ket.norm - 1.0) > 1e-9:
        raise ConfigError(path, f"state is not normalized (norm={ket.norm:.12g})")
    return ket


def _state_to_json(ket: TwoStateKet):
    if ket == TwoStateKet.down():
        return "down"
    if ket == TwoStateKet.up():
        return "up"
    return {"c_down": [ket.c_down.real, ket.c_down.imag], "c_up": [ket.c_up.real, ket.c_up.imag]}


_CONFIG_KEYS = {"schedule", "initial_state", "tol", "n_samples", "sweep", "eta_exclusion"}


@dataclass(frozen=True)
class ExperimentConfig:
    """A schedule plus integrator and sweep settings.

    ``eta_exclusion`` is the half-width of the window around each crossing
    that is ignored when reporting eta; ``None`` means 2% of the window.
    """

    schedule: Schedule
    initial_state: TwoStateKet = field(default_factory=TwoStateKet.down)
    tol: float = DEFAULT_TOL
    n_samples: int = DEFAULT_SAMPLES
    sweep: SweepSpec | None = None
    eta_exclusion: float | None = None

    @property
    def exclusion(self) -> float:
        if self.eta_exclusion is not None:
            return self.eta_exclusion
        return DEFAULT_EXCLUSION_FRACTION * self.schedule.duration

    @classmethod
    def from_dict(cls, d: Any) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "expected an object")
        unknown = set(d) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        if "schedule" not in d:
            raise ConfigError("schedule", "missing")
        schedule = Schedule.from_dict(d["schedule"])
        state = _parse_state(d.get("initial_state", "down"))

        tol = d.get("tol", DEFAULT_TOL)
        if not _is_number(tol) or not 0 < tol <= 1e-2:
            raise ConfigError("tol", f"must be a number in (0, 1e-2], got {tol!r}")
        n = d.get("n_samples", DEFAULT_SAMPLES)
        if not isinstance(n, int) or isinstance(n, bool) or n < 2:
            raise ConfigError("n_samples", f"must be an integer >= 2, got {n!r}")
        excl = d.get("eta_exclusion")
        if excl is not None and (not _is_number(excl) or excl < 0):
            raise ConfigError("eta_exclusion", "must be a nonnegative number")

        sweep = None
        if "sweep" in d:
            sweep = _parse_sweep(d["sweep"], d)
        return cls(schedule, state, float(tol), n, sweep,
                   None if excl is None else float(excl))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
        return cls.from_dict(d)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from None
        return cls.from_json(text)

    def to_dict(self) -> dict:
        d = {
            "schedule": self.schedule.to_dict(),
            "initial_state": _state_to_json(self.initial_state),
            "tol": self.tol,
            "n_samples": self.n_samples,
        }
        if self.eta_exclusion is not None:
            d["eta_exclusion"] = self.eta_exclusion
        if self.sweep is not None:
            d["sweep"] = {"parameter": self.sweep.parameter, "values": list(self.sweep.values)}
        return d

    def with_value(self, path: str, value: float) -> "ExperimentConfig":
        """Copy with the numeric field at dotted ``path`` set to ``value``; no sweep."""
        d = copy.deepcopy(self.to_dict())
        d.pop("sweep", None)
        node, key = _lookup(d, path)
        node[key] = float(value)
        return ExperimentConfig.from_dict(d)


def _parse_sweep(s, root) -> SweepSpec:
    if not isinstance(s, dict) or set(s) != {"parameter", "values"}:
        raise ConfigError("sweep", 'expected {"parameter": ..., "values": [...]}')
    param, values = s["parameter"], s["values"]
    if not isinstance(param, str):
        raise ConfigError("sweep.parameter", "expected a dotted path string")
    node, key = _lookup(root, param)
    if not _is_number(node[key]):
        raise ConfigError("sweep.parameter", f"{param!r} is not a numeric field")
    if not isinstance(values, list) or not values or not all(_is_number(v) for v in values):
        raise ConfigError("sweep.values", "expected a nonempty list of numbers")
    return SweepSpec(param, tuple(float(v) for v in values))


# ---------------------------------------------------------------- single run


@dataclass
class SingleResult:
    trajectory: Trajectory
    reports: list[CrossingReport]
    max_eta_outside_crossing: float
    flags: list[str]

    @property
    def report(self) -> CrossingReport | None:
        return self.reports[0] if self.reports else None

    def to_json(self) -> dict:
        tr = self.trajectory
        norms = np.sqrt(np.sum(tr.populations_bare, axis=1))
        return {
            "p_up_final": tr.p_up_final,
            "p_down_final": tr.p_down_final,
            "n_steps": tr.n_steps,
            "n_rejected": tr.n_rejected,
            "max_norm_error": float(np.max(np.abs(norms - 1.0))),
            "max_eta_outside_crossing": self.max_eta_outside_crossing,
            "crossings": [r.to_json() for r in self.reports],
            "degenerate": any(f.startswith("degenerate") for f in self.flags),
            "flags": list(self.flags),
        }


def _eta_outside(config: ExperimentConfig) -> float:
    s = config.schedule
    grid = np.linspace(s.t_start, s.t_end, max(config.n_samples, ETA_GRID_POINTS))
    return eta_scan(s, grid, config.exclusion).max_outside


def _analyse(config: ExperimentConfig) -> tuple[list[CrossingReport], list[str]]:
    reports, flags = [], []
    for tc in config.schedule.crossings:
        try:
            reports.append(theta_jump(config.schedule, tc))
        except LevelCrossError as exc:
            flags.append(f"degenerate crossing at t={fmt(tc)}: {exc}")
    return reports, flags


def run_single(config: ExperimentConfig, out_dir=None) -> SingleResult:
    """Propagate, analyse every declared crossing, optionally write
    ``trajectory.csv`` and ``report.json`` into ``out_dir``."""
    traj = propagate(config.schedule, config.initial_state, config.tol, config.n_samples)
    reports, flags = _analyse(config)
    # samples exactly on a declared crossing are expected to be degenerate
    undefined = np.isnan(traj.eta_profile)
    for tc in config.schedule.crossings:
        undefined &= traj.times != tc
    n_degenerate = int(np.sum(undefined))
    if n_degenerate:
        flags.append(f"degenerate: dressed basis undefined at {n_degenerate} samples")
    for r in reports:
        flags.extend(f for f in r.flags if f not in flags)
    result = SingleResult(traj, reports, _eta_outside(config), flags)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        traj.write_csv(out / "trajectory.csv")
        _dump_json(result.to_json(), out / "report.json")
    return result


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepRow:
    param_value: float
    p_up_final: float
    p_down_final: float
    predicted_survival: float
    abs_error: float
    max_eta_outside_crossing: float
    error: str = ""

    def cells(self) -> list[str]:
        return [fmt(getattr(self, c)) for c in SWEEP_COLUMNS]


def _sweep_point(args) -> SweepRow:
    config, value = args
    nan = math.nan
    try:
        cfg = config.with_value(config.sweep.parameter, value)
        traj = propagate(cfg.schedule, cfg.initial_state, cfg.tol, cfg.n_samples)
        reports, _ = _analyse(cfg)
        predicted = reports[0].predicted_survival if reports else nan
        p_up = traj.p_up_final
        return SweepRow(value, p_up, traj.p_down_final, predicted,
                        abs(p_up - predicted), _eta_outside(cfg))
    except (LevelCrossError, ValueError) as exc:
        return SweepRow(value, nan, nan, nan, nan, nan, f"{type(exc).__name__}: {exc}")


def run_sweep(config: ExperimentConfig, workers: int = 1, out_dir=None) -> list[SweepRow]:
    """One row per sweep value, sorted by value.  Failures become error rows."""
    if config.sweep is None:
        raise ConfigError("sweep", "missing")
    jobs = [(config, v) for v in config.sweep.values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    rows.sort(key=lambda r: r.param_value)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, out / "sweep.csv")
    return rows


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    _write_csv(Path(path), SWEEP_COLUMNS, (r.cells() for r in rows))


# ---------------------------------------------------------------- LZSM check


@dataclass(frozen=True)
class LZRow:
    parameter: float
    numeric: float
    analytic: float
    error: float


def lz_check(
    parameters: Sequence[float] = (1.0, 2.0, 4.0),
    window_factor: float = 1000.0,
    tol: float = 1e-7,
    out_dir=None,
) -> list[LZRow]:
    """Final bare survival for Delta = t, Omega = sqrt(p) against exp(-pi p / 2).

    The window is [-T, T] with T = window_factor * max(Omega0, 1), so that
    kappa T / Omega0 >= window_factor.
    """
    if window_factor < 10:
        raise ValueError("window_factor must be at least 10")
    rows = []
    for p in parameters:
        if p < 0:
            raise ValueError(f"Omega0^2/kappa must be nonnegative, got {p}")
        omega0 = math.sqrt(p)
        analytic = math.exp(-math.pi * p / 2.0)
        if omega0 == 0.0:
            # diagonal H only rotates phases
            numeric = 1.0
        else:
            T = window_factor * max(omega0, 1.0)
            sched = Schedule(Linear(1.0), Constant(omega0), -T, T)
            numeric = propagate(sched, TwoStateKet.down(), tol, 2).p_down_final
        rows.append(LZRow(float(p), numeric, analytic, abs(numeric - analytic)))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "lz_check.csv", ("parameter", "numeric", "analytic", "error"),
                   ([fmt(r.parameter), fmt(r.numeric), fmt(r.analytic), fmt(r.error)] for r in rows))
    return rows


# ---------------------------------------------------------------- figures

_SWEEP_POINTS = 40


@dataclass(frozen=True)
class _Figure:
    parameter: str        # dotted config path of the swept field
    label: str            # column name in frame (a)
    param_unit: float     # physical value of one figure parameter unit
    time_unit: float
    energy_unit: float
    default_values: tuple  # figure units
    reference: float       # frame (b) parameter, figure units


def _fig_defs():
    # Figs. 1-2: Omega0 = 1, kappa = 0.025; Fig. 3: beta = 1, kappa = sqrt(5)
    lam = tuple(np.linspace(0.05, 3.0, _SWEEP_POINTS))
    return {
        1: _Figure("schedule.omega.sigma", "sigma", 2.0, 2.0, 0.5,
                   tuple(np.linspace(0.05, 4.0, _SWEEP_POINTS)), 1.0),
        2: _Figure("schedule.omega.lam", "lambda", 1.0, 2.0, 0.5, lam, 1.0),
        3: _Figure("schedule.omega.lam", "lambda", 1.0, math.sqrt(2.0), math.sqrt(0.5), lam, 1.0),
    }


def _fig_schedule(fig_id: int, value: float) -> Schedule:
    if fig_id == 1:
        omega0, kappa = 1.0, 0.025
        T = 50.0 * omega0 / kappa
        return Schedule(Linear(kappa), ExpGap(omega0, value), -T, T, (0.0,))
    if fig_id == 2:
        omega0, kappa = 1.0, 0.025
        T = 5.0 * omega0 / kappa
        return Schedule(Linear(kappa), SineAbs(value, omega0, T), -T, T, (0.0,))
    if fig_id == 3:
        beta = 1.0
        kappa = math.sqrt(5.0 * beta)
        T = math.sqrt(200.0 / beta)
        return Schedule(Linear(kappa), TSine(value, beta, T), -T, T, (0.0,))
    raise ConfigError("--id", f"figure id must be 1, 2 or 3, got {fig_id!r}")


def figure_config(fig_id: int, values=None, tol: float = DEFAULT_TOL) -> ExperimentConfig:
    """Figure experiment with its sweep; ``values`` are in figure units."""
    fd = _fig_defs().get(fig_id)
    if fd is None:
        raise ConfigError("--id", f"figure id must be 1, 2 or 3, got {fig_id!r}")
    values = fd.default_values if values is None else tuple(values)
    physical = tuple(float(v) * fd.param_unit for v in values)
    return ExperimentConfig(
        _fig_schedule(fig_id, fd.reference * fd.param_unit),
        tol=tol,
        sweep=SweepSpec(fd.parameter, physical),
    )


@dataclass
class FigureData:
    rows: list[SweepRow]
    frame_a: list[list[str]]
    frame_b: np.ndarray  # columns t, delta, omega in figure units, then physical


def emit_figure_data(
    fig_id: int, out_dir=None, tol: float = DEFAULT_TOL, workers: int = 1,
    values=None, n_frame_b: int = 2001,
) -> FigureData:
    """Run the figure's sweep and write ``fig<N>_a.csv`` and ``fig<N>_b.csv``."""
    config = figure_config(fig_id, values, tol)
    fd = _fig_defs()[fig_id]
    rows = run_sweep(config, workers)
    frame_a = [[fmt(r.param_value / fd.param_unit), fmt(r.param_value)] + r.cells()[1:]
               for r in rows]

    ref = _fig_schedule(fig_id, fd.reference * fd.param_unit)
    t = np.linspace(ref.t_start, ref.t_end, n_frame_b)
    d, o = ref.delta(t), ref.omega(t)
    frame_b = np.column_stack([t / fd.time_unit, d / fd.energy_unit, o / fd.energy_unit, t, d, o])

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        label = fd.label
        _write_csv(out / f"fig{fig_id}_a.csv",
                   (label, f"{label}_raw") + SWEEP_COLUMNS[1:], frame_a)
        _write_csv(out / f"fig{fig_id}_b.csv",
                   ("t", "delta", "omega", "t_raw", "delta_raw", "omega_raw"),
                   ([fmt(v) for v in row] for row in frame_b))
    return FigureData(rows, frame_a, frame_b)


# ---------------------------------------------------------------- eta scan


def run_eta_scan(config: ExperimentConfig, out_dir=None, n_points: int | None = None):
    """eta on a uniform grid over the window; writes ``eta_scan.csv`` and
    ``eta_scan.json`` (the maximum outside the exclusion windows)."""
    s = config.schedule
    grid = np.linspace(s.t_start, s.t_end, n_points or config.n_samples)
    scan = eta_scan(s, grid, config.exclusion)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "eta_scan.csv", ("t", "eta"),
                   ([fmt(t), fmt(e)] for t, e in zip(scan.times, scan.eta)))
        _dump_json({"max_eta_outside_crossing": scan.max_outside,
                    "eta_exclusion": config.exclusion}, out / "eta_scan.json")
    return scan


def with_tol(config: ExperimentConfig, tol: float | None) -> ExperimentConfig:
    if tol is None:
        return config
    if not 0 < tol <= 1e-2:
        raise ConfigError("--tol", f"must lie in (0, 1e-2], got {tol}")
    return replace(config, tol=float(tol))
