"""Detuning and coupling pulse shapes, and the schedules built from them.

Each shape is an immutable dataclass.  Values and derivatives are evaluated
by the compiled kernels in :mod:`levelcross._kernels`; the near-zero
behaviour used by the crossing analysis (``leading_order``) is exact
metadata for the analytic shapes and a log-log fit for tabulated data.

JSON form::

    {"kind": "exp_gap", "omega0": 1.0, "sigma": 2.0}

with ``kind`` one of ``constant, linear, exp_gap, sine, sine_abs, t_sine,
power_law, tabulated``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import Any, ClassVar, NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels as K
from .errors import ClassificationError, ConfigError, RangeError

__all__ = [
    "LeadingOrder",
    "PulseShape",
    "Constant",
    "Linear",
    "ExpGap",
    "Sine",
    "SineAbs",
    "TSine",
    "PowerLawOneSided",
    "Tabulated",
    "Schedule",
    "eval_pulse",
    "eval_derivative",
    "leading_order",
    "shape_from_dict",
]

# relative tolerance for deciding that t_c sits on an analytic zero
_ZERO_TOL = 1e-12
# relative tolerance of the declared-crossing check
CROSSING_TOL = 1e-12
_NO_KNOTS = np.zeros(2)
_NO_COEFFS = np.zeros((4, 1))


class LeadingOrder(NamedTuple):
    """``f(t_c + s*eps) ~ coefficient * eps**exponent`` as ``eps -> 0+``.

    A pulse that vanishes identically on the requested side has
    ``coefficient == 0`` and ``exponent == inf``.
    """

    coefficient: float
    exponent: float


_VANISHING = LeadingOrder(0.0, math.inf)


def _side(side) -> int:
    if side in (1, "+", "right", +1.0):
        return 1
    if side in (-1, "-", "left", -1.0):
        return -1
    raise ValueError(f"side must be +1 or -1, got {side!r}")


@dataclass(frozen=True)
class PulseShape:
    """Base class: a real scalar function of time."""

    kind: ClassVar[str] = ""
    _code: ClassVar[int] = -1

    def _params(self) -> list[float]:
        raise NotImplementedError

    @cached_property
    def _flat(self):
        p = np.zeros(4)
        vals = self._params()
        p[: len(vals)] = vals
        return self._code, p, _NO_KNOTS, _NO_COEFFS

    def _check_range(self, t: np.ndarray) -> None:
        pass

    def __call__(self, t):
        return eval_pulse(self, t)

    def derivative(self, t, side=1):
        return eval_derivative(self, t, side)

    def leading_order(self, t_c: float, side) -> LeadingOrder:
        raise NotImplementedError

    def time_scale(self) -> float:
        """Natural time unit of the shape (1 when the shape has none)."""
        return 1.0

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d


def _nonzero_order(shape: PulseShape, t_c: float) -> LeadingOrder:
    return LeadingOrder(float(shape(t_c)), 0.0)


def _near_multiple(t: float, period: float) -> int | None:
    n = round(t / period)
    if abs(t - n * period) <= _ZERO_TOL * abs(period) * max(1, abs(n)):
        return int(n)
    return None


@dataclass(frozen=True)
class Constant(PulseShape):
    c: float = 0.0

    kind: ClassVar[str] = "constant"
    _code: ClassVar[int] = K.CONSTANT

    def _params(self):
        return [self.c]

    def leading_order(self, t_c, side):
        _side(side)
        if self.c == 0.0:
            return _VANISHING
        return LeadingOrder(float(self.c), 0.0)


@dataclass(frozen=True)
class Linear(PulseShape):
    """``f(t) = kappa * t``."""

    kappa: float = 1.0

    kind: ClassVar[str] = "linear"
    _code: ClassVar[int] = K.LINEAR

    def _params(self):
        return [self.kappa]

    def leading_order(self, t_c, side):
        s = _side(side)
        if self.kappa == 0.0:
            return _VANISHING
        if t_c != 0.0:
            return _nonzero_order(self, t_c)
        return LeadingOrder(s * float(self.kappa), 1.0)


@dataclass(frozen=True)
class ExpGap(PulseShape):
    """``f(t) = omega0 * (1 - exp(-|t/sigma|))``: flat away from a notch at 0."""

    omega0: float = 1.0
    sigma: float = 1.0

    kind: ClassVar[str] = "exp_gap"
    _code: ClassVar[int] = K.EXP_GAP

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def _params(self):
        return [self.omega0, self.sigma]

    def time_scale(self):
        return self.sigma

    def leading_order(self, t_c, side):
        _side(side)
        if self.omega0 == 0.0:
            return _VANISHING
        if abs(t_c) > _ZERO_TOL * self.sigma:
            return _nonzero_order(self, t_c)
        return LeadingOrder(self.omega0 / self.sigma, 1.0)


@dataclass(frozen=True)
class Sine(PulseShape):
    """``f(t) = lam * omega0 * sin(pi t / T)``."""

    lam: float = 1.0
    omega0: float = 1.0
    T: float = 1.0

    kind: ClassVar[str] = "sine"
    _code: ClassVar[int] = K.SINE

    def __post_init__(self):
        if self.T == 0:
            raise ValueError("T must be nonzero")

    def _params(self):
        return [self.lam, self.omega0, self.T]

    def time_scale(self):
        return abs(self.T)

    def leading_order(self, t_c, side):
        s = _side(side)
        amp = self.lam * self.omega0
        if amp == 0.0:
            return _VANISHING
        n = _near_multiple(t_c, self.T)
        if n is None:
            return _nonzero_order(self, t_c)
        sign = -1.0 if n % 2 else 1.0
        return LeadingOrder(sign * s * amp * math.pi / self.T, 1.0)


@dataclass(frozen=True)
class SineAbs(Sine):
    """``f(t) = lam * omega0 * |sin(pi t / T)|``."""

    kind: ClassVar[str] = "sine_abs"
    _code: ClassVar[int] = K.SINE_ABS

    def leading_order(self, t_c, side):
        _side(side)
        amp = self.lam * self.omega0
        if amp == 0.0:
            return _VANISHING
        if _near_multiple(t_c, self.T) is None:
            return _nonzero_order(self, t_c)
        return LeadingOrder(amp * math.pi / abs(self.T), 1.0)


@dataclass(frozen=True)
class TSine(PulseShape):
    """``f(t) = lam * beta * t * sin(pi t / T)``; a double zero at t = 0."""

    lam: float = 1.0
    beta: float = 1.0
    T: float = 1.0

    kind: ClassVar[str] = "t_sine"
    _code: ClassVar[int] = K.T_SINE

    def __post_init__(self):
        if self.T == 0:
            raise ValueError("T must be nonzero")

    def _params(self):
        return [self.lam, self.beta, self.T]

    def time_scale(self):
        return abs(self.T)

    def leading_order(self, t_c, side):
        s = _side(side)
        amp = self.lam * self.beta
        if amp == 0.0:
            return _VANISHING
        n = _near_multiple(t_c, self.T)
        if n is None:
            return _nonzero_order(self, t_c)
        if n == 0:
            return LeadingOrder(amp * math.pi / self.T, 2.0)
        sign = -1.0 if n % 2 else 1.0
        return LeadingOrder(sign * s * amp * n * math.pi, 1.0)


@dataclass(frozen=True)
class PowerLawOneSided(PulseShape):
    """``a_minus |t|**a`` for t < 0 and ``a_plus t**a`` for t >= 0."""

    a_minus: float = 1.0
    a_plus: float = 1.0
    a: float = 1.0

    kind: ClassVar[str] = "power_law"
    _code: ClassVar[int] = K.POWER_LAW

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"exponent a must be positive, got {self.a}")

    def _params(self):
        return [self.a_minus, self.a_plus, self.a]

    def leading_order(self, t_c, side):
        s = _side(side)
        if t_c != 0.0:
            return _nonzero_order(self, t_c)
        c = self.a_plus if s > 0 else self.a_minus
        if c == 0.0:
            return _VANISHING
        return LeadingOrder(float(c), float(self.a))


@dataclass(frozen=True)
class Tabulated(PulseShape):
    """Samples on a strictly increasing grid, interpolated (cubic by default)."""

    times: tuple = (0.0, 1.0)
    values: tuple = (0.0, 0.0)
    interpolation: str = "cubic"

    kind: ClassVar[str] = "tabulated"
    _code: ClassVar[int] = K.TABULATED

    def __post_init__(self):
        x = tuple(float(v) for v in self.times)
        y = tuple(float(v) for v in self.values)
        object.__setattr__(self, "times", x)
        object.__setattr__(self, "values", y)
        if len(x) < 2:
            raise ValueError("tabulated pulse needs at least 2 points")
        if len(x) != len(y):
            raise ValueError("times and values differ in length")
        if np.any(np.diff(x) <= 0):
            raise ValueError("tabulated times must be strictly increasing")
        if not np.all(np.isfinite(y)):
            raise ValueError("tabulated values must be finite")
        if self.interpolation not in ("linear", "cubic"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")

    @cached_property
    def _flat(self):
        x = np.asarray(self.times)
        y = np.asarray(self.values)
        if self.interpolation == "cubic" and len(x) > 2:
            coeffs = np.ascontiguousarray(CubicSpline(x, y).c)
        else:
            coeffs = np.zeros((4, len(x) - 1))
            coeffs[2] = np.diff(y) / np.diff(x)
            coeffs[3] = y[:-1]
        return self._code, np.zeros(4), x, coeffs

    def _check_range(self, t):
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise RangeError(
                f"t outside tabulated range [{self.times[0]}, {self.times[-1]}]"
            )

    def time_scale(self):
        return self.times[-1] - self.times[0]

    def leading_order(self, t_c, side, max_halvings: int = 60):
        s = _side(side)
        x = np.asarray(self.times)
        self._check_range(np.asarray(t_c))
        amp = float(np.max(np.abs(self.values)))
        if amp == 0.0:
            return _VANISHING
        f0 = float(self(t_c))
        if abs(f0) > CROSSING_TOL * amp:
            return LeadingOrder(f0, 0.0)
        # first offset: distance to the next knot strictly beyond t_c
        nxt = x[x > t_c] if s > 0 else x[x < t_c]
        if nxt.size == 0:
            raise ClassificationError("exponent undetermined: t_c at grid edge")
        eps = float(abs((nxt[0] if s > 0 else nxt[-1]) - t_c))

        prev_val = float(self(t_c + s * eps)) - f0
        prev_p = None
        for _ in range(max_halvings):
            eps_next = eps / 2
            val = float(self(t_c + s * eps_next)) - f0
            if prev_val == 0.0 and val == 0.0:
                return _VANISHING
            if val == 0.0 or prev_val == 0.0 or abs(val) < 1e-15 * amp:
                break
            p = math.log2(abs(prev_val) / abs(val))
            if prev_p is not None and abs(p - prev_p) < 1e-3:
                return LeadingOrder(val / eps_next**p, p)
            prev_p, prev_val, eps = p, val, eps_next
        raise ClassificationError("exponent undetermined: log-log fit did not converge")


def eval_pulse(shape: PulseShape, t):
    """Evaluate ``shape`` at a scalar or array of times."""
    kind, p, x, c = shape._flat
    arr = np.asarray(t, dtype=float)
    shape._check_range(arr)
    if arr.ndim == 0:
        return K.pulse_value(kind, p, x, c, float(arr))
    return K.pulse_values(kind, p, x, c, arr.ravel()).reshape(arr.shape)


def eval_derivative(shape: PulseShape, t, side=1):
    """Analytic time derivative; at kinks ``side`` picks the one-sided slope."""
    s = _side(side)
    kind, p, x, c = shape._flat
    arr = np.asarray(t, dtype=float)
    shape._check_range(arr)
    if arr.ndim == 0:
        return K.pulse_derivative(kind, p, x, c, float(arr), s)
    return K.pulse_derivatives(kind, p, x, c, arr.ravel(), s).reshape(arr.shape)


def leading_order(shape: PulseShape, t_c: float, side) -> LeadingOrder:
    return shape.leading_order(t_c, side)


_KINDS: dict[str, type[PulseShape]] = {
    cls.kind: cls
    for cls in (Constant, Linear, ExpGap, Sine, SineAbs, TSine, PowerLawOneSided, Tabulated)
}


def shape_from_dict(d: Any, path: str = "shape") -> PulseShape:
    """Build a shape from its JSON object, reporting errors by field path."""
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    kind = d.get("kind")
    if kind not in _KINDS:
        raise ConfigError(f"{path}.kind", f"unknown kind {kind!r}")
    cls = _KINDS[kind]
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, val in d.items():
        if key == "kind":
            continue
        if key not in names:
            raise ConfigError(f"{path}.{key}", f"not a parameter of {kind!r}")
        if key == "interpolation":
            kwargs[key] = val
        elif key in ("times", "values"):
            if not isinstance(val, list) or not all(_is_number(v) for v in val):
                raise ConfigError(f"{path}.{key}", "expected a list of numbers")
            kwargs[key] = val
        else:
            if not _is_number(val):
                raise ConfigError(f"{path}.{key}", f"expected a number, got {val!r}")
            kwargs[key] = float(val)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


@dataclass(frozen=True)
class Schedule:
    """Detuning and coupling over ``[t_start, t_end]`` with declared crossings.

    At each declared crossing both pulses must vanish to within
    ``CROSSING_TOL * energy_scale``.
    """

    delta: PulseShape
    omega: PulseShape
    t_start: float
    t_end: float
    crossings: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "crossings", tuple(float(c) for c in self.crossings))
        if not self.t_start < self.t_end:
            raise ValueError("t_start must be smaller than t_end")
        for shape in (self.delta, self.omega):
            shape._check_range(np.array([self.t_start, self.t_end]))
        scale = self.energy_scale
        for tc in self.crossings:
            if not self.t_start <= tc <= self.t_end:
                raise ValueError(f"crossing {tc} outside the window")
            d, o = abs(self.delta(tc)), abs(self.omega(tc))
            if d > CROSSING_TOL * scale or o > CROSSING_TOL * scale:
                raise ValueError(
                    f"declared crossing at t={tc} is not a crossing "
                    f"(|delta|={d:.3g}, |omega|={o:.3g})"
                )

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @cached_property
    def energy_scale(self) -> float:
        """max of sqrt(delta^2 + omega^2) on a 1000-point uniform grid."""
        t = np.linspace(self.t_start, self.t_end, 1000)
        return float(np.max(np.hypot(self.delta(t), self.omega(t))))

    def time_scale(self) -> float:
        return min(self.duration, self.delta.time_scale(), self.omega.time_scale())

    def alpha(self, t):
        """Ratio delta/omega (inf where omega vanishes and delta does not)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.divide(self.delta(t), self.omega(t))

    @classmethod
    def from_dict(cls, d: Any, path: str = "schedule") -> "Schedule":
        if not isinstance(d, dict):
            raise ConfigError(path, "expected an object")
        for key in ("delta", "omega", "t_start", "t_end"):
            if key not in d:
                raise ConfigError(f"{path}.{key}", "missing")
        unknown = set(d) - {"delta", "omega", "t_start", "t_end", "crossings"}
        if unknown:
            raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown field")
        delta = shape_from_dict(d["delta"], f"{path}.delta")
        omega = shape_from_dict(d["omega"], f"{path}.omega")
        for key in ("t_start", "t_end"):
            if not _is_number(d[key]):
                raise ConfigError(f"{path}.{key}", "expected a number")
        crossings = d.get("crossings", [])
        if not isinstance(crossings, list) or not all(_is_number(c) for c in crossings):
            raise ConfigError(f"{path}.crossings", "expected a list of numbers")
        try:
            return cls(delta, omega, float(d["t_start"]), float(d["t_end"]), tuple(crossings))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "delta": self.delta.to_dict(),
            "omega": self.omega.to_dict(),
            "t_start": self.t_start,
            "t_end": self.t_end,
            "crossings": list(self.crossings),
        }
