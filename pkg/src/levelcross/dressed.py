"""Instantaneous eigensystem of H = (Omega sigma_x - Delta sigma_z) / 2.

Conventions: the bare basis is ordered (down, up); the dressed states are

    psi_+ = ( cos(theta),  sin(theta))
    psi_- = ( sin(theta), -cos(theta))

with ``tan(theta) = alpha + sqrt(1 + alpha**2)`` and ``alpha = Delta/Omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, DomainError
from .pulses import Schedule, _side

__all__ = [
    "ExtendedReal",
    "DressedSnapshot",
    "mixing_angle",
    "eigenvalues",
    "dressed_states",
    "theta_dot",
    "eta",
    "snapshot",
    "adiabatic_phase",
    "adaptive_simpson",
]


@dataclass(frozen=True)
class ExtendedReal:
    """A real number or one of the two signed infinities, tagged explicitly."""

    tag: str  # "finite", "+inf" or "-inf"
    value: float = 0.0

    def __post_init__(self):
        if self.tag not in ("finite", "+inf", "-inf"):
            raise ValueError(f"bad tag {self.tag!r}")

    @classmethod
    def of(cls, x) -> "ExtendedReal":
        if isinstance(x, ExtendedReal):
            return x
        x = float(x)
        if math.isnan(x):
            raise ValueError("NaN is not an extended real")
        if math.isinf(x):
            return cls("+inf" if x > 0 else "-inf")
        return cls("finite", x)

    @property
    def is_finite(self) -> bool:
        return self.tag == "finite"

    def __float__(self) -> float:
        if self.tag == "+inf":
            return math.inf
        if self.tag == "-inf":
            return -math.inf
        return self.value

    def __neg__(self) -> "ExtendedReal":
        if self.tag == "finite":
            return ExtendedReal("finite", -self.value)
        return ExtendedReal("-inf" if self.tag == "+inf" else "+inf")

    def to_json(self):
        return {"finite": self.value} if self.is_finite else self.tag

    @classmethod
    def from_json(cls, obj) -> "ExtendedReal":
        if obj in ("+inf", "-inf"):
            return cls(obj)
        return cls("finite", float(obj["finite"]))


def mixing_angle(alpha):
    """theta(alpha) = arctan(alpha + sqrt(1 + alpha^2)), in [0, pi/2].

    Accepts floats (including +-inf), arrays, or :class:`ExtendedReal`.
    Evaluated as pi/4 + arctan(alpha)/2, which is the same function without
    the cancellation of the literal form at large negative alpha.
    """
    if isinstance(alpha, ExtendedReal):
        if alpha.tag == "+inf":
            return math.pi / 2
        if alpha.tag == "-inf":
            return 0.0
        alpha = alpha.value
    out = np.pi / 4 + 0.5 * np.arctan(alpha)
    return float(out) if np.ndim(out) == 0 else out


def eigenvalues(delta, omega):
    """(omega_+, omega_-) = (+1/2, -1/2) * sqrt(delta^2 + omega^2)."""
    w = 0.5 * np.hypot(delta, omega)
    if np.ndim(w) == 0:
        w = float(w)
    return w, -w


def _theta(delta: float, omega: float) -> float:
    if omega == 0.0:
        if delta == 0.0:
            raise DegeneracyError("delta = omega = 0: no dressed basis at a crossing")
        return math.pi / 2 if delta > 0 else 0.0
    return mixing_angle(delta / omega)


def dressed_states(delta: float, omega: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (psi_+, psi_-) in the bare (down, up) basis.

    For ``omega < 0`` the literal definition through ``alpha = delta/omega``
    is kept, so psi_+ is then the lower-energy eigenvector.  At ``omega == 0``
    the limit from positive omega is used.
    """
    th = _theta(float(delta), float(omega))
    c, s = math.cos(th), math.sin(th)
    return np.array([c, s]), np.array([s, -c])


def _rate_numerator(delta, omega, delta_dot, omega_dot):
    return delta_dot * omega - delta * omega_dot


def _check_nondegenerate(r2):
    if np.any(np.asarray(r2) == 0.0):
        raise DegeneracyError("delta = omega = 0: nonadiabatic coupling undefined")


def theta_dot(delta, omega, delta_dot, omega_dot):
    """d(theta)/dt = (Delta' Omega - Delta Omega') / (2 (Delta^2 + Omega^2))."""
    r2 = np.square(delta) + np.square(omega)
    _check_nondegenerate(r2)
    out = _rate_numerator(delta, omega, delta_dot, omega_dot) / (2.0 * r2)
    return float(out) if np.ndim(out) == 0 else out


def eta(delta, omega, delta_dot, omega_dot):
    """Adiabaticity parameter |theta_dot| / |omega_+ - omega_-|."""
    r2 = np.square(delta) + np.square(omega)
    _check_nondegenerate(r2)
    out = np.abs(_rate_numerator(delta, omega, delta_dot, omega_dot)) / (2.0 * r2**1.5)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DressedSnapshot:
    t: float
    theta: float
    omega_plus: float
    omega_minus: float
    theta_dot: float
    eta: float


def snapshot(schedule: Schedule, t: float, side=1) -> DressedSnapshot:
    """Dressed-frame quantities of ``schedule`` at time ``t``."""
    s = _side(side)
    d, o = float(schedule.delta(t)), float(schedule.omega(t))
    dd = float(schedule.delta.derivative(t, s))
    od = float(schedule.omega.derivative(t, s))
    wp, wm = eigenvalues(d, o)
    return DressedSnapshot(
        t=float(t),
        theta=_theta(d, o),
        omega_plus=wp,
        omega_minus=wm,
        theta_dot=theta_dot(d, o, dd, od),
        eta=eta(d, o, dd, od),
    )


def adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 50) -> float:
    """Integrate ``f`` over [a, b] by adaptive Simpson bisection.

    An interval is accepted once the two-panel and one-panel estimates differ
    by less than 15 times its share of ``tol``; the accepted value carries the
    Richardson correction.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        diff = left + right - est
        if depth >= max_depth or abs(diff) <= 15.0 * eps:
            total += left + right + diff / 15.0
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
    return sign * total


def adiabatic_phase(schedule: Schedule, k, t1: float, t2: float, tol: float = 1e-10) -> float:
    """Dynamical phase phi_k = integral of omega_k over [t1, t2].

    The geometric part <psi_k|d psi_k/dt> vanishes identically for this real
    Hamiltonian, so only the energy integral remains.
    """
    sign = _side(k)
    lo, hi = min(t1, t2), max(t1, t2)
    for tc in schedule.crossings:
        if lo < tc < hi:
            raise DomainError(f"crossing at t={tc} inside ({lo}, {hi})")

    def omega_k(s):
        return sign * 0.5 * math.hypot(schedule.delta(s), schedule.omega(s))

    return adaptive_simpson(omega_k, t1, t2, tol)
