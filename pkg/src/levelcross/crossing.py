"""Analysis of a real level crossing (Delta and Omega vanishing together).

The dressed states jump at the crossing by the angle
``Theta = theta(t_c+) - theta(t_c-)``; if the evolution is adiabatic on both
sides, each dressed state survives with probability ``cos(Theta)**2``.
The one-sided mixing angles follow from how fast each pulse vanishes, so
everything here works from the pulses' leading-order behaviour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dressed import ExtendedReal, adaptive_simpson, mixing_angle
from .errors import ClassificationError, PreconditionError
from .pulses import CROSSING_TOL, LeadingOrder, Schedule, Tabulated, _side

__all__ = [
    "ADIABATIC_BY_A",
    "ADIABATIC_BY_B",
    "NOT_GUARANTEED",
    "SAME_ORDER_FLAG",
    "ExponentVerdict",
    "CrossingReport",
    "alpha_limit",
    "theta_jump",
    "overlap_matrix",
    "classify_exponents",
    "empirical_eta_exponent",
    "pulse_area",
    "around_crossing_efficiency",
    "richardson_limit",
]

ADIABATIC_BY_A = "adiabatic_by_a"
ADIABATIC_BY_B = "adiabatic_by_b"
NOT_GUARANTEED = "not_guaranteed"
SAME_ORDER_FLAG = "same-order: ratio analysis required"
ASYMMETRIC_FLAG = "asymmetric exponents"

# |alpha| beyond this is treated as divergent for tabulated data
DIVERGENCE_THRESHOLD = 1e6


def richardson_limit(values, ratio: float = 2.0, order: int = 1) -> float:
    """Extrapolate ``values[k] = L + c1 h_k**order + c2 h_k**(order+1) + ...``.

    ``h`` shrinks by ``ratio`` between successive entries; returns the last
    diagonal entry of the Neville table.
    """
    row = [float(v) for v in values]
    p = order
    while len(row) > 1:
        f = ratio**p
        row = [(f * row[k + 1] - row[k]) / (f - 1.0) for k in range(len(row) - 1)]
        p += 1
    return row[0]


def _orders(schedule: Schedule, t_c: float, side: int) -> tuple[LeadingOrder, LeadingOrder]:
    return schedule.delta.leading_order(t_c, side), schedule.omega.leading_order(t_c, side)


def _tabulated_alpha(schedule: Schedule, t_c: float, side: int, finite: bool) -> ExtendedReal:
    """alpha(t_c + side*eps) along eps = eps0 / 2**k, extrapolated to eps -> 0."""
    eps0 = 1e-3 * schedule.time_scale()
    samples = []
    for k in range(48):
        t = t_c + side * eps0 / 2**k
        a = float(schedule.delta(t)) / float(schedule.omega(t)) if schedule.omega(t) != 0 else math.copysign(math.inf, float(schedule.delta(t)))
        if not finite:
            if abs(a) > DIVERGENCE_THRESHOLD:
                return ExtendedReal("+inf" if a > 0 else "-inf")
            continue
        samples.append(a)
        if len(samples) >= 6:
            est = richardson_limit(samples[-6:])
            prev = richardson_limit(samples[-7:-1]) if len(samples) >= 7 else None
            if prev is not None and abs(est - prev) <= 1e-10 * max(1.0, abs(est)):
                break
    if not finite:
        raise ClassificationError("exponent undetermined: alpha does not diverge")
    est = richardson_limit(samples[-6:])
    if abs(est) > DIVERGENCE_THRESHOLD:
        return ExtendedReal("+inf" if est > 0 else "-inf")
    return ExtendedReal("finite", est)


def alpha_limit(schedule: Schedule, t_c: float, side) -> ExtendedReal:
    """One-sided limit of alpha = Delta/Omega at the crossing ``t_c``.

    Raises :class:`ClassificationError` if both pulses vanish identically
    on that side.
    """
    s = _side(side)
    d, o = _orders(schedule, t_c, s)
    if math.isinf(d.exponent) and math.isinf(o.exponent):
        raise ClassificationError(
            f"exponent undetermined: H vanishes identically on side {s:+d} of t={t_c}"
        )
    if d.exponent > o.exponent:
        category = ExtendedReal("finite", 0.0)
    elif d.exponent < o.exponent:
        sign = math.copysign(1.0, d.coefficient) * math.copysign(1.0, o.coefficient)
        category = ExtendedReal("+inf" if sign > 0 else "-inf")
    else:
        category = ExtendedReal("finite", d.coefficient / o.coefficient)

    tabulated = isinstance(schedule.delta, Tabulated) or isinstance(schedule.omega, Tabulated)
    if not tabulated:
        return category
    confirmed = _tabulated_alpha(schedule, t_c, s, category.is_finite)
    if confirmed.is_finite != category.is_finite or (
        not confirmed.is_finite and confirmed.tag != category.tag
    ):
        raise ClassificationError(
            f"exponent undetermined: fit says {category.to_json()}, "
            f"extrapolation says {confirmed.to_json()}"
        )
    return confirmed


@dataclass(frozen=True)
class ExponentVerdict:
    """Outcome of the power-law adiabaticity test at a crossing.

    ``a`` and ``b`` are the leading exponents of Delta and Omega (the larger
    of the two sides); ``eta_exponent`` is the predicted power of |t - t_c|
    in eta, None when a == b or an exponent is infinite.
    """

    verdict: str
    a: float
    b: float
    eta_exponent: float | None
    per_side: dict = field(default_factory=dict)
    flags: tuple = ()


def _verdict(a: float, b: float) -> tuple[str, float | None]:
    if a > 2 * b + 1:
        v = ADIABATIC_BY_A
    elif b > 2 * a + 1:
        v = ADIABATIC_BY_B
    else:
        v = NOT_GUARANTEED
    if math.isinf(a) or math.isinf(b) or a == b:
        return v, None
    return v, (a - 2 * b - 1) if a > b else (b - 2 * a - 1)


def classify_exponents(schedule: Schedule, t_c: float) -> ExponentVerdict:
    orders = {s: _orders(schedule, t_c, s) for s in (-1, 1)}
    flags = []
    per_side = {}
    for s, (d, o) in orders.items():
        if math.isinf(d.exponent) and math.isinf(o.exponent):
            raise ClassificationError(f"exponent undetermined on side {s:+d}")
        per_side["left" if s < 0 else "right"] = _verdict(d.exponent, o.exponent)[0]
    a = max(orders[-1][0].exponent, orders[1][0].exponent)
    b = max(orders[-1][1].exponent, orders[1][1].exponent)
    if (orders[-1][0].exponent != orders[1][0].exponent
            or orders[-1][1].exponent != orders[1][1].exponent):
        flags.append(ASYMMETRIC_FLAG)
    verdict, eta_exp = _verdict(a, b)
    if a == b:
        flags.append(SAME_ORDER_FLAG)
    return ExponentVerdict(verdict, a, b, eta_exp, per_side, tuple(flags))


def overlap_matrix(theta_left: float, theta_right: float) -> np.ndarray:
    """M[k, l] = <psi_k(t_c+)|psi_l(t_c-)> for k, l in (+, -)."""
    def states(th):
        c, s = math.cos(th), math.sin(th)
        return np.array([c, s]), np.array([s, -c])

    right = states(theta_right)
    left = states(theta_left)
    return np.array([[right[k] @ left[l] for l in range(2)] for k in range(2)])


@dataclass(frozen=True)
class CrossingReport:
    t_c: float
    alpha_left: ExtendedReal
    alpha_right: ExtendedReal
    theta_left: float
    theta_right: float
    Theta: float
    predicted_survival: float
    predicted_transition: float
    exponents: dict
    crossing_adiabatic: str
    eta_exponent: float | None
    flags: tuple
    overlap: np.ndarray

    def to_json(self) -> dict:
        def num(x):
            if x is None:
                return None
            if math.isinf(x):
                return "+inf" if x > 0 else "-inf"
            return float(x)

        return {
            "t_c": self.t_c,
            "alpha_left": self.alpha_left.to_json(),
            "alpha_right": self.alpha_right.to_json(),
            "theta_left": self.theta_left,
            "theta_right": self.theta_right,
            "Theta": self.Theta,
            "predicted_survival": self.predicted_survival,
            "predicted_transition": self.predicted_transition,
            "exponents": {k: num(v) for k, v in self.exponents.items()},
            "crossing_adiabatic": self.crossing_adiabatic,
            "eta_exponent": num(self.eta_exponent),
            "flags": list(self.flags),
            "overlap": self.overlap.tolist(),
        }


def theta_jump(schedule: Schedule, t_c: float) -> CrossingReport:
    """Jump of the mixing angle at ``t_c`` and the resulting predictions."""
    a_left = alpha_limit(schedule, t_c, -1)
    a_right = alpha_limit(schedule, t_c, +1)
    th_l = mixing_angle(a_left)
    th_r = mixing_angle(a_right)
    big_theta = th_r - th_l
    transition = math.sin(big_theta) ** 2
    survival = 1.0 - transition

    m = overlap_matrix(th_l, th_r)
    expected = np.array([[math.cos(big_theta), -math.sin(big_theta)],
                         [math.sin(big_theta), math.cos(big_theta)]])
    assert np.allclose(m, expected, atol=1e-14) and np.allclose(m @ m.T, np.eye(2), atol=1e-14)

    ev = classify_exponents(schedule, t_c)
    dl, ol = _orders(schedule, t_c, -1)
    dr, orr = _orders(schedule, t_c, +1)
    exponents = {
        "a": ev.a, "A_left": dl.coefficient, "A_right": dr.coefficient,
        "b": ev.b, "B_left": ol.coefficient, "B_right": orr.coefficient,
    }
    return CrossingReport(
        t_c=float(t_c),
        alpha_left=a_left,
        alpha_right=a_right,
        theta_left=th_l,
        theta_right=th_r,
        Theta=big_theta,
        predicted_survival=survival,
        predicted_transition=transition,
        exponents=exponents,
        crossing_adiabatic=ev.verdict,
        eta_exponent=ev.eta_exponent,
        flags=ev.flags,
        overlap=m,
    )


def empirical_eta_exponent(
    schedule: Schedule, t_c: float, side, eps_max: float, decades: float = 2.0, n: int = 41
) -> float:
    """Least-squares slope of log(eta) against log|t - t_c| over ``decades``
    below ``eps_max``."""
    from .propagator import eta_scan

    s = _side(side)
    eps = np.geomspace(eps_max * 10.0**-decades, eps_max, n)
    scan = eta_scan(schedule, t_c + s * eps)
    ok = np.isfinite(scan.eta) & (scan.eta > 0)
    if ok.sum() < 2:
        raise ClassificationError("eta vanishes or is undefined near the crossing")
    slope, _ = np.polyfit(np.log(eps[ok]), np.log(scan.eta[ok]), 1)
    return float(slope)


def pulse_area(shape, t1: float, t2: float, tol: float, breaks=()) -> float:
    """Integral of ``shape`` over [t1, t2], split at ``breaks`` (kinks)."""
    pts = [t1] + sorted(b for b in breaks if t1 < b < t2) + [t2]
    f = lambda s: float(shape(s))  # noqa: E731
    pieces = len(pts) - 1
    return sum(adaptive_simpson(f, lo, hi, tol / pieces) for lo, hi in zip(pts, pts[1:]))


def _theta_at(schedule: Schedule, t: float) -> float:
    d, o = float(schedule.delta(t)), float(schedule.omega(t))
    if o == 0.0:
        if d == 0.0:
            raise PreconditionError(f"theta undefined at t={t}: H vanishes")
        return math.pi / 2 if d > 0 else 0.0
    return mixing_angle(d / o)


def around_crossing_efficiency(
    schedule: Schedule, tau: float, quad_tol: float = 1e-10, t_c: float | None = None
) -> float:
    """Transfer efficiency when adiabaticity fails only inside [t_c-tau, t_c+tau].

    The window propagator is approximated by exp(-i * integral of H); with an
    odd detuning this is a pure sigma_x rotation by the pulse area ``xi``.
    """
    if t_c is None:
        if not schedule.crossings:
            raise PreconditionError("schedule declares no crossing")
        t_c = schedule.crossings[0]
    if not tau > 0:
        raise PreconditionError("tau must be positive")
    s = np.linspace(0.0, tau, 101)
    odd_err = np.abs(schedule.delta(t_c + s) + schedule.delta(t_c - s))
    if np.any(odd_err > 1e-9 * schedule.energy_scale):
        raise PreconditionError("detuning is not odd about the crossing")

    xi = pulse_area(schedule.omega, t_c - tau, t_c + tau, quad_tol, breaks=(t_c,))
    th_p = _theta_at(schedule, t_c + tau)
    th_m = _theta_at(schedule, t_c - tau)
    return (math.cos(xi) ** 2 * math.cos(th_p - th_m) ** 2
            + math.sin(xi) ** 2 * math.sin(th_p + th_m) ** 2)
