"""Compiled scalar kernels shared by pulse evaluation and the propagator.

Every pulse shape is flattened to ``(kind, params, knots, coeffs)`` so the
time-stepping loop can evaluate the Hamiltonian without leaving nopython mode.
Tabulated shapes are stored as piecewise cubics in power form (scipy's
``PPoly`` layout, highest power first); linear interpolation pads the two
upper rows with zeros.
"""

import math

import numpy as np
from numba import njit

CONSTANT = 0
LINEAR = 1
EXP_GAP = 2
SINE = 3
SINE_ABS = 4
T_SINE = 5
POWER_LAW = 6
TABULATED = 7

# Array arguments cost a refcount round trip per call, so the stepping loop
# passes analytic parameters as scalars and touches arrays only for
# tabulated pulses.

# status codes returned by propagate_kernel
OK = 0
STIFF = 1


@njit(cache=True, inline="always")
def _interval(knots, t, side):
    n = knots.shape[0]
    if side < 0:
        i = np.searchsorted(knots, t, side="left") - 1
    else:
        i = np.searchsorted(knots, t, side="right") - 1
    if i < 0:
        i = 0
    if i > n - 2:
        i = n - 2
    return i


@njit(cache=True, inline="always")
def analytic_value(kind, p0, p1, p2, t):
    if kind == CONSTANT:
        return p0
    if kind == LINEAR:
        return p0 * t
    if kind == EXP_GAP:
        return p0 * (1.0 - math.exp(-abs(t / p1)))
    if kind == SINE:
        return p0 * p1 * math.sin(math.pi * t / p2)
    if kind == SINE_ABS:
        return p0 * p1 * abs(math.sin(math.pi * t / p2))
    if kind == T_SINE:
        return p0 * p1 * t * math.sin(math.pi * t / p2)
    # power law
    if t < 0.0:
        return p0 * (-t) ** p2
    return p1 * t ** p2


@njit(cache=True)
def table_value(knots, coeffs, t):
    i = _interval(knots, t, 1)
    dx = t - knots[i]
    return ((coeffs[0, i] * dx + coeffs[1, i]) * dx + coeffs[2, i]) * dx + coeffs[3, i]


@njit(cache=True)
def pulse_value(kind, p, knots, coeffs, t):
    if kind == TABULATED:
        return table_value(knots, coeffs, t)
    return analytic_value(kind, p[0], p[1], p[2], t)


@njit(cache=True)
def pulse_derivative(kind, p, knots, coeffs, t, side):
    if kind == CONSTANT:
        return 0.0
    if kind == LINEAR:
        return p[0]
    if kind == EXP_GAP:
        s = 1.0 if (t > 0.0 or (t == 0.0 and side > 0)) else -1.0
        return s * p[0] / p[1] * math.exp(-abs(t / p[1]))
    if kind == SINE:
        return p[0] * p[1] * math.pi / p[2] * math.cos(math.pi * t / p[2])
    if kind == SINE_ABS:
        x = math.pi * t / p[2]
        sn = math.sin(x)
        d = p[0] * p[1] * math.pi / p[2] * math.cos(x)
        if sn > 0.0:
            return d
        if sn < 0.0:
            return -d
        # kink at a zero of sin: one-sided slope
        return side * abs(d) * (1.0 if p[0] * p[1] >= 0.0 else -1.0)
    if kind == T_SINE:
        x = math.pi * t / p[2]
        return p[0] * p[1] * (math.sin(x) + t * math.pi / p[2] * math.cos(x))
    if kind == POWER_LAW:
        a = p[2]
        if t > 0.0:
            return a * p[1] * t ** (a - 1.0)
        if t < 0.0:
            return -a * p[0] * (-t) ** (a - 1.0)
        if a > 1.0:
            return 0.0
        coef = p[1] if side > 0 else -p[0]
        if a == 1.0:
            return coef
        if coef == 0.0:
            return 0.0
        return math.copysign(math.inf, coef)
    i = _interval(knots, t, side)
    dx = t - knots[i]
    return (3.0 * coeffs[0, i] * dx + 2.0 * coeffs[1, i]) * dx + coeffs[2, i]


@njit(cache=True)
def pulse_values(kind, p, knots, coeffs, ts):
    out = np.empty(ts.shape[0])
    for j in range(ts.shape[0]):
        out[j] = pulse_value(kind, p, knots, coeffs, ts[j])
    return out


@njit(cache=True)
def pulse_derivatives(kind, p, knots, coeffs, ts, side):
    out = np.empty(ts.shape[0])
    for j in range(ts.shape[0]):
        out[j] = pulse_derivative(kind, p, knots, coeffs, ts[j], side)
    return out


@njit(cache=True, inline="always")
def _rotate(delta, omega, h, ar, ai, br, bi):
    """exp(-i H h) on (a, b) = (ar + i ai, br + i bi) in real arithmetic."""
    r = math.sqrt(delta * delta + omega * omega)
    if r == 0.0:
        return ar, ai, br, bi
    phi = 0.5 * h * r
    cs = math.cos(phi)
    sn = math.sin(phi)
    nx = omega / r * sn
    nz = -delta / r * sn
    # (n.sigma) psi with n.sigma = [[nz, nx], [nx, -nz]], then multiply by -i
    ur = nz * ar + nx * br
    ui = nz * ai + nx * bi
    vr = nx * ar - nz * br
    vi = nx * ai - nz * bi
    return cs * ar + ui, cs * ai - ur, cs * br + vi, cs * bi - vr


@njit(cache=True, inline="always")
def _phase(h, shift, ar, ai, br, bi):
    if shift == 0.0:
        return ar, ai, br, bi
    gc = math.cos(shift * h)
    gs = -math.sin(shift * h)
    return ar * gc - ai * gs, ar * gs + ai * gc, br * gc - bi * gs, br * gs + bi * gc


@njit(cache=True)
def step_kernel(delta, omega, h, c0, c1, shift):
    """exp(-i (H + shift*I) h) applied to (c0, c1), H = (Omega sx - Delta sz)/2."""
    ar, ai, br, bi = _rotate(delta, omega, h, c0.real, c0.imag, c1.real, c1.imag)
    ar, ai, br, bi = _phase(h, shift, ar, ai, br, bi)
    return complex(ar, ai), complex(br, bi)


@njit(cache=True)
def propagate_kernel(
    dk, dp, dx, dc,
    ok, op, ox, oc,
    c0, c1,
    sample_times, tol, h_init, h_min, h_max, shift, max_phase,
):
    """Adaptive midpoint-exponential stepping with step doubling.

    A step is accepted when the bare-population difference between one full
    step and two half steps is at most ``tol * h``.  Independently, a step may
    not rotate the state by more than ``max_phase`` (h * |H| <= max_phase);
    beyond that the population estimate no longer sees the aliasing of the
    fast precession.  Returns the state at every sample time, a status code,
    the number of accepted steps and the number of attempted steps.

    A closing step shorter than ``h_min`` is always accepted.

    ``shift * I`` only contributes the global phase exp(-i shift (t - t0)),
    which is applied to the stored samples and takes no part in stepping.
    """
    n = sample_times.shape[0]
    out = np.empty((n, 2), dtype=np.complex128)
    out[0, 0] = c0
    out[0, 1] = c1
    ar, ai, br, bi = c0.real, c0.imag, c1.real, c1.imag
    d0, d1, d2 = dp[0], dp[1], dp[2]
    o0, o1, o2 = op[0], op[1], op[2]
    dtab = dk == TABULATED
    otab = ok == TABULATED
    t = sample_times[0]
    h = h_init
    n_steps = 0
    n_tries = 0
    for k in range(1, n):
        t_target = sample_times[k]
        while t < t_target:
            n_tries += 1
            d = table_value(dx, dc, t) if dtab else analytic_value(dk, d0, d1, d2, t)
            o = table_value(ox, oc, t) if otab else analytic_value(ok, o0, o1, o2, t)
            r = 0.5 * math.sqrt(d * d + o * o)
            if r * h > max_phase:
                h = max(h_min, max_phase / r)
            remaining = t_target - t
            last = h >= remaining
            h_try = remaining if last else h

            tm = t + 0.5 * h_try
            d = table_value(dx, dc, tm) if dtab else analytic_value(dk, d0, d1, d2, tm)
            o = table_value(ox, oc, tm) if otab else analytic_value(ok, o0, o1, o2, tm)
            fr, fi, gr, gi = _rotate(d, o, h_try, ar, ai, br, bi)

            hh = 0.5 * h_try
            tq = t + 0.25 * h_try
            d = table_value(dx, dc, tq) if dtab else analytic_value(dk, d0, d1, d2, tq)
            o = table_value(ox, oc, tq) if otab else analytic_value(ok, o0, o1, o2, tq)
            xr, xi, yr, yi = _rotate(d, o, hh, ar, ai, br, bi)
            tq = t + 0.75 * h_try
            d = table_value(dx, dc, tq) if dtab else analytic_value(dk, d0, d1, d2, tq)
            o = table_value(ox, oc, tq) if otab else analytic_value(ok, o0, o1, o2, tq)
            xr, xi, yr, yi = _rotate(d, o, hh, xr, xi, yr, yi)

            err = max(
                abs((fr * fr + fi * fi) - (xr * xr + xi * xi)),
                abs((gr * gr + gi * gi) - (yr * yr + yi * yi)),
            )
            bound = tol * h_try
            # a sliver left before a sample by rounding cannot be refined further
            if err <= bound or (last and h_try < h_min):
                ar, ai, br, bi = xr, xi, yr, yi
                t = t_target if last else t + h_try
                n_steps += 1
                fac = 4.0 if err == 0.0 else min(4.0, max(0.2, 0.9 * math.sqrt(bound / err)))
                if not last:
                    h = min(h_max, h_try * fac)
                elif fac < 1.0 and h_try >= h:
                    # a truncated closing step says nothing about the size of h
                    h = max(h_min, h_try * fac)
            else:
                if h_try <= h_min:
                    return out, STIFF, n_steps, n_tries
                h = max(h_min, h_try * max(0.2, 0.9 * math.sqrt(bound / err)))
        pr, pi_, qr, qi = _phase(t_target - sample_times[0], shift, ar, ai, br, bi)
        out[k, 0] = complex(pr, pi_)
        out[k, 1] = complex(qr, qi)
    return out, OK, n_steps, n_tries
