"""Acceptance checks.

Each check returns ``(passed, detail)``.  Under pytest every check records a
``PASS``/``FAIL`` line that is echoed in the terminal summary; run this file
directly (``python tests/test_acceptance.py``) to print the lines without
pytest.  Timings exclude the one-off JIT load, which ``warm_up`` absorbs.
"""

import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from levelcross import (
    Constant,
    ExpGap,
    Linear,
    PowerLawOneSided,
    Schedule,
    classify_exponents,
    empirical_eta_exponent,
    eta,
    figure_config,
    lz_check,
    mixing_angle,
    propagate,
    run_single,
    run_sweep,
    theta_dot,
    theta_jump,
)
from levelcross.crossing import overlap_matrix

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []


def warm_up():
    propagate(Schedule(Linear(1.0), Constant(1.0), -1.0, 1.0), n_samples=3)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# ---- 1: LZSM oracle


def check_lz_oracle():
    rows, elapsed = _timed(lambda: lz_check((1.0, 2.0, 4.0), window_factor=1000, tol=1e-7))
    worst = max(r.error for r in rows)
    ok = worst <= 1e-3 and elapsed < 1.0
    return ok, f"max |numeric - exp(-pi p/2)| = {worst:.2e} for p in {{1,2,4}}, {elapsed:.2f} s"


# ---- 2: Fig. 1 sweep


def check_fig1():
    rows, elapsed = _timed(lambda: run_sweep(figure_config(1, tol=1e-8)))
    graded = [r for r in rows if r.max_eta_outside_crossing < 0.05]
    worst = max(r.abs_error for r in graded) if graded else math.nan
    (ref,) = run_sweep(figure_config(1, values=[1.0]))
    ok = (
        len(rows) == 40
        and not any(r.error for r in rows)
        and bool(graded)
        and worst <= 0.02
        and abs(ref.predicted_survival - 0.99751) <= 5e-6
        and elapsed < 30.0
    )
    return ok, (f"{len(graded)}/{len(rows)} points graded, max |error| = {worst:.4f}, "
                f"prediction at sigma=2/Omega0 = {ref.predicted_survival:.5f}, {elapsed:.1f} s")


# ---- 3: Fig. 3 at lambda = 1


def check_fig3():
    (row,), elapsed = _timed(lambda: run_sweep(figure_config(3, values=[1.0])))
    lams = figure_config(3).sweep.values
    cfg = figure_config(3)
    predictions = [theta_jump(cfg.with_value("schedule.omega.lam", v).schedule, 0.0).predicted_survival
                   for v in lams]
    ok = row.p_up_final <= 0.05 and all(p == 0.0 for p in predictions) and elapsed < 5.0
    return ok, (f"p_up = {row.p_up_final:.5f}, prediction zero at all {len(lams)} lambdas: "
                f"{all(p == 0.0 for p in predictions)}, {elapsed:.2f} s")


# ---- 4: Fig. 2 at lambda = 1


def check_fig2():
    (row,), elapsed = _timed(lambda: run_sweep(figure_config(2, values=[1.0])))
    target = math.cos(math.atan(5 / math.pi)) ** 2
    dev = abs(row.p_up_final - target)
    ok = dev <= 0.03 and elapsed < 5.0
    return ok, f"p_up = {row.p_up_final:.5f} vs {target:.5f} (|diff| = {dev:.4f}), {elapsed:.2f} s"


# ---- 5: properties


def _random_points(n=10_000, seed=5):
    rng = np.random.default_rng(seed)
    d, dd, od = rng.uniform(-5, 5, (3, n))
    o = rng.choice([-1.0, 1.0], n) * rng.uniform(0.1, 5, n)
    return d, o, dd, od


def check_eta_identity():
    """The tangent form against the literal |sin 2theta|^3 |alpha'/Omega| form."""
    d, o, dd, od = _random_points()
    alpha = d / o
    alpha_dot = (dd * o - d * od) / o**2
    tan_t = np.tan(mixing_angle(alpha))
    tangent_form = np.abs(tan_t / (1 + tan_t**2)) * np.abs(alpha_dot / (o * (1 + alpha**2)))
    cubed_form = np.abs(np.sin(2 * mixing_angle(alpha))) ** 3 * np.abs(alpha_dot / o)
    rel = np.max(np.abs(tangent_form - cubed_form) / tangent_form)
    closed = eta(d, o, dd, od)
    rel_closed = np.max(np.abs(closed - tangent_form) / tangent_form)
    return rel <= 1e-12, (f"max relative gap {rel:.3g} on 1e4 points "
                          f"(implemented eta vs tangent form: {rel_closed:.1e})")


def check_theta_identity():
    rng = np.random.default_rng(6)
    alpha = np.concatenate([rng.uniform(-10, 10, 5000), rng.standard_cauchy(5000) * 100])
    gap = np.max(np.abs(mixing_angle(alpha) - (math.pi / 4 + 0.5 * np.arctan(alpha))))
    return gap <= 1e-12, f"max |theta - (pi/4 + arctan(alpha)/2)| = {gap:.1e}"


def check_theta_dot():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        d0, o0, dd, od = rng.uniform(-2, 2, 4)
        o0 = math.copysign(abs(o0) + 0.1, o0)
        h = 1e-5
        fd = (mixing_angle((d0 + dd * h) / (o0 + od * h))
              - mixing_angle((d0 - dd * h) / (o0 - od * h))) / (2 * h)
        td = theta_dot(d0, o0, dd, od)
        worst = max(worst, abs(fd - td) / max(abs(td), 1e-3))
    return worst <= 1e-6, f"max relative deviation from central difference {worst:.1e}"


def _trajectories():
    for fid, values in ((1, (0.05, 1.0, 4.0)), (2, (0.05, 1.0, 3.0)), (3, (0.05, 1.0, 3.0))):
        cfg = figure_config(fid)
        for v in values:
            yield propagate(cfg.with_value(cfg.sweep.parameter, v).schedule, n_samples=1001)
    for p in (1.0, 2.0, 4.0):
        w = math.sqrt(p)
        T = 1000.0 * max(w, 1.0)
        yield propagate(Schedule(Linear(1.0), Constant(w), -T, T), tol=1e-7, n_samples=1001)


def check_unitarity():
    worst, elapsed = _timed(
        lambda: max(np.max(np.abs(np.linalg.norm(tr.states, axis=1) - 1)) for tr in _trajectories()))
    return worst <= 1e-9 and elapsed < 5.0, f"max | ||psi|| - 1 | = {worst:.1e} on 12 runs, {elapsed:.2f} s"


def check_overlap():
    rng = np.random.default_rng(8)
    worst = 0.0
    pairs = list(rng.uniform(0, math.pi / 2, (2000, 2))) + [(0.0, math.pi / 2), (math.pi / 2, 0.0)]
    for th_l, th_r in pairs:
        m = overlap_matrix(th_l, th_r)
        worst = max(worst, np.max(np.abs(m @ m.T - np.eye(2))))
    return worst <= 4 * np.finfo(float).eps, f"max |M M^T - I| = {worst:.1e}"


# ---- 6: exponent conditions


def _power(a, b):
    return Schedule(PowerLawOneSided(0.7, 1.3, a), PowerLawOneSided(1.1, 0.4, b), -1.0, 1.0, (0.0,))


def check_exponents():
    def run():
        out = []
        for a, b, expected in ((4, 1, 4 - 2 - 1), (1, 4, 4 - 2 - 1), (1, 2, -1)):
            s = _power(a, b)
            predicted = classify_exponents(s, 0.0).eta_exponent
            for side in (-1, 1):
                slope = empirical_eta_exponent(s, 0.0, side, eps_max=1e-2, decades=2.0)
                out.append((a, b, side, predicted, expected, slope))
        return out

    results, elapsed = _timed(run)
    worst = max(abs(slope - expected) for *_, expected, slope in results)
    consistent = all(p == e for _, _, _, p, e, _ in results)
    ok = worst <= 0.05 and consistent and elapsed < 2.0
    return ok, f"max |slope - predicted| = {worst:.1e} over (4,1), (1,4), (1,2) both sides, {elapsed:.2f} s"


# ---- 7: determinism


def check_determinism():
    base = figure_config(3, values=[0.05, 0.7, 1.0, 1.6, 2.4, 3.0])
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        run_sweep(base, workers=1, out_dir=tmp / "a")
        run_sweep(base, workers=1, out_dir=tmp / "b")
        run_sweep(base, workers=4, out_dir=tmp / "c")
        single = base.with_value(base.sweep.parameter, 1.0)
        run_single(single, tmp / "d")
        run_single(single, tmp / "e")
        sweeps = {(tmp / x / "sweep.csv").read_bytes() for x in "abc"}
        singles = {(tmp / x / name).read_bytes() for x in "de" for name in ("trajectory.csv",)}
        reports = {(tmp / x / "report.json").read_bytes() for x in "de"}
    ok = len(sweeps) == len(singles) == len(reports) == 1
    return ok, "sweep CSV (1, 1, 4 workers) and run outputs (2 repeats) byte-identical" if ok else \
        "outputs differ between runs"


CHECKS = [
    ("1", "LZSM oracle", check_lz_oracle),
    ("2", "Fig. 1 sweep", check_fig1),
    ("3", "Fig. 3 at lambda=1", check_fig3),
    ("4", "Fig. 2 at lambda=1", check_fig2),
    ("5a", "eta identity", check_eta_identity),
    ("5b", "theta identity", check_theta_identity),
    ("5c", "theta_dot vs finite difference", check_theta_dot),
    ("5d", "unitarity", check_unitarity),
    ("5e", "overlap orthogonality", check_overlap),
    ("6", "exponent conditions", check_exponents),
    ("7", "determinism", check_determinism),
]


def line(key, label, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {key} ({label}): {detail}"


def _evaluate(key):
    _, label, fn = next(c for c in CHECKS if c[0] == key)
    ok, detail = fn()
    text = line(key, label, ok, detail)
    ACCEPTANCE_LINES.append(text)
    print(text)
    return ok


UNATTAINABLE = {
    "5a": "the cubed-sine form as written is twice the tangent form; the identity needs a factor 1/2",
}


@pytest.mark.parametrize("key", [
    pytest.param(k, marks=pytest.mark.xfail(strict=True, reason=UNATTAINABLE[k]))
    if k in UNATTAINABLE else k
    for k, _, _ in CHECKS
])
def test_criterion(key, warm_jit):
    assert _evaluate(key)


if __name__ == "__main__":
    warm_up()
    results = [_evaluate(key) for key, _, _ in CHECKS]
    sys.exit(0 if all(results) else 1)
