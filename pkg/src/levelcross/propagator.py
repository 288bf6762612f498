"""Time evolution of the two-state system.

The integrator applies the exact 2x2 exponential of H sampled at the step
midpoint, so every step is unitary to rounding.  Step size is controlled by
step doubling on the bare populations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from .dressed import eta as _eta
from .errors import DegeneracyError, StiffnessError
from .pulses import Schedule

__all__ = [
    "TwoStateKet",
    "Trajectory",
    "EtaScan",
    "step",
    "propagate",
    "dressed_populations",
    "eta_scan",
    "TRAJECTORY_COLUMNS",
]

# largest rotation angle h*|H| allowed in one step
MAX_PHASE = 1.0

TRAJECTORY_COLUMNS = (
    "t", "re_c_down", "im_c_down", "re_c_up", "im_c_up",
    "p_down", "p_up", "p_plus", "p_minus", "eta",
)


@dataclass(frozen=True)
class TwoStateKet:
    """Amplitudes (c_down, c_up) in the bare basis."""

    c_down: complex
    c_up: complex

    @classmethod
    def down(cls) -> "TwoStateKet":
        return cls(1.0 + 0j, 0j)

    @classmethod
    def up(cls) -> "TwoStateKet":
        return cls(0j, 1.0 + 0j)

    @classmethod
    def from_array(cls, a) -> "TwoStateKet":
        return cls(complex(a[0]), complex(a[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.c_down, self.c_up], dtype=complex)

    @property
    def norm(self) -> float:
        return math.sqrt(abs(self.c_down) ** 2 + abs(self.c_up) ** 2)

    @property
    def populations(self) -> tuple[float, float]:
        return abs(self.c_down) ** 2, abs(self.c_up) ** 2

    def conj(self) -> "TwoStateKet":
        return TwoStateKet(self.c_down.conjugate(), self.c_up.conjugate())


def step(delta: float, omega: float, h: float, psi: TwoStateKet, shift: float = 0.0) -> TwoStateKet:
    """Apply exp(-i H h) for constant H = (omega*sx - delta*sz)/2.

    ``shift`` adds ``shift * I`` to H (a global phase).
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    c0, c1 = K.step_kernel(float(delta), float(omega), float(h),
                           complex(psi.c_down), complex(psi.c_up), float(shift))
    return TwoStateKet(c0, c1)


@dataclass
class Trajectory:
    """Sampled solution of the Schroedinger equation.

    ``states`` has shape (n, 2) with columns (c_down, c_up).  Dressed
    populations and eta are NaN at samples where the dressed basis is
    undefined (a crossing).
    """

    times: np.ndarray
    states: np.ndarray
    populations_bare: np.ndarray
    populations_dressed: np.ndarray
    eta_profile: np.ndarray
    n_steps: int = 0
    n_rejected: int = 0

    def __len__(self) -> int:
        return len(self.times)

    def ket(self, i: int) -> TwoStateKet:
        return TwoStateKet.from_array(self.states[i])

    @property
    def final(self) -> TwoStateKet:
        return self.ket(-1)

    @property
    def p_up_final(self) -> float:
        return float(self.populations_bare[-1, 1])

    @property
    def p_down_final(self) -> float:
        return float(self.populations_bare[-1, 0])

    def rows(self):
        for i in range(len(self.times)):
            c0, c1 = self.states[i]
            yield (
                self.times[i], c0.real, c0.imag, c1.real, c1.imag,
                self.populations_bare[i, 0], self.populations_bare[i, 1],
                self.populations_dressed[i, 0], self.populations_dressed[i, 1],
                self.eta_profile[i],
            )

    def write_csv(self, path) -> None:
        from .harness import fmt  # deferred: harness imports this module

        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_COLUMNS)
            for row in self.rows():
                w.writerow([fmt(v) for v in row])


def _flat(schedule: Schedule):
    return schedule.delta._flat + schedule.omega._flat


def _dressed_components(schedule: Schedule, times: np.ndarray):
    """cos/sin of theta on a grid; NaN where delta = omega = 0."""
    d = schedule.delta(times)
    o = schedule.omega(times)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(
            o != 0.0,
            np.pi / 4 + 0.5 * np.arctan(d / np.where(o != 0.0, o, 1.0)),
            np.where(d > 0, np.pi / 2, 0.0),
        )
    degenerate = (d == 0.0) & (o == 0.0)
    theta = np.where(degenerate, np.nan, theta)
    return np.cos(theta), np.sin(theta), degenerate


def _project(states: np.ndarray, cos_t: np.ndarray, sin_t: np.ndarray) -> np.ndarray:
    a_plus = cos_t * states[:, 0] + sin_t * states[:, 1]
    a_minus = sin_t * states[:, 0] - cos_t * states[:, 1]
    return np.column_stack([np.abs(a_plus) ** 2, np.abs(a_minus) ** 2])


def _eta_on(schedule: Schedule, times: np.ndarray) -> np.ndarray:
    d = schedule.delta(times)
    o = schedule.omega(times)
    dd = schedule.delta.derivative(times)
    od = schedule.omega.derivative(times)
    out = np.full(times.shape, np.nan)
    ok = (d != 0.0) | (o != 0.0)
    if np.any(ok):
        out[ok] = _eta(d[ok], o[ok], dd[ok], od[ok])
    return out


def propagate(
    schedule: Schedule,
    psi0: TwoStateKet | None = None,
    tol: float = 1e-8,
    n_samples: int = 1001,
    shift: float = 0.0,
    max_phase: float = MAX_PHASE,
) -> Trajectory:
    """Integrate i dpsi/dt = H(t) psi across the schedule window.

    Parameters
    ----------
    schedule : Schedule
        Pulses and window ``[t_start, t_end]``.
    psi0 : TwoStateKet, optional
        Normalized initial state at ``t_start``; defaults to ``|down>``.
    tol : float
        Accepted bare-population discrepancy between one step and two half
        steps, per unit time.  Must lie in (0, 1e-2].
    n_samples : int
        Number of points of the uniform output grid (>= 2).
    shift : float
        Constant energy added to H (``shift * I``).

    Raises
    ------
    StiffnessError
        If the tolerance cannot be met at the minimum step (1e-8 x window).
    """
    if psi0 is None:
        psi0 = TwoStateKet.down()
    if not 0 < tol <= 1e-2:
        raise ValueError(f"tol must lie in (0, 1e-2], got {tol}")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    if abs(psi0.norm - 1.0) > 1e-9:
        raise ValueError(f"initial state not normalized (norm={psi0.norm})")

    times = np.linspace(schedule.t_start, schedule.t_end, n_samples)
    window = schedule.duration
    states, status, n_steps, n_tries = K.propagate_kernel(
        *_flat(schedule),
        complex(psi0.c_down), complex(psi0.c_up),
        times, float(tol), 1e-4 * window, 1e-8 * window, window / 64.0, float(shift),
        float(max_phase),
    )
    if status == K.STIFF:
        raise StiffnessError(
            f"tolerance {tol} not met at minimum step {1e-8 * window:.3g}"
        )
    bare = np.abs(states) ** 2
    cos_t, sin_t, _ = _dressed_components(schedule, times)
    return Trajectory(
        times=times,
        states=states,
        populations_bare=bare,
        populations_dressed=_project(states, cos_t, sin_t),
        eta_profile=_eta_on(schedule, times),
        n_steps=int(n_steps),
        n_rejected=int(n_tries - n_steps),
    )


def dressed_populations(schedule: Schedule, trajectory: Trajectory) -> np.ndarray:
    """(P_+, P_-) for every sample; raises if a sample sits on a crossing."""
    cos_t, sin_t, degenerate = _dressed_components(schedule, trajectory.times)
    if np.any(degenerate):
        t_bad = trajectory.times[np.argmax(degenerate)]
        raise DegeneracyError(f"sample at t={t_bad} lies on a crossing")
    return _project(trajectory.states, cos_t, sin_t)


@dataclass
class EtaScan:
    times: np.ndarray
    eta: np.ndarray
    max_outside: float


def eta_scan(schedule: Schedule, grid, exclusion: float = 0.0) -> EtaScan:
    """eta on ``grid`` and its maximum outside ``|t - t_c| <= exclusion``.

    Grid points where the dressed basis is undefined get NaN and are ignored
    by the maximum.
    """
    times = np.asarray(grid, dtype=float)
    values = _eta_on(schedule, times)
    mask = np.isfinite(values)
    for tc in schedule.crossings:
        mask &= np.abs(times - tc) > exclusion
    max_outside = float(np.max(values[mask])) if np.any(mask) else math.nan
    return EtaScan(times, values, max_outside)
