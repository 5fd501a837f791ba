"""Adaptive Dormand-Prince 5(4) integration of the mode equations.

Two right-hand sides are supported:

* ``damped_pair``: state ``(u, u', v, v')`` with
  ``u'' + L u' + omega_n(t)^2 u = 0`` and ``v'' - L v' + omega_n(t)^2 v = 0``;
* ``parametric_r``: state ``(r, r')`` with ``r'' + Omega_n(t)^2 r = 0``.

Step size control is the PI controller of Hairer & Wanner's DOPRI5 with the
mixed absolute/relative RMS error norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import IntegrationError, ParameterError, UsageError
from .formulas import Mode, ModelParams
from .specfun import BesselCombination, analytic_pair_derivs, conjugate_r_derivs

DAMPED_PAIR = "damped_pair"
PARAMETRIC_R = "parametric_r"
FORMS = (DAMPED_PAIR, PARAMETRIC_R)

OVERFLOW_GUARD = 1e150

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_HAT = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B_HAT
# 4th-order continuous extension, coefficients of theta, theta^2, theta^3, theta^4
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

# PI controller constants (DOPRI5 defaults)
_SAFETY = 0.9
_BETA = 0.04
_EXPO1 = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = math.inf
    dense_output: bool = False
    first_step: Optional[float] = None
    max_steps: int = 1_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            value = getattr(self, name)
            if not 1e-15 < value < 1e-2:
                raise ParameterError(f"{name} must lie in (1e-15, 1e-2), got {value!r}")
        if not self.max_step > 0:
            raise ParameterError("max_step must be > 0")
        if self.first_step is not None and not self.first_step > 0:
            raise ParameterError("first_step must be > 0")


@dataclass(frozen=True)
class OscillatorSystem:
    form: str
    mode: Mode
    params: ModelParams

    def __post_init__(self):
        if self.form not in FORMS:
            raise ParameterError(f"form must be one of {FORMS}, got {self.form!r}")

    @property
    def n(self) -> int:
        return self.mode.n

    @property
    def dim(self) -> int:
        return 4 if self.form == DAMPED_PAIR else 2

    @property
    def columns(self) -> tuple:
        if self.form == DAMPED_PAIR:
            return ("u", "udot", "v", "vdot")
        return ("r", "rdot")

    def omega_sq(self, t: float) -> float:
        w = self.mode.omega0(self.params) * math.exp(-self.params.L * t / (2.0 * self.n + 1.0))
        return w * w

    def capital_omega_sq(self, t: float) -> float:
        return self.omega_sq(t) - 0.25 * self.params.L ** 2

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        L = self.params.L
        if self.form == DAMPED_PAIR:
            w2 = self.omega_sq(t)
            return np.array([y[1], -L * y[1] - w2 * y[0], y[3], L * y[3] - w2 * y[2]])
        return np.array([y[1], -self.capital_omega_sq(t) * y[0]])


@dataclass
class StepStats:
    n_steps: int = 0
    n_rejected: int = 0
    n_rhs: int = 0
    max_local_error: float = 0.0


@dataclass(frozen=True)
class Trajectory:
    """Accepted samples of an integration; ``t`` strictly increasing."""

    t: np.ndarray
    y: np.ndarray
    columns: tuple
    stats: StepStats
    interpolant: Optional[Callable] = field(default=None, repr=False)

    def __len__(self):
        return len(self.t)

    def component(self, name: str) -> np.ndarray:
        return self.y[:, self.columns.index(name)]


class DenseOutput:
    """Piecewise quartic interpolant over the accepted steps."""

    def __init__(self):
        self._t0, self._h, self._y0, self._Q = [], [], [], []

    def add(self, t0, h, y0, K):
        self._t0.append(t0)
        self._h.append(h)
        self._y0.append(y0)
        self._Q.append(K.T @ _P)

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        starts = np.asarray(self._t0)
        ends = starts + np.asarray(self._h)
        if np.any(t < starts[0]) or np.any(t > ends[-1]):
            raise ValueError("dense output requested outside the integrated span")
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1)
        out = np.empty((len(t), len(self._y0[0])))
        for j, (tj, i) in enumerate(zip(t, idx)):
            theta = (tj - starts[i]) / self._h[i]
            powers = np.array([theta, theta ** 2, theta ** 3, theta ** 4])
            out[j] = self._y0[i] + self._h[i] * (self._Q[i] @ powers)
        return out


def _error_norm(err, y_old, y_new, cfg):
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(fun, t0, y0, f0, cfg, direction_span):
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    y1 = y0 + h0 * f0
    f1 = fun(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, direction_span, cfg.max_step)


def _check_finite_state(y, t):
    if not np.all(np.isfinite(y)):
        raise ValueError(f"initial state must be finite, got {y!r} at t={t!r}")


def integrate(system: OscillatorSystem, init: Sequence[float], t_span,
              cfg: IntegratorConfig = IntegratorConfig(),
              t_eval: Optional[Sequence[float]] = None) -> Trajectory:
    """Integrate ``system`` from ``init`` over ``t_span = (t0, t1)``.

    With ``t_eval`` the returned samples are the dense-output values at those
    times (which must lie in the span and be strictly increasing); otherwise
    every accepted step is returned.
    """
    t0, t1 = (float(v) for v in t_span)
    if not (t0 >= 0.0 and t1 > t0 and math.isfinite(t1)):
        raise ValueError(f"t_span must satisfy 0 <= t0 < t1 < inf, got {t_span!r}")
    y = np.array(init, dtype=float)
    if y.shape != (system.dim,):
        raise ValueError(f"{system.form} needs a state of length {system.dim}")
    _check_finite_state(y, t0)

    stats = StepStats()

    def fun(t, state):
        stats.n_rhs += 1
        return system.rhs(t, state)

    need_dense = cfg.dense_output or t_eval is not None
    dense = DenseOutput() if need_dense else None

    ts, ys = [t0], [y.copy()]
    t = t0
    f = fun(t, y)
    h = cfg.first_step if cfg.first_step is not None else _initial_step(fun, t, y, f, cfg, t1 - t0)
    h = float(min(h, cfg.max_step))
    facold = 1e-4
    K = np.empty((7, system.dim))

    while t < t1:
        if stats.n_steps + stats.n_rejected >= cfg.max_steps:
            raise IntegrationError("maximum number of steps exceeded", t=t, state=y.copy())
        if h < 16.0 * np.spacing(max(abs(t), 1.0)):
            raise IntegrationError(f"step size underflow at t={t!r}", t=t, state=y.copy())
        last = t + h >= t1
        if last:
            h = t1 - t

        K[0] = f
        for s in range(1, 6):
            K[s] = fun(t + _C[s] * h, y + h * (np.asarray(_A[s]) @ K[:s]))
        y_new = y + h * (_B[:6] @ K[:6])
        f_new = fun(t + h, y_new)
        K[6] = f_new
        err = _error_norm(h * (_E @ K), y, y_new, cfg)

        if err <= 1.0 and np.all(np.isfinite(y_new)):
            if np.max(np.abs(y_new)) > OVERFLOW_GUARD:
                raise IntegrationError(
                    f"state magnitude exceeded {OVERFLOW_GUARD:g} at t={t + h!r}",
                    t=t, state=y.copy())
            if dense is not None:
                dense.add(t, h, y.copy(), K.copy())
            stats.n_steps += 1
            stats.max_local_error = max(stats.max_local_error, err)
            t = t1 if last else t + h
            y, f = y_new, f_new
            ts.append(t)
            ys.append(y.copy())
            fac11 = max(err, 1e-16) ** _EXPO1
            fac = fac11 / facold ** _BETA
            fac = min(1.0 / _FAC_MIN, max(1.0 / _FAC_MAX, fac / _SAFETY))
            h = float(min(h / fac, cfg.max_step))
            facold = max(err, 1e-4)
        else:
            stats.n_rejected += 1
            if not np.isfinite(err):
                h *= 0.1
            else:
                fac11 = err ** _EXPO1
                h = float(h / min(1.0 / _FAC_MIN, fac11 / _SAFETY))

    if t_eval is not None:
        te = np.asarray(t_eval, dtype=float)
        if te.ndim != 1 or len(te) == 0 or np.any(np.diff(te) <= 0):
            raise ValueError("t_eval must be a non-empty strictly increasing sequence")
        t_out, y_out = te, dense(te)
    else:
        t_out, y_out = np.array(ts), np.array(ys)
    return Trajectory(t=t_out, y=y_out, columns=system.columns, stats=stats,
                      interpolant=dense if cfg.dense_output else None)


def analytic_initial_state(system: OscillatorSystem,
                           coeffs: BesselCombination = BesselCombination(),
                           t0: float = 0.0) -> np.ndarray:
    """State of the exact Bessel-built solution at ``t0`` (default initial data)."""
    if system.form == DAMPED_PAIR:
        (u, du, _), (v, dv, _) = analytic_pair_derivs(t0, system.mode, system.params, coeffs)
        return np.array([u, du, v, dv])
    r, dr, _ = conjugate_r_derivs(t0, system.mode, system.params, coeffs)
    return np.array([r, dr])


def residual(system: OscillatorSystem, candidate: Callable, t: float,
             component: str = "u", floor: float = 1e-300) -> float:
    """Normalised equation residual of ``candidate(t) -> (x, x', x'')``.

    ``component`` selects the equation: ``"u"`` (damped), ``"v"``
    (amplified) or ``"r"`` (parametric oscillator).
    """
    x, dx, d2x = candidate(t)
    L = system.params.L
    if component == "u":
        freq_sq, drag = system.omega_sq(t), L * dx
    elif component == "v":
        freq_sq, drag = system.omega_sq(t), -L * dx
    elif component == "r":
        freq_sq, drag = system.capital_omega_sq(t), 0.0
    else:
        raise UsageError(f"component must be 'u', 'v' or 'r', got {component!r}")
    res = d2x + drag + freq_sq * x
    norm = max(abs(freq_sq * x), abs(drag), abs(d2x), floor)
    return abs(res) / norm


def energy_like_diagnostic(traj: Trajectory, system: OscillatorSystem) -> np.ndarray:
    """``E(t) = r'^2/2 + Omega^2(t) r^2/2`` at every sample of a parametric run."""
    if system.form != PARAMETRIC_R or traj.columns != ("r", "rdot"):
        raise UsageError("energy diagnostic needs a parametric_r trajectory")
    r, rdot = traj.y[:, 0], traj.y[:, 1]
    w2 = np.array([system.capital_omega_sq(t) for t in traj.t])
    return 0.5 * rdot ** 2 + 0.5 * w2 * r ** 2
