"""Closed-form quantities of the parametric dissipative mode model.

A mode is labelled by its wavenumber ``k`` and its openness ``n`` (number of
links to the environment).  Its bare frequency ``omega0 = k*c`` decays as

    omega_n(t) = omega0 * exp(-L t / (2n + 1))

and the reduced frequency ``Omega_n(t)**2 = omega_n(t)**2 - L**2/4`` stays real
only up to the recording deadline ``T_{k,n}``.  Everything here is a pure
function of its arguments; scalar inputs give floats and array inputs are
broadcast with numpy where that makes sense.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, NotRecordableError, ParameterError, PastDeadlineError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ModelParams:
    """Global parameters: damping ``L`` (1/time) and propagation speed ``c``."""

    L: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        for name in ("L", "c"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, numbers.Real):
                raise ParameterError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
            object.__setattr__(self, name, float(value))

    @property
    def k0(self) -> float:
        """Infrared cutoff at the recording origin, L / (2c)."""
        return self.L / (2.0 * self.c)


def check_order(n) -> int:
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise ParameterError(f"n must be a non-negative integer, got {n!r}")
    if n < 0:
        raise ParameterError(f"n must be a non-negative integer, got {n!r}")
    return int(n)


@dataclass(frozen=True)
class Mode:
    """A (k, n) pair; ``omega0`` follows from the wave speed of the model."""

    k: float
    n: int = 0

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, numbers.Real):
            raise ParameterError(f"k must be a real number, got {self.k!r}")
        if not math.isfinite(self.k) or self.k <= 0:
            raise ParameterError(f"k must be finite and > 0, got {self.k!r}")
        object.__setattr__(self, "k", float(self.k))
        object.__setattr__(self, "n", check_order(self.n))

    def omega0(self, params: ModelParams) -> float:
        return self.k * params.c

    @classmethod
    def from_omega0(cls, omega0: float, n: int, params: ModelParams) -> "Mode":
        return cls(k=omega0 / params.c, n=n)


@dataclass(frozen=True)
class RecordingWindow:
    deadline: Optional[float]
    recordable: bool


@dataclass(frozen=True)
class DomainSnapshot:
    t: float
    k_threshold: float
    domain_size: float


def _rate(n: int, params: ModelParams) -> float:
    # a = L / (2n + 1): decay rate of omega_n, also 1/alpha_n
    return params.L / (2.0 * n + 1.0)


def _require_params(params) -> ModelParams:
    if not isinstance(params, ModelParams):
        raise ParameterError(f"expected ModelParams, got {type(params).__name__}")
    return params


def omega_n(t, n: int, omega0: float, params: ModelParams):
    """Time-dependent frequency ``omega0 * exp(-L t / (2n+1))``.

    Defined for every finite ``t`` (negative times included).
    """
    params = _require_params(params)
    n = check_order(n)
    if not omega0 > 0:
        raise ParameterError(f"omega0 must be > 0, got {omega0!r}")
    return omega0 * np.exp(-_rate(n, params) * np.asarray(t, dtype=float))[()]


def capital_omega_sq(t, mode: Mode, params: ModelParams):
    """Signed reduced frequency squared, ``omega_n(t)**2 - L**2/4``.

    Evaluated as ``(L**2/4) * expm1(2 ln(2 omega0 / L) - 2 L t/(2n+1))`` so the
    cancellation close to the deadline costs a factor ``T/(T-t)`` in relative
    accuracy instead of ``1/(L (T-t))``.
    """
    params = _require_params(params)
    a = _rate(mode.n, params)
    log_ratio = math.log(2.0 * mode.omega0(params) / params.L)
    t = np.asarray(t, dtype=float)
    return (0.25 * params.L**2 * np.expm1(2.0 * (log_ratio - a * t)))[()]


def capital_omega(t, mode: Mode, params: ModelParams) -> Optional[float]:
    """Real root of :func:`capital_omega_sq`, or ``None`` where it is negative."""
    sq = float(capital_omega_sq(t, mode, params))
    if sq < 0:
        return None
    return math.sqrt(sq)


def recording_deadline(mode: Mode, params: ModelParams) -> RecordingWindow:
    params = _require_params(params)
    ratio = 2.0 * mode.omega0(params) / params.L
    # ratio == 1 is a zero-length window and counts as not recordable
    if not ratio > 1.0:
        return RecordingWindow(deadline=None, recordable=False)
    deadline = (2.0 * mode.n + 1.0) / params.L * math.log(ratio)
    return RecordingWindow(deadline=deadline, recordable=True)


def deadline_or_raise(mode: Mode, params: ModelParams) -> float:
    window = recording_deadline(mode, params)
    if not window.recordable:
        raise NotRecordableError(
            f"mode k={mode.k!r}, n={mode.n} has 2*omega0/L <= 1 and never records"
        )
    return window.deadline


def k_threshold(n: int, t, params: ModelParams):
    """Smallest wavenumber satisfying the reality condition at time ``t >= 0``."""
    params = _require_params(params)
    n = check_order(n)
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise DomainError("k_threshold is defined for finite t >= 0 only")
    return (params.k0 * np.exp(_rate(n, params) * t))[()]


def domain_size(n: int, t, params: ModelParams, scale: float = TWO_PI):
    """Coherence-domain size ``scale / k_threshold(n, t)``; ``scale`` defaults to 2*pi."""
    return (scale / np.asarray(k_threshold(n, t, params)))[()]


def domain_snapshot(n: int, t: float, params: ModelParams, scale: float = TWO_PI) -> DomainSnapshot:
    kt = float(k_threshold(n, t, params))
    return DomainSnapshot(t=float(t), k_threshold=kt, domain_size=scale / kt)


def lifetime_lambda(t, mode: Mode, params: ModelParams):
    """Mode lifetime ``Lambda_{k,n}(t)`` on ``0 <= t < T_{k,n}``.

    Uses the log-space form

        Lambda = a t + 0.5 * log(expm1(-2 a T) / expm1(-2 a (T - t)))

    with ``a = L/(2n+1)``, which equals the sinh-ratio definition exactly and
    never forms the ratio of two small sinh values.
    """
    params = _require_params(params)
    T = deadline_or_raise(mode, params)
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise DomainError("lifetime is defined for finite t >= 0 only")
    if np.any(t >= T):
        raise PastDeadlineError(f"t must be < T_(k,n) = {T!r}")
    a = _rate(mode.n, params)
    lam = a * t + 0.5 * np.log(np.expm1(-2.0 * a * T) / np.expm1(-2.0 * a * (T - t)))
    return lam[()]


def lambda_inverse(lam: float, mode: Mode, params: ModelParams) -> float:
    """Time at which the lifetime reaches ``lam >= 0`` (closed form)."""
    if not lam >= 0:
        raise DomainError(f"lifetime level must be >= 0, got {lam!r}")
    T = deadline_or_raise(mode, params)
    a = _rate(mode.n, params)
    # exp(-2 a t) = exp(-2 a T) + exp(-2 lam) (1 - exp(-2 a T))
    floor = math.exp(-2.0 * a * T)
    q = floor - math.exp(-2.0 * lam) * math.expm1(-2.0 * a * T)
    return min(-math.log(q) / (2.0 * a), T)


def omega_via_lambda(t, mode: Mode, params: ModelParams):
    """``Omega(0) * exp(-Lambda(t))``; must agree with :func:`capital_omega`."""
    lam = lifetime_lambda(t, mode, params)
    omega_zero = math.sqrt(float(capital_omega_sq(0.0, mode, params)))
    return (omega_zero * np.exp(-np.asarray(lam)))[()]
