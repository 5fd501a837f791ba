"""Spherical Bessel functions and the substitution chain onto the oscillator pair.

``j_n`` is evaluated by a power series for small arguments, by upward
recurrence from ``sin z / z`` when ``z >= n`` and by Miller's downward
recurrence otherwise.  ``y_n`` always uses upward recurrence, which is stable
for the second kind.

The substitution

    w_{n,l}(t) = M_n(z) * x**(-l),   z = eps_n * x,   x = exp(-t / alpha_n)

with ``alpha_n = (2n+1)/L`` and ``eps_n = omega0 * alpha_n`` maps a solution
``M_n`` of the spherical Bessel equation onto solutions of the damped
(``l = -(n+1)``) and amplified (``l = n``) oscillator equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CapabilityError, DomainError
from .formulas import Mode, ModelParams, check_order

MAX_ORDER = 500
Y_MIN_ARG = 1e-6

_EPS = np.finfo(float).eps
_SERIES_MAX_ARG = 1.0
_RESCALE = 1e250


class BesselValue(NamedTuple):
    value: float
    abserr: float


@dataclass(frozen=True)
class BesselCombination:
    """``M_n = A j_n + B y_n``; the default is the regular solution ``j_n``."""

    A: float = 1.0
    B: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.A) and math.isfinite(self.B)):
            raise DomainError("Bessel combination coefficients must be finite")
        if self.A == 0.0 and self.B == 0.0:
            raise DomainError("(A, B) = (0, 0) is the trivial solution")

    @classmethod
    def first(cls) -> "BesselCombination":
        return cls(1.0, 0.0)

    @classmethod
    def second(cls) -> "BesselCombination":
        return cls(0.0, 1.0)


def _check_arg(n, z):
    n = check_order(n)
    if n > MAX_ORDER:
        raise CapabilityError(f"order {n} exceeds supported maximum {MAX_ORDER}")
    z = float(z)
    if not math.isfinite(z) or z <= 0.0:
        raise DomainError(f"spherical Bessel argument must be finite and > 0, got {z!r}")
    return n, z


def _j_series(n: int, z: float):
    # z**n / (2n+1)!! * sum_k (-z^2/2)^k / (k! prod_{i=1..k} (2n+2i+1))
    pref = 1.0
    for i in range(1, n + 1):
        pref *= z / (2 * i + 1)
    h = -0.5 * z * z
    term, total, absum = 1.0, 1.0, 1.0
    k = 0
    while True:
        k += 1
        term *= h / (k * (2 * n + 2 * k + 1))
        total += term
        absum += abs(term)
        if abs(term) < 0.25 * _EPS * abs(total):
            break
    value = pref * total
    return value, (n + 4) * _EPS * abs(pref) * absum


def _j_upward(nmax: int, z: float) -> np.ndarray:
    s, c = math.sin(z), math.cos(z)
    out = np.empty(nmax + 1)
    out[0] = s / z
    if nmax >= 1:
        out[1] = s / (z * z) - c / z
    for l in range(1, nmax):
        out[l + 1] = (2 * l + 1) / z * out[l] - out[l - 1]
    return out


def _miller_start(nmax: int, z: float) -> int:
    return int(max(nmax, z)) + int(math.sqrt(40.0 * max(nmax, z))) + 16


def _j_miller(nmax: int, z: float) -> np.ndarray:
    top = _miller_start(nmax, z)
    vals = np.zeros(top + 2)
    vals[top + 1] = 0.0
    vals[top] = 1e-300
    for l in range(top, 0, -1):
        vals[l - 1] = (2 * l + 1) / z * vals[l] - vals[l + 1]
        if abs(vals[l - 1]) > _RESCALE:
            # orders above l-1 may underflow here, which is the right answer
            vals[l - 1 :] /= _RESCALE
    s, c = math.sin(z), math.cos(z)
    j0 = s / z
    j1 = s / (z * z) - c / z
    # normalise on whichever low order is further from a zero
    if abs(j0) >= abs(j1):
        scale = j0 / vals[0]
    else:
        scale = j1 / vals[1]
    return vals[: nmax + 1] * scale


def _j_sequence(nmax: int, z: float) -> np.ndarray:
    if z >= nmax:
        return _j_upward(nmax, z)
    return _j_miller(nmax, z)


def _y_sequence(nmax: int, z: float) -> np.ndarray:
    s, c = math.sin(z), math.cos(z)
    out = np.empty(nmax + 1)
    out[0] = -c / z
    if nmax >= 1:
        out[1] = -c / (z * z) - s / z
    for l in range(1, nmax):
        out[l + 1] = (2 * l + 1) / z * out[l] - out[l - 1]
    return out


def _j_value(n: int, z: float) -> BesselValue:
    if z <= _SERIES_MAX_ARG:
        return BesselValue(*_j_series(n, z))
    seq = _j_sequence(n, z)
    value = float(seq[n])
    if z >= n:
        # upward recurrence: error tracks the largest magnitude met on the way
        scale = float(np.max(np.abs(seq)))
        err = 2 * (n + 2) * _EPS * scale
    else:
        err = 2 * (n + 2) * _EPS * abs(value)
    return BesselValue(value, err)


def sph_bessel_j(n: int, z: float) -> BesselValue:
    """Spherical Bessel function of the first kind ``j_n(z)`` for ``z > 0``."""
    n, z = _check_arg(n, z)
    return _j_value(n, z)


def sph_bessel_y(n: int, z: float) -> BesselValue:
    """Spherical Bessel function of the second kind ``y_n(z)`` for ``z >= 1e-6``."""
    n, z = _check_arg(n, z)
    if z < Y_MIN_ARG:
        raise DomainError(f"y_n is only evaluated for z >= {Y_MIN_ARG}, got {z!r}")
    with np.errstate(over="ignore", invalid="ignore"):
        seq = _y_sequence(n, z)
    value = float(seq[n])
    if not math.isfinite(value):
        raise CapabilityError(f"y_{n}({z!r}) overflows double precision")
    scale = float(np.max(np.abs(seq[: n + 1])))
    return BesselValue(value, 2 * (n + 2) * _EPS * scale)


def _pair(n: int, z: float, kind: str):
    """Return (f_{n-1}, f_n) with the negative-order closed forms for n = 0."""
    if kind == "j":
        if n == 0:
            return math.cos(z) / z, _j_value(0, z).value
        if z <= _SERIES_MAX_ARG:
            return _j_series(n - 1, z)[0], _j_series(n, z)[0]
        seq = _j_sequence(n, z)
        return float(seq[n - 1]), float(seq[n])
    if z < Y_MIN_ARG:
        raise DomainError(f"y_n is only evaluated for z >= {Y_MIN_ARG}, got {z!r}")
    with np.errstate(over="ignore", invalid="ignore"):
        seq = _y_sequence(n, z)
    if n == 0:
        return math.sin(z) / z, float(seq[0])
    return float(seq[n - 1]), float(seq[n])


def _derivs_from_pair(n: int, z: float, fm1: float, f: float):
    # f_n'   = f_{n-1} - (n+1)/z f_n
    # f_{n-1}' = -f_n + (n-1)/z f_{n-1}
    d1 = fm1 - (n + 1) / z * f
    dm1 = -f + (n - 1) / z * fm1
    d2 = dm1 - (n + 1) / z * d1 + (n + 1) / (z * z) * f
    return f, d1, d2


def sph_bessel_derivs(n: int, z: float, kind: str = "j"):
    """``(f_n, f_n', f_n'')`` from recurrences, ``kind`` in {"j", "y"}."""
    n, z = _check_arg(n, z)
    if kind not in ("j", "y"):
        raise ValueError(f"kind must be 'j' or 'y', got {kind!r}")
    fm1, f = _pair(n, z, kind)
    out = _derivs_from_pair(n, z, fm1, f)
    if not all(math.isfinite(v) for v in out):
        raise CapabilityError(f"{kind}_{n}({z!r}) overflows double precision")
    return out


def combination_derivs(n: int, z: float, coeffs: BesselCombination):
    """``(M, M', M'')`` for ``M_n = A j_n + B y_n`` at ``z``."""
    m = np.zeros(3)
    if coeffs.A != 0.0:
        m += coeffs.A * np.array(sph_bessel_derivs(n, z, "j"))
    if coeffs.B != 0.0:
        m += coeffs.B * np.array(sph_bessel_derivs(n, z, "y"))
    return float(m[0]), float(m[1]), float(m[2])


@dataclass(frozen=True)
class TransformParams:
    """Bookkeeping for the map between Bessel and oscillator solutions."""

    n: int
    alpha_n: float
    epsilon_n: float

    @classmethod
    def for_mode(cls, mode: Mode, params: ModelParams) -> "TransformParams":
        alpha = (2.0 * mode.n + 1.0) / params.L
        return cls(n=mode.n, alpha_n=alpha, epsilon_n=mode.omega0(params) * alpha)

    def x(self, t):
        return np.exp(-np.asarray(t, dtype=float) / self.alpha_n)[()]

    def z(self, t):
        return (self.epsilon_n * np.asarray(self.x(t)))[()]


def mirror_solution(t: float, l: float, coeffs: BesselCombination, mode: Mode,
                    params: ModelParams):
    """``(w, dw/dt, d2w/dt2)`` for ``w_{n,l}(t) = M_n(z(t)) x(t)**(-l)``.

    ``l = -(n+1)`` gives the damped solution u, ``l = n`` the amplified
    solution v and ``l = -1/2`` (times sqrt 2) the parametric oscillator r.
    """
    t = float(t)
    if not t >= 0.0:
        raise DomainError(f"t must be >= 0, got {t!r}")
    tp = TransformParams.for_mode(mode, params)
    z = float(tp.z(t))
    M, dM, d2M = combination_derivs(mode.n, z, coeffs)
    xl = math.exp(l * t / tp.alpha_n)  # x**(-l)
    # derivatives in s = ln x = -t/alpha, then d/dt = -(1/alpha) d/ds
    ws = (z * dM - l * M) * xl
    wss = (z * z * d2M + (1.0 - 2.0 * l) * z * dM + l * l * M) * xl
    return M * xl, -ws / tp.alpha_n, wss / tp.alpha_n**2


def analytic_pair(t: float, mode: Mode, params: ModelParams,
                  coeffs: BesselCombination = BesselCombination()):
    """Exact ``(u, v)`` built from one Bessel solution ``M_n``."""
    u = mirror_solution(t, -(mode.n + 1.0), coeffs, mode, params)[0]
    v = mirror_solution(t, float(mode.n), coeffs, mode, params)[0]
    return u, v


def analytic_pair_derivs(t: float, mode: Mode, params: ModelParams,
                         coeffs: BesselCombination = BesselCombination()):
    """``((u, u', u''), (v, v', v''))`` with analytic time derivatives."""
    return (mirror_solution(t, -(mode.n + 1.0), coeffs, mode, params),
            mirror_solution(t, float(mode.n), coeffs, mode, params))


def conjugate_r(t: float, mode: Mode, params: ModelParams,
                coeffs: BesselCombination = BesselCombination()) -> float:
    """``r_n(t) = sqrt(2) u(t) exp(L t / 2)``."""
    u, _ = analytic_pair(t, mode, params, coeffs)
    return math.sqrt(2.0) * u * math.exp(0.5 * params.L * t)


def conjugate_r_from_v(t: float, mode: Mode, params: ModelParams,
                       coeffs: BesselCombination = BesselCombination()) -> float:
    """Second route to ``r_n``: ``sqrt(2) v(t) exp(-L t / 2)``."""
    _, v = analytic_pair(t, mode, params, coeffs)
    return math.sqrt(2.0) * v * math.exp(-0.5 * params.L * t)


def conjugate_r_derivs(t: float, mode: Mode, params: ModelParams,
                       coeffs: BesselCombination = BesselCombination()):
    # u e^{Lt/2} = M x^{n+1} x^{-(n+1/2)} = M x^{1/2}, i.e. w with l = -1/2
    w = mirror_solution(t, -0.5, coeffs, mode, params)
    s2 = math.sqrt(2.0)
    return s2 * w[0], s2 * w[1], s2 * w[2]
