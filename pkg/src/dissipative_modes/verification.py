"""Identity and residual checks behind the ``verify`` command."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import mpmath
import numpy as np

from .formulas import (
    Mode,
    ModelParams,
    capital_omega,
    capital_omega_sq,
    k_threshold,
    lifetime_lambda,
    omega_n,
    omega_via_lambda,
    recording_deadline,
)
from .integrator import (
    DAMPED_PAIR,
    PARAMETRIC_R,
    IntegratorConfig,
    OscillatorSystem,
    analytic_initial_state,
    energy_like_diagnostic,
    integrate,
    residual,
)
from .specfun import (
    analytic_pair,
    analytic_pair_derivs,
    conjugate_r,
    conjugate_r_derivs,
    conjugate_r_from_v,
    sph_bessel_derivs,
    sph_bessel_j,
    sph_bessel_y,
)

EPS = float(np.finfo(float).eps)
TRANSFORM_ORDERS = (0, 1, 2, 5, 10)


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def random_recordable_samples(rng, count, t_fraction=0.99):
    """Random (L, c, k, n, t) with 2 omega0/L in [1.05, 1e3] and t in [0, t_fraction*T]."""
    L = 10 ** rng.uniform(-1, 1, count)
    c = 10 ** rng.uniform(-1, 1, count)
    ratio = 10 ** rng.uniform(math.log10(1.05), 3, count)
    k = ratio * L / (2 * c)
    n = rng.integers(0, 51, count)
    frac = rng.uniform(0, t_fraction, count)
    rows = []
    for Li, ci, ki, ni, fi in zip(L, c, k, n, frac):
        params = ModelParams(L=float(Li), c=float(ci))
        mode = Mode(float(ki), int(ni))
        T = recording_deadline(mode, params).deadline
        rows.append((params, mode, fi * T))
    return rows


def identity_error(samples, fault=0.0):
    worst = 0.0
    for params, mode, t in samples:
        lhs = float(capital_omega_sq(t, mode, params))
        rhs = float(capital_omega_sq(0.0, mode, params)) * math.exp(
            -2.0 * float(lifetime_lambda(t, mode, params)))
        rhs *= 1.0 + fault
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return worst


def omega_route_error(samples):
    worst = 0.0
    for params, mode, t in samples:
        direct = capital_omega(t, mode, params)
        via = float(omega_via_lambda(t, mode, params))
        worst = max(worst, abs(direct - via) / direct)
    return worst


def reality_mismatches(rng, count, boundary=1e-12):
    mismatches = 0
    tested = 0
    while tested < count:
        params = ModelParams(L=float(10 ** rng.uniform(-1, 1)), c=float(10 ** rng.uniform(-1, 1)))
        n = int(rng.integers(0, 51))
        mode = Mode(float(params.k0 * 10 ** rng.uniform(-0.5, 2)), n)
        T = recording_deadline(mode, params).deadline
        t_ref = T if T is not None else 1.0 / params.L
        t = float(rng.uniform(0, 2.0 * max(t_ref, 1e-3)))
        if T is not None and abs(t - T) <= boundary * max(T, 1.0):
            continue
        tested += 1
        inside = T is not None and t <= T
        above = mode.k >= float(k_threshold(n, t, params))
        mismatches += inside != above
    return mismatches


def bessel_anchor_errors(grid=None):
    """Relative errors against the closed forms evaluated at 40 digits."""
    if grid is None:
        grid = np.geomspace(1e-3, 1e2, 400)
    out = {"j0": 0.0, "j1": 0.0, "y0": 0.0}
    with mpmath.workdps(40):
        for z in grid:
            zm = mpmath.mpf(float(z))
            refs = {
                "j0": mpmath.sin(zm) / zm,
                "j1": mpmath.sin(zm) / zm ** 2 - mpmath.cos(zm) / zm,
                "y0": -mpmath.cos(zm) / zm,
            }
            vals = {"j0": sph_bessel_j(0, z).value, "j1": sph_bessel_j(1, z).value,
                    "y0": sph_bessel_y(0, z).value}
            for key, ref in refs.items():
                err = abs(vals[key] - ref) / abs(ref)
                out[key] = max(out[key], float(err))
    return out


def wronskian_error(max_order=20, grid=None):
    if grid is None:
        grid = np.geomspace(0.1, 100.0, 60)
    worst = 0.0
    for n in range(max_order + 1):
        for z in grid:
            j, dj, _ = sph_bessel_derivs(n, z, "j")
            y, dy, _ = sph_bessel_derivs(n, z, "y")
            w = j * dy - dj * y
            worst = max(worst, abs(w * z * z - 1.0))
    return worst


def recurrence_error(max_order=20, grid=None):
    if grid is None:
        grid = np.geomspace(0.1, 100.0, 40)
    worst = 0.0
    for n in range(1, max_order):
        for z in grid:
            for f in (sph_bessel_j, sph_bessel_y):
                lo, mid, hi = f(n - 1, z).value, f(n, z).value, f(n + 1, z).value
                lhs, rhs = lo + hi, (2 * n + 1) / z * mid
                worst = max(worst, abs(lhs - rhs) / max(abs(lo), abs(hi), abs(rhs)))
    return worst


def transform_errors(params=ModelParams(1.0, 1.0), k=3.0, orders=TRANSFORM_ORDERS, points=60):
    """Max residuals of u, v, r and the ratio/route errors over [0, 0.9 T]."""
    out = {"residual_u": 0.0, "residual_v": 0.0, "residual_r": 0.0,
           "ratio_v_over_u": 0.0, "r_routes": 0.0}
    for n in orders:
        mode = Mode(k, n)
        T = recording_deadline(mode, params).deadline
        pair = OscillatorSystem(DAMPED_PAIR, mode, params)
        para = OscillatorSystem(PARAMETRIC_R, mode, params)
        for t in np.linspace(0.0, 0.9 * T, points):
            (du, dv) = analytic_pair_derivs(t, mode, params)
            out["residual_u"] = max(out["residual_u"], residual(pair, lambda _: du, t, "u"))
            out["residual_v"] = max(out["residual_v"], residual(pair, lambda _: dv, t, "v"))
            out["residual_r"] = max(out["residual_r"], residual(
                para, lambda s: conjugate_r_derivs(s, mode, params), t, "r"))
            u, v = analytic_pair(t, mode, params)
            out["ratio_v_over_u"] = max(out["ratio_v_over_u"],
                                        abs((v / u) / math.exp(params.L * t) - 1.0))
            r1, r2 = conjugate_r(t, mode, params), conjugate_r_from_v(t, mode, params)
            out["r_routes"] = max(out["r_routes"], abs(r1 - r2) / max(abs(r1), abs(r2)))
    return out


def mixed_relative_error(numeric, exact, floor=1e-3):
    """``|numeric - exact| / max(|exact|, floor * max|exact|)`` elementwise."""
    scale = floor * np.max(np.abs(exact))
    return np.abs(numeric - exact) / np.maximum(np.abs(exact), scale)


def numeric_vs_analytic_error(params=ModelParams(1.0, 1.0), k=3.0, orders=TRANSFORM_ORDERS,
                              points=200, cfg=IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12)):
    worst = 0.0
    for n in orders:
        mode = Mode(k, n)
        T = recording_deadline(mode, params).deadline
        system = OscillatorSystem(DAMPED_PAIR, mode, params)
        grid = np.linspace(0.0, 0.9 * T, points)
        traj = integrate(system, analytic_initial_state(system), (0.0, 0.9 * T), cfg, t_eval=grid)
        exact = np.array([analytic_pair(t, mode, params) for t in grid])
        worst = max(worst,
                    float(np.max(mixed_relative_error(traj.component("u"), exact[:, 0]))),
                    float(np.max(mixed_relative_error(traj.component("v"), exact[:, 1]))))
    return worst


def large_n_frequency_error(n=10**9, t_max=10.0, params=ModelParams(1.0, 1.0), omega0=1.0):
    t = np.linspace(0.0, t_max, 1001)
    return float(np.max(np.abs(omega_n(t, n, omega0, params) - omega0) / omega0))


def energy_drift(n, t_end, params=ModelParams(0.5, 1.0), k=2.0,
                 cfg=IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12)):
    system = OscillatorSystem(PARAMETRIC_R, Mode(k, n), params)
    traj = integrate(system, [1.0, 0.0], (0.0, t_end), cfg)
    energy = energy_like_diagnostic(traj, system)
    return float(np.max(np.abs(energy - energy[0])) / energy[0])


def deadline_affinity_error(params=ModelParams(1.0, 1.0), k=3.0, max_order=20):
    T = np.array([recording_deadline(Mode(k, n), params).deadline for n in range(max_order + 1)])
    diffs = np.diff(T)
    expected = 2.0 / params.L * math.log(2.0 * k * params.c / params.L)
    return float(np.max(np.abs(diffs - expected)) / expected)


def run_checks(params: ModelParams = ModelParams(), seed: int = 0, samples: int = 2000,
               tol_factor: float = 1.0, inject_fault: bool = False) -> list:
    """Run the identity, Bessel, transform and integration checks.

    ``params`` fixes the model used for the transform and integration checks;
    the identity checks draw their own random parameters from ``seed``.
    ``inject_fault`` perturbs one side of the lifetime identity so that the
    harness itself can be exercised.
    """
    rng = np.random.default_rng(seed)
    checks = []

    def add(name, measured, tolerance):
        tol = tolerance * tol_factor
        checks.append(Check(name, float(measured), tol, bool(measured <= tol)))

    rows = random_recordable_samples(rng, samples)
    add("omega_lambda_identity", identity_error(rows, fault=1e-6 if inject_fault else 0.0), 1e-11)
    add("omega_via_lambda_routes", omega_route_error(rows), 1e-11)
    add("reality_condition_mismatches", reality_mismatches(rng, samples), 0.0)
    anchors = bessel_anchor_errors()
    for key in ("j0", "j1", "y0"):
        add(f"bessel_anchor_{key}", anchors[key], 1e-13)
    add("bessel_wronskian", wronskian_error(), 1e-10)
    add("bessel_recurrence", recurrence_error(), 1e-12)
    k = 3.0 * params.L / params.c
    transform = transform_errors(params, k=k)
    add("residual_u", transform["residual_u"], 1e-8)
    add("residual_v", transform["residual_v"], 1e-8)
    add("residual_r", transform["residual_r"], 1e-8)
    add("ratio_v_over_u", transform["ratio_v_over_u"], 1e-10)
    add("conjugate_r_routes", transform["r_routes"], 1e-10)
    add("numeric_vs_analytic", numeric_vs_analytic_error(params, k=k), 1e-6)
    add("deadline_affinity", deadline_affinity_error(params, k=k), 4 * EPS * 41)
    add("large_n_frequency",
        large_n_frequency_error(t_max=10.0 / params.L, params=params), 1e-8)
    add("large_n_energy", energy_drift(10**9, 10.0 / params.L, ModelParams(params.L, params.c),
                                       k=4.0 * params.L / params.c), 1e-6)
    return checks


def report(checks) -> dict:
    failed = [c.name for c in checks if not c.passed]
    return {
        "checks": [c.to_dict() for c in checks],
        "summary": {"total": len(checks), "passed": len(checks) - len(failed),
                    "failed": len(failed), "failed_checks": failed, "ok": not failed},
    }
