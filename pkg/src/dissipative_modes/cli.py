"""Command-line front end.

Every subcommand writes deterministic CSV or JSON (floats in shortest
round-trip form) to ``--out`` or standard output.

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .domains import (
    DEFAULT_LAMBDA_MAX,
    MemoryRegistry,
    fig1_curves,
    fig2_curves,
    parse_event_script,
)
from .errors import (
    CapabilityError,
    DomainError,
    IntegrationError,
    ModelError,
    NotRecordableError,
    ParameterError,
    PastDeadlineError,
    RegistryError,
)
from .formulas import (
    Mode,
    ModelParams,
    capital_omega_sq,
    domain_size,
    k_threshold,
    lifetime_lambda,
    omega_n,
    recording_deadline,
)
from .integrator import (
    DAMPED_PAIR,
    FORMS,
    IntegratorConfig,
    OscillatorSystem,
    analytic_initial_state,
    integrate,
)
from .verification import report, run_checks

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
FORMULAS = ("omega_n", "Omega", "T", "k_tilde", "lambda", "domain_size")


class ConfigError(ModelError, ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    L: float = 1.0
    c: float = 1.0
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    format: str = "csv"
    seed: int = 0

    @property
    def params(self) -> ModelParams:
        return ModelParams(L=self.L, c=self.c)

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol)


_CASTS = {"L": float, "c": float, "rel_tol": float, "abs_tol": float, "format": str, "seed": int}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CASTS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CASTS[key](value)
        except ValueError:
            raise ConfigError(f"config line {lineno}: bad value for {key}: {value!r}") from None
    return values


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        cfg = replace(cfg, **parse_config_text(text))
    overrides = {k: getattr(args, k) for k in _CASTS if getattr(args, k, None) is not None}
    cfg = replace(cfg, **overrides)
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"format must be 'csv' or 'json', got {cfg.format!r}")
    cfg.params  # validates L and c
    cfg.integrator
    return cfg


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def render_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def render_table(cfg: RunConfig, columns, rows, extra=None) -> str:
    if cfg.format == "csv":
        return render_csv(columns, rows)
    doc = {"columns": list(columns), "rows": [{c: row.get(c) for c in columns} for row in rows]}
    if extra:
        doc.update(extra)
    return render_json(doc)


def emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


# --- eval -----------------------------------------------------------------

EVAL_COLUMNS = ("formula", "n", "k", "omega0", "t", "value", "status")


def _eval_row(formula, params, n, k, t):
    row = {"formula": formula, "n": n, "k": k, "t": t,
           "omega0": None if k is None else k * params.c, "status": "ok"}
    try:
        if formula == "omega_n":
            row["value"] = float(omega_n(t, n, k * params.c, params))
        elif formula == "Omega":
            sq = float(capital_omega_sq(t, Mode(k, n), params))
            if sq < 0:
                row["status"] = "imaginary"
            else:
                row["value"] = math.sqrt(sq)
        elif formula == "T":
            window = recording_deadline(Mode(k, n), params)
            if window.recordable:
                row["value"] = window.deadline
            else:
                row["status"] = "not recordable"
        elif formula == "k_tilde":
            row["value"] = float(k_threshold(n, t, params))
        elif formula == "lambda":
            row["value"] = float(lifetime_lambda(t, Mode(k, n), params))
        elif formula == "domain_size":
            row["value"] = float(domain_size(n, t, params))
    except NotRecordableError:
        row["status"] = "not recordable"
    except PastDeadlineError:
        row["status"] = "past deadline"
    except DomainError as exc:
        row["status"] = f"domain error: {exc}"
    return row


def cmd_eval(args, cfg: RunConfig) -> int:
    params = cfg.params
    if args.omega0 is not None:
        ks = [w / params.c for w in args.omega0]
    else:
        ks = args.k
    uses_k = args.formula not in ("k_tilde", "domain_size")
    uses_t = args.formula != "T"
    rows = []
    for n in args.n:
        for k in (ks if uses_k else [None]):
            for t in (args.t if uses_t else [None]):
                rows.append(_eval_row(args.formula, params, n, k, t))
    emit(render_table(cfg, EVAL_COLUMNS, rows), args.out)
    return EXIT_OK


# --- trace ----------------------------------------------------------------

def cmd_trace(args, cfg: RunConfig) -> int:
    params = cfg.params
    k = args.omega0 / params.c if args.omega0 is not None else args.k
    mode = Mode(k, args.n)
    system = OscillatorSystem(args.form, mode, params)
    if args.init is not None:
        init = args.init
    else:
        try:
            init = analytic_initial_state(system, t0=args.t0)
        except CapabilityError as exc:
            raise ConfigError(f"{exc}; pass --init explicitly") from None
    t1 = args.t1
    if t1 is None:
        window = recording_deadline(mode, params)
        t1 = 0.9 * window.deadline if window.recordable else 10.0 / params.L
    icfg = IntegratorConfig(rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                            max_step=args.max_step if args.max_step else math.inf)
    t_eval = np.linspace(args.t0, t1, args.samples) if args.samples else None
    traj = integrate(system, init, (args.t0, t1), icfg, t_eval=t_eval)
    columns = ("t",) + traj.columns
    rows = [dict(zip(columns, (t, *y))) for t, y in zip(traj.t, traj.y)]
    stats = {"n_steps": traj.stats.n_steps, "n_rejected": traj.stats.n_rejected,
             "n_rhs": traj.stats.n_rhs, "max_local_error": traj.stats.max_local_error}
    emit(render_table(cfg, columns, rows, extra={"stats": stats}), args.out)
    return EXIT_OK


# --- verify ---------------------------------------------------------------

def cmd_verify(args, cfg: RunConfig) -> int:
    checks = run_checks(cfg.params, seed=cfg.seed, samples=args.samples,
                        tol_factor=args.tol_factor, inject_fault=args.inject_fault)
    doc = report(checks)
    emit(render_json(doc), args.out)
    return EXIT_OK if doc["summary"]["ok"] else EXIT_VERIFY


# --- figures --------------------------------------------------------------

FIGURE_COLUMNS = ("family_id", "k", "n", "t", "lambda")


def _family_rows(family_id, family):
    rows = []
    meta = []
    for curve in family.curves:
        meta.append({"k": curve.k, "n": curve.n, "deadline": curve.deadline,
                     "clipped": curve.clipped})
        for t, lam in zip(curve.t, curve.lam):
            rows.append({"family_id": family_id, "k": curve.k, "n": curve.n,
                         "t": float(t), "lambda": float(lam)})
    return rows, {"curves": meta, "skipped": list(family.skipped)}


def cmd_figures(args, cfg: RunConfig) -> int:
    params = cfg.params
    families = []
    if args.which in ("fig1", "both"):
        families.append(("fig1", [Mode(k, args.n) for k in args.k_list],
                         lambda grid: fig1_curves(args.k_list, args.n, params, grid, args.lambda_max)))
    if args.which in ("fig2", "both"):
        families.append(("fig2", [Mode(args.k, n) for n in args.n_list],
                         lambda grid: fig2_curves(args.n_list, args.k, params, grid, args.lambda_max)))
    rows, sidecar = [], {}
    for family_id, modes, build in families:
        deadlines = [recording_deadline(m, params).deadline for m in modes]
        deadlines = [d for d in deadlines if d is not None]
        t_max = args.t_max if args.t_max is not None else (max(deadlines) if deadlines else 1.0)
        grid = np.linspace(0.0, t_max, args.points)
        fam_rows, meta = _family_rows(family_id, build(grid))
        rows.extend(fam_rows)
        sidecar[family_id] = meta
    emit(render_table(cfg, FIGURE_COLUMNS, rows, extra={"deadlines": sidecar}), args.out)
    deadlines_path = args.deadlines or (f"{args.out}.deadlines.json" if args.out else None)
    if deadlines_path:
        Path(deadlines_path).write_text(render_json(sidecar), encoding="utf-8", newline="\n")
    return EXIT_OK


# --- sweep ----------------------------------------------------------------

SWEEP_COLUMNS = ("n", "k", "L", "T", "k_tilde_at_t", "domain_size_at_t")


def sweep_row(point):
    n, k, L, c, t = point
    params = ModelParams(L=L, c=c)
    window = recording_deadline(Mode(k, n), params)
    return {"n": n, "k": k, "L": L, "T": window.deadline,
            "k_tilde_at_t": float(k_threshold(n, t, params)),
            "domain_size_at_t": float(domain_size(n, t, params))}


def sweep_points(n_list, k_list, L_list, c, t):
    return [(n, k, L, c, t) for L in L_list for k in k_list for n in n_list]


def cmd_sweep(args, cfg: RunConfig) -> int:
    L_list = args.L_list if args.L_list else [cfg.L]
    points = sweep_points(args.n_list, args.k_list, L_list, cfg.c, args.t)
    if not points:
        raise ConfigError("sweep grid is empty")
    for L in L_list:
        ModelParams(L=L, c=cfg.c)
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(sweep_row, points, chunksize=64))
    else:
        rows = [sweep_row(p) for p in points]
    emit(render_table(cfg, SWEEP_COLUMNS, rows), args.out)
    return EXIT_OK


# --- registry -------------------------------------------------------------

def cmd_registry(args, cfg: RunConfig) -> int:
    try:
        text = Path(args.script).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read event script: {exc}") from None
    events = parse_event_script(text)
    registry = MemoryRegistry(cfg.params)
    for ev in events:
        registry.record_event(ev.spectrum, ev.t)
    times = args.at if args.at else [registry.clock]
    doc = {
        "params": {"L": cfg.L, "c": cfg.c},
        "events": len(events),
        "reports": [registry.persistence_report(t) for t in times],
    }
    emit(render_json(doc), args.out)
    if args.export:
        Path(args.export).write_text(render_json(registry.to_dict()), encoding="utf-8",
                                     newline="\n")
    return EXIT_OK


# --- parser ---------------------------------------------------------------

def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file (L, c, rel_tol, abs_tol, format, seed)")
    common.add_argument("--L", type=float, help="damping coefficient L")
    common.add_argument("--c", type=float, help="propagation speed c")
    common.add_argument("--rel-tol", dest="rel_tol", type=float)
    common.add_argument("--abs-tol", dest="abs_tol", type=float)
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file (default: standard output)")

    parser = argparse.ArgumentParser(prog="dissipative-modes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="evaluate closed-form quantities on a grid")
    p.add_argument("--formula", choices=FORMULAS, required=True)
    p.add_argument("--t", type=float, nargs="+", default=[0.0])
    p.add_argument("--n", type=_nonneg_int, nargs="+", default=[0])
    p.add_argument("--k", type=float, nargs="+", default=[1.0])
    p.add_argument("--omega0", type=float, nargs="+", help="bare frequencies; overrides --k")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trace", parents=[common], help="integrate a mode and export the trajectory")
    p.add_argument("--form", choices=FORMS, default=DAMPED_PAIR)
    p.add_argument("--k", type=float, default=3.0)
    p.add_argument("--omega0", type=float)
    p.add_argument("--n", type=_nonneg_int, default=0)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, help="end time (default 0.9*T, or 10/L if not recordable)")
    p.add_argument("--init", type=float, nargs="+", help="initial state (default: Bessel solution)")
    p.add_argument("--samples", type=int, help="resample on this many equispaced times")
    p.add_argument("--max-step", dest="max_step", type=float)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("verify", parents=[common], help="run the identity and residual checks")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--tol-factor", dest="tol_factor", type=float, default=1.0,
                   help="multiply every tolerance by this factor")
    p.add_argument("--inject-fault", dest="inject_fault", action="store_true",
                   help="perturb one identity to exercise the failure path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("figures", parents=[common], help="lifetime curve families as long CSV")
    p.add_argument("--which", choices=("fig1", "fig2", "both"), default="both")
    p.add_argument("--n", type=_nonneg_int, default=1, help="fixed n for fig1")
    p.add_argument("--k-list", dest="k_list", type=float, nargs="+", default=[1.0, 2.0, 4.0, 8.0])
    p.add_argument("--k", type=float, default=2.0, help="fixed k for fig2")
    p.add_argument("--n-list", dest="n_list", type=_nonneg_int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--lambda-max", dest="lambda_max", type=float, default=DEFAULT_LAMBDA_MAX)
    p.add_argument("--deadlines", help="sidecar JSON path (default: <out>.deadlines.json)")
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("sweep", parents=[common], help="deadline and cutoff over an (n, k, L) grid")
    p.add_argument("--n-list", dest="n_list", type=_nonneg_int, nargs="+", default=list(range(11)))
    p.add_argument("--k-list", dest="k_list", type=float, nargs="+", default=[1.0, 2.0, 4.0])
    p.add_argument("--L-list", dest="L_list", type=float, nargs="+")
    p.add_argument("--t", type=float, default=1.0, help="time for the cutoff columns")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("registry", parents=[common], help="replay an event script")
    p.add_argument("--script", required=True, help="lines of 't n k1,k2,... [w1,w2,...]'")
    p.add_argument("--at", type=float, nargs="+", help="report times (default: last event)")
    p.add_argument("--export", help="write the registry as JSON")
    p.set_defaults(func=cmd_registry)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except IntegrationError as exc:
        print(f"error: integration failed: {exc} (last t={exc.t!r}, state={exc.state!r})",
              file=sys.stderr)
        return EXIT_NUMERIC
    except (ParameterError, ConfigError, RegistryError, DomainError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
