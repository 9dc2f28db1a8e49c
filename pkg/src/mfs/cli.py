"""Command-line front end.

Exit codes: 0 success, 1 a verdict or certificate failed, 2 usage or
configuration error.  Configuration is resolved as built-in defaults, then an
optional JSON file (``--config``), then explicit flags.  Every JSON document is
written with sorted keys; ``generated_at`` is the only field that differs
between identical runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from ._numerics import set_threads
from .errors import ConfigError, ConvergenceError, DomainError, GeometryError, MFSError
from .grid import GridDomain, GridFunction
from .nfunc import (
    AnisotropicP,
    ConjugateTable,
    Constant,
    DoublePhase,
    LogPerturbed,
    SmoothBump,
    VariableExponent,
    growth_certificate,
    SamplePlan,
)

FAMILIES = ("doublephase", "pxy", "logpert", "anisotropic")

# presets for `solve --problem`
PROBLEMS = {
    "doublephase": {"family": "doublephase", "p": 2.0, "q": 2.5, "a": 1.0, "r": 3.0},
    "pxy": {"family": "pxy", "p": 2.0, "p_amp": 0.4, "r": 3.0},
    "logpert": {"family": "logpert", "p": 2.0, "r": 4.0},
    "anisotropic": {"family": "anisotropic", "p": 2.0, "a": 1.0, "r": 3.0},
}

DEFAULTS = {
    "N": 2,
    "n": 12,
    "s": 0.25,
    "seed": 0,
    "out": "mfs-out",
    "K": 17,
    "residual_tol": 1e-5,
    "cerami_tol": 1e-4,
    "max_iter": 400,
    "starts": 3,
    "samples": 10_000,
    "fields": 50,
    "depth": 64,
    "t_min": 1e-6,
    "t_max": 1e6,
    "points": 121,
}

# keys a flag may set; flags left at None do not override
KEYS = (
    "family", "p", "q", "a", "p_amp", "r", "N", "n", "h", "box", "s", "seed", "out", "K",
    "residual_tol", "cerami_tol", "max_iter", "starts", "samples", "fields", "depth",
    "t_min", "t_max", "points", "threads",
)


# ------------------------------------------------------------------ parsing


def _common(p):
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="JSON file with default values for any flag")
    g.add_argument("--out", help="output directory (default mfs-out)")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int, help="worker cap for summation (falls back to MFS_THREADS)")
    g.add_argument("--family", choices=FAMILIES)
    g.add_argument("--p", type=float, help="lower exponent, or base of a variable exponent")
    g.add_argument("--q", type=float, help="upper exponent of the double-phase family")
    g.add_argument("--a", type=float, help="constant weight")
    g.add_argument("--p-amp", dest="p_amp", type=float, help="bump amplitude added to a variable exponent")
    g.add_argument("--r", type=float, help="exponent of the nonlinearity |t|^r log(1+|t|)")
    g.add_argument("--N", type=int, choices=(1, 2), help="space dimension")
    g.add_argument("--n", type=int, help="cells per side of the unit cube")
    g.add_argument("--h", type=float, help="mesh width (overrides --n)")
    g.add_argument("--box", type=str, help="comma separated lo,hi per dimension")
    g.add_argument("--s", type=float, help="fractional order in (0, 1)")


def build_parser():
    ap = argparse.ArgumentParser(prog="mfs", description="Nonlocal Musielak-Orlicz problems on grids.")
    ap.add_argument("--version", action="version", version=f"mfs {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run property suites")
    p.add_argument("--suite", required=True, help="suite id or 'all'")
    p.add_argument("--samples", type=int, help="pointwise samples per inequality")
    p.add_argument("--fields", type=int, help="grid functions per modular check")
    _common(p)

    p = sub.add_parser("solve", help="mountain-pass solve with certificate")
    p.add_argument("--problem", required=True, choices=tuple(PROBLEMS))
    p.add_argument("--K", type=int, help="path points")
    p.add_argument("--residual-tol", dest="residual_tol", type=float)
    p.add_argument("--cerami-tol", dest="cerami_tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    _common(p)

    p = sub.add_parser("convex-solve", help="minimize J(u) - <source, u> from several starts")
    p.add_argument("--source", required=True, help="CSV with header x[,y],value")
    p.add_argument("--starts", type=int)
    _common(p)

    p = sub.add_parser("audit", help="sample the structural conditions on the nonlinearity")
    _common(p)

    p = sub.add_parser("conjugate-table", help="tabulate the conjugate on a log grid")
    p.add_argument("--t-min", dest="t_min", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--depth", type=int)
    _common(p)

    p = sub.add_parser("export", help="write plot-ready curves and grid data")
    p.add_argument("--t-min", dest="t_min", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--points", type=int)
    _common(p)
    return ap


def resolve(args):
    """Merge defaults, preset, config file and flags into one flat dict."""
    cfg = dict(DEFAULTS)
    if getattr(args, "problem", None):
        cfg.update(PROBLEMS[args.problem])
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config file: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(KEYS) - {"polygon"})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(data)
    for k in KEYS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if getattr(args, "problem", None):
        cfg["family"] = args.problem
    cfg["command"] = args.command
    for k in ("suite", "source"):
        if getattr(args, k, None) is not None:
            cfg[k] = getattr(args, k)
    return cfg


# ------------------------------------------------------------------ builders


def _need(cfg, key, why):
    if cfg.get(key) is None:
        raise ConfigError(f"{why} requires --{key.replace('_', '-')}")
    return float(cfg[key])


def make_family(cfg):
    kind = cfg.get("family")
    if kind is None:
        raise ConfigError("a family is required: --family " + "|".join(FAMILIES))
    if kind not in FAMILIES:
        raise ConfigError(f"unknown family {kind!r}")
    p = _need(cfg, "p", kind)
    a = float(cfg["a"]) if cfg.get("a") is not None else 1.0
    amp = cfg.get("p_amp")
    if kind == "doublephase":
        return DoublePhase(p, _need(cfg, "q", "doublephase"), Constant(a))
    if kind == "anisotropic":
        return AnisotropicP(p, Constant(a))
    expo = SmoothBump(p, float(amp), (0.5,) * int(cfg["N"]), 0.5) if amp else Constant(p)
    if kind == "pxy":
        return VariableExponent(expo)
    return LogPerturbed(expo)


def make_domain(cfg):
    N = int(cfg["N"])
    if cfg.get("box") is not None:
        b = cfg["box"]
        vals = [float(v) for v in b.split(",")] if isinstance(b, str) else list(np.ravel(b))
        if len(vals) != 2 * N:
            raise ConfigError(f"box needs {2 * N} numbers for N={N}")
        box = [(vals[2 * i], vals[2 * i + 1]) for i in range(N)]
    else:
        box = [(0.0, 1.0)] * N
    if cfg.get("h") is not None:
        h = float(cfg["h"])
    else:
        n = int(cfg["n"])
        if n < 2:
            raise ConfigError("--n must be at least 2")
        h = (box[0][1] - box[0][0]) / n
    return GridDomain(box, h, cfg.get("polygon"))


def make_nonlinearity(cfg):
    from .solver import PowerLog

    return PowerLog(_need(cfg, "r", "the nonlinearity"))


def make_solver_config(cfg, nonlinearity=None):
    from .solver import SolverConfig

    s = float(cfg["s"])
    if not 0 < s < 1:
        raise ConfigError("fractional order s must lie in (0, 1)")
    return SolverConfig(
        make_family(cfg), make_domain(cfg), s, nonlinearity,
        K=int(cfg["K"]), residual_tol=float(cfg["residual_tol"]), cerami_tol=float(cfg["cerami_tol"]),
        max_iter=int(cfg["max_iter"]), seed=int(cfg["seed"]),
    )


# ------------------------------------------------------------------ output


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _envelope(cfg, body, ok):
    return {
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "version": __version__,
        "config": cfg,
        "ok": ok,
        **body,
    }


def _outdir(cfg):
    d = cfg["out"]
    os.makedirs(d, exist_ok=True)
    return d


# ------------------------------------------------------------------ commands


def cmd_verify(cfg):
    from .verify import CORE_SUITES, SUITES, run_suite

    name = cfg["suite"]
    if name != "all" and name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; expected 'all' or one of {', '.join(SUITES)}")
    names = CORE_SUITES if name == "all" else (name,)
    fam = make_family(cfg)
    dom = make_domain(cfg)
    nl = make_nonlinearity(cfg) if "condition-audit" in names and cfg.get("r") is not None else None
    out = _outdir(cfg)
    os.makedirs(os.path.join(out, "suites"), exist_ok=True)
    resolved = {**cfg, "family_spec": fam.to_dict(), "domain_spec": dom.to_dict()}
    rows, ok = [], True
    for nm in names:
        rep = run_suite(nm, fam, dom, int(cfg["seed"]), s=float(cfg["s"]), samples=int(cfg["samples"]),
                        fields=int(cfg["fields"]), nonlinearity=nl)
        write_json(os.path.join(out, "suites", f"{nm}.json"), {"config": resolved, **rep.to_dict()})
        rows.append((nm, rep.verdict, rep.worst_violation, rep.samples))
        ok &= rep.passed
        print(f"{nm:18s} {rep.verdict:15s} worst={rep.worst_violation:.3e}")
    with open(os.path.join(out, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["suite", "verdict", "worst_violation", "samples"])
        for r in rows:
            w.writerow([r[0], r[1], repr(float(r[2])), r[3]])
    summary = [{"suite": r[0], "verdict": r[1], "worst_violation": r[2], "samples": r[3]} for r in rows]
    write_json(os.path.join(out, "report.json"), _envelope(resolved, {"suites": summary}, ok))
    return 0 if ok else 1


def _write_solution(out, rep, resolved, ok, extra=None):
    body = {"solution": rep.to_dict()}
    body["solution"].pop("config", None)
    if extra:
        body.update(extra)
    write_json(os.path.join(out, "report.json"), _envelope(resolved, body, ok))
    rep.u.to_csv(os.path.join(out, "solution.csv"))


def cmd_solve(cfg):
    from .solver import mountain_pass

    sc = make_solver_config(cfg, make_nonlinearity(cfg))
    out = _outdir(cfg)
    resolved = {**cfg, "solver": sc.to_dict()}
    try:
        rep = mountain_pass(sc)
    except ConvergenceError as e:
        _write_solution(out, e.report, resolved, False, {"error": str(e)})
        print(f"not converged: {e}", file=sys.stderr)
        return 1
    except GeometryError as e:
        write_json(os.path.join(out, "report.json"), _envelope(resolved, {"error": str(e)}, False))
        print(f"geometry check failed: {e}", file=sys.stderr)
        return 1
    ok = bool(rep.converged)
    _write_solution(out, rep, resolved, ok)
    print(f"status={rep.status} c={rep.c:.6g} alpha={rep.alpha:.3g} residual={rep.residual:.3e} cerami={rep.cerami:.3e}")
    return 0 if ok else 1


def cmd_convex(cfg):
    from .solver import convex_solve

    sc = make_solver_config(cfg)
    try:
        src = GridFunction.from_csv(sc.domain, cfg["source"])
    except OSError as e:
        raise ConfigError(f"cannot read source: {e}") from e
    out = _outdir(cfg)
    resolved = {**cfg, "solver": sc.to_dict()}
    try:
        rep = convex_solve(src, sc, starts=int(cfg["starts"]))
    except ConvergenceError as e:
        _write_solution(out, e.report, resolved, False, {"error": str(e)})
        print(f"restarts disagree: {e}", file=sys.stderr)
        return 1
    ok = bool(rep.converged)
    _write_solution(out, rep, resolved, ok)
    d = rep.diagnostics["restart_distances"]
    print(f"status={rep.status} energy={rep.c:.6g} max restart distance={max(d) if d else 0.0:.3e}")
    return 0 if ok else 1


def cmd_audit(cfg):
    from .solver import condition_audit

    nl = make_nonlinearity(cfg)
    sc = make_solver_config(cfg, nl)
    rep = condition_audit(nl, sc.family, sc)
    out = _outdir(cfg)
    write_json(os.path.join(out, "report.json"), _envelope({**cfg, "solver": sc.to_dict()}, {"audit": rep.to_dict()}, rep.passed))
    for k, c in sorted(rep.conditions.items()):
        print(f"{k:16s} {c['verdict']}")
    return 0 if rep.passed else 1


def _t_grid(cfg):
    lo, hi, n = float(cfg["t_min"]), float(cfg["t_max"]), int(cfg["points"])
    if not (0 < lo < hi) or n < 2:
        raise ConfigError("need 0 < t-min < t-max and at least 2 points")
    return np.geomspace(lo, hi, n)


def _centre(dom):
    return dom.box.mean(axis=1)


def cmd_conjugate_table(cfg):
    fam = make_family(cfg)
    dom = make_domain(cfg)
    t = _t_grid(cfg)
    x = _centre(dom)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tab = ConjugateTable.build(fam, x, x, t, int(cfg["depth"]))
    out = _outdir(cfg)
    tab.to_csv(os.path.join(out, "conjugate.csv"))
    ok = tab.check()
    body = {
        "point": x.tolist(),
        "check": ok,
        "max_accuracy": float(np.max(tab.accuracy)),
        "max_relative_accuracy": float(np.max(tab.accuracy / np.maximum(tab.values, 1e-300))),
    }
    write_json(os.path.join(out, "report.json"), _envelope({**cfg, "family_spec": fam.to_dict()}, body, ok))
    print(f"{len(t)} rows, check={'pass' if ok else 'fail'}")
    return 0 if ok else 1


def cmd_export(cfg):
    fam = make_family(cfg)
    dom = make_domain(cfg)
    t = _t_grid(cfg)
    out = _outdir(cfg)
    x = _centre(dom)
    b = fam.bind(np.tile(x, (len(t), 1)), np.tile(x, (len(t), 1)))
    with open(os.path.join(out, "nfunction.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "phi", "density", "ratio"])
        for ti, f, d in zip(t, b.phi(t), b.dphi(t)):
            w.writerow([repr(float(ti)), repr(float(f)), repr(float(d)), repr(float(ti * d / f))])
    GridFunction(dom, np.zeros(dom.n)).to_csv(os.path.join(out, "grid.csv"))
    cert = growth_certificate(fam, SamplePlan(box=tuple(map(tuple, dom.box.tolist())), seed=int(cfg["seed"])))
    body = {"growth": cert.to_dict(), "domain": dom.to_dict(), "interior_nodes": dom.n}
    write_json(os.path.join(out, "report.json"), _envelope({**cfg, "family_spec": fam.to_dict()}, body, True))
    print(f"wrote {out}")
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "solve": cmd_solve,
    "convex-solve": cmd_convex,
    "audit": cmd_audit,
    "conjugate-table": cmd_conjugate_table,
    "export": cmd_export,
}


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        cfg = resolve(args)
        if cfg.get("threads") is not None:
            set_threads(int(cfg["threads"]))
        return COMMANDS[args.command](cfg)
    except (ConfigError, DomainError) as e:
        print(f"mfs: configuration error: {e}", file=sys.stderr)
        return 2
    except MFSError as e:
        print(f"mfs: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
