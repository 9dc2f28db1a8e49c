"""Acceptance criteria at their pinned tolerances; one PASS/FAIL line each."""

import json
import math
import time

import numpy as np
import pytest

from mfs import cli
from mfs.grid import GridDomain, GridFunction, KernelQuadrature
from mfs.nfunc import DoublePhase
from mfs.operator import monotonicity_gap, monotonicity_terms
from mfs.solver import PowerLog, SolverConfig, condition_audit
from mfs.grid import modular_gagliardo
from mfs.verify import (
    _est_conjugate,
    _young,
    brezis_lieb_sequence,
    derivative_fd_check,
    norm_sandwich,
    random_fields,
    random_pairs,
    run_suite,
    splus_check,
    xi_sandwich_pointwise,
)

from conftest import builtin_families

FAMILIES = list(builtin_families())
BOX = [(0.0, 1.0), (0.0, 1.0)]


@pytest.fixture
def report(capsys):
    def emit(n, ok, text):
        with capsys.disabled():
            print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {text}")
        return ok

    return emit


@pytest.mark.parametrize("kind", FAMILIES)
def test_c01_xi_sandwich(report, kind):
    fam = builtin_families()[kind]
    t0 = time.perf_counter()
    parts = {
        "hat xi0": xi_sandwich_pointwise(fam, "xi0", 10_000, 0, BOX, hat=True)[0],
        "hat-conjugate xi1": xi_sandwich_pointwise(fam, "xi1", 10_000, 1, BOX, hat=True)[0],
        "kernel xi0": xi_sandwich_pointwise(fam, "xi0", 10_000, 2, BOX, hat=False)[0],
        "sobolev xi2": xi_sandwich_pointwise(fam, "xi2", 10_000, 3, BOX, N=2, s=0.25, hat=True)[0],
    }
    dt = time.perf_counter() - t0
    worst = {k: float(v.max()) for k, v in parts.items()}
    ok = max(worst.values()) <= 1e-10 and dt < 5.0
    report(1, ok, f"{kind}: worst relative violation {max(worst.values()):.2e} <= 1e-10, {dt:.2f}s < 5s")
    assert ok, worst


@pytest.mark.parametrize("kind", FAMILIES)
def test_c02_norm_modular_sandwich(report, dom12, quad12, kind):
    fam = builtin_families()[kind]
    fields = random_fields(dom12, 200, np.random.default_rng(2))
    t0 = time.perf_counter()
    worst = {
        "hat norm": float(norm_sandwich(fam, dom12, "hat", fields)[0].max()),
        "hat-conjugate norm": float(norm_sandwich(fam, dom12, "hat-conjugate", fields)[0].max()),
        "gagliardo norm": float(norm_sandwich(fam, dom12, "gagliardo", fields, quad12)[0].max()),
    }
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-10 and dt < 30.0
    report(2, ok, f"{kind}: 200 fields, worst slope-adjusted violation {max(worst.values()):.2e}, {dt:.1f}s < 30s")
    assert ok, worst


@pytest.mark.parametrize("kind", FAMILIES)
def test_c03_young_and_est_conjugate(report, kind):
    fam = builtin_families()[kind]
    vy, *_, rel_y, abs_y = _young(fam, 10_000, 0, BOX)
    ve, *_, rel_e, abs_e = _est_conjugate(fam, 10_000, 1, BOX)
    worst = max(float(vy.max()), float(ve.max()))
    rel = max(rel_y, rel_e)
    ok = worst <= 0.0 and rel <= 1e-6
    report(3, ok, f"{kind}: violation beyond eps_dep {worst:.2e} <= 0, eps_dep/value {rel:.1e} <= 1e-6 (max abs {max(abs_y, abs_e):.1e})")
    assert ok


def test_c04_derivative_order(report, quad12):
    rows = derivative_fd_check(DoublePhase(2, 3), quad12, pairs=20)
    f = np.array([r["halving_factors"] for r in rows])
    ok = bool(np.all((f >= 3.5) & (f <= 4.5)))
    report(4, ok, f"doublephase p=2 q=3: per-halving error factor in [{f.min():.3f}, {f.max():.3f}] within [3.5, 4.5], 20 pairs")
    assert ok


def test_c05_monotonicity(report, dom12, quad12):
    worst = -math.inf
    for kind, fam in builtin_families().items():
        for u, v in random_pairs(dom12, 200, np.random.default_rng(5)):
            t, sc = monotonicity_terms(u, v, fam, quad12)
            worst = max(worst, float(np.max(-t / np.maximum(sc, 1e-300))))
    fam = DoublePhase(2, 3)
    c = 4.0 ** (1 - fam.m) * fam.ell
    uni = min(
        monotonicity_gap(u, v, fam, quad12) / (c * modular_gagliardo(u - v, fam, quad12))
        for u, v in random_pairs(dom12, 200, np.random.default_rng(6))
    )
    ok = worst <= 1e-12 and uni >= 1.0
    report(5, ok, f"min term / scale {-worst:.2e} >= -1e-12 (4 families x 200 pairs); gap / (4^(1-m) l J) min {uni:.3f} >= 1")
    assert ok


@pytest.mark.parametrize("kind", FAMILIES)
def test_c06_coercive_bounded(report, dom12, kind):
    r = run_suite("coercive-bounded", builtin_families()[kind], dom12, seed=6, fields=200)
    ok = r.verdict == "pass" and r.samples == 200
    report(6, ok, f"{kind}: 200 fields, coercive {r.details['worst_coercive']:.2e}, bounded {r.details['worst_bounded']:.2e} <= 1e-10")
    assert ok


@pytest.mark.parametrize("kind", FAMILIES)
def test_c07_brezis_lieb(report, kind):
    seq = brezis_lieb_sequence(builtin_families()[kind])
    d = [x["defect"] for x in seq]
    ok = d[0] > d[1] > d[2] and d[2] <= 0.1 * d[0]
    report(7, ok, f"{kind}: defects {d[0]:.3e} > {d[1]:.3e} > {d[2]:.3e}, final/initial {d[2] / d[0]:.3f} <= 0.1")
    assert ok


@pytest.mark.parametrize("kind", FAMILIES)
def test_c08_splus(report, quad12, kind):
    r = splus_check(builtin_families()[kind], quad12)
    n = np.array(r["n"])
    a, b = np.array(r["a"]), np.array(r["b"])
    tail = n >= 4
    mono = bool(np.all(np.diff(a[tail]) < 0) and np.all(np.diff(b[tail]) < 0))
    small = a[-1] < 1e-6 and b[-1] < 1e-6 and n[-1] == 1000
    fixed = min(r["fixed_a"]) > 10 * 1e-6
    ok = mono and small and fixed and r["implication_holds"]
    report(8, ok, f"{kind}: a,b decreasing for n>=4; at n=1000 a={a[-1]:.1e} b={b[-1]:.1e} < 1e-6; fixed w: a={min(r['fixed_a']):.3f} > 1e-5")
    assert ok


@pytest.mark.parametrize("problem", ["doublephase", "pxy", "logpert"])
def test_c09_existence_certificate(report, cli_solve, problem):
    code, rep, dt, _ = cli_solve(problem)
    s = rep.get("solution", {})
    ok = (
        code == 0
        and s.get("residual", math.inf) <= 1e-5
        and s.get("cerami", math.inf) <= 1e-4
        and s.get("c", -1) >= s.get("alpha", 0) > 0
        and s.get("norm", 0) > 0
        and dt < 300
    )
    report(9, ok, f"solve --problem {problem}: residual {s.get('residual', float('nan')):.1e}, cerami {s.get('cerami', float('nan')):.1e}, "
                  f"c={s.get('c', float('nan')):.4g} >= alpha={s.get('alpha', float('nan')):.3g} > 0, {dt:.0f}s < 300s")
    assert ok


def test_c10_uniqueness(report, tmp_path, dom12):
    src = tmp_path / "source.csv"
    z = dom12.interior
    GridFunction(dom12, 1.0 + np.sin(np.pi * z[:, 0]) * z[:, 1]).to_csv(src)
    out = tmp_path / "cs"
    code = cli.main(["convex-solve", "--source", str(src), "--family", "doublephase", "--p", "2", "--q", "3",
                     "--starts", "3", "--out", str(out)])
    with open(out / "report.json") as fh:
        d = json.load(fh)["solution"]["diagnostics"]["restart_distances"]
    ok = code == 0 and len(d) == 3 and max(d) <= 1e-6
    report(10, ok, f"3 random starts, max pairwise Luxemburg distance {max(d):.1e} <= 1e-6")
    assert ok


def test_c11_condition_audit(report, dom12):
    good = DoublePhase(2, 2.5)
    a = condition_audit(PowerLog(3.0), good, SolverConfig(good, dom12, 0.25, PowerLog(3.0)))
    f2 = a.conditions["f2"]
    ok_good = f2["verdict"] == "pass" and f2["Fbar_min_beyond_R"] >= 0 and f2["domination_margin"] >= 0
    bad = DoublePhase(2, 3)
    b = condition_audit(PowerLog(2.5), bad, SolverConfig(bad, dom12, 0.25, PowerLog(2.5)))
    w = b.conditions["f2"]["negative_Fbar_witness"]
    ok_bad = (not b.passed) and w is not None and w["Fbar"] < 0
    # r = q: Fbar = |t|^(r+1) / (1 + |t|) > 0, so the audit must fail through the exponent order of f1
    e = condition_audit(PowerLog(3.0), bad, SolverConfig(bad, dom12, 0.25, PowerLog(3.0)))
    ok_eq = (not e.passed) and e.conditions["f1"]["verdict"] == "fail"
    ok = ok_good and ok_bad and ok_eq
    report(11, ok, f"q<r: Fbar min beyond R={f2['R']:.3g} is {f2['Fbar_min_beyond_R']:.2e} >= 0, margin {f2['domination_margin']:.2f} >= 0; "
                   f"r<q: audit fails, witness Fbar={w['Fbar'] if w else float('nan'):.2e} at t={w['t'] if w else float('nan'):.3g}; "
                   f"r=q: audit fails via f1")
    assert ok
