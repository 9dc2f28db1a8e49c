"""Energy functional, nonlinearities, mountain-pass search and convex solves.

The energy of a grid function is ``I(u) = J(u) - sum_i F(x_i, u_i) h^N`` with
``J`` the discrete Gagliardo modular.  Critical points are found by deforming
a discrete path from 0 to a point ``e`` with negative energy: the path maximizer
(and its neighbours) descend along ``-I'`` with Armijo backtracking, the path is
re-spaced by arclength, and once the Cerami product is small the maximizer is
polished by Newton's method.  A returned solution is certified post hoc:
probe-based residual, Cerami product, level ``c >= alpha`` and ``u != 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._numerics import csum
from .errors import ConfigError, ConvergenceError, DomainError, GeometryError
from .grid import (
    GridDomain,
    GridFunction,
    KernelQuadrature,
    _values,
    luxemburg,
    modular_gagliardo,
    poincare_lambda1_estimate,
)
from .nfunc import critical_exponent
from .operator import ProbeSet, gradient_values, hessian, monotonicity_gap

log = logging.getLogger(__name__)


# --------------------------------------------------------------- nonlinearities


class Nonlinearity:
    """Source term f(x, t) with primitive F and the growth witnesses Psi, Gamma.

    Subclasses implement ``F``, ``f`` and ``fprime`` for arrays of nodes ``x``
    (shape (n, N)) and values ``t`` (shape (n,)).
    """

    name = "abstract"
    R = 1.0

    def F(self, x, t):
        raise NotImplementedError

    def f(self, x, t):
        raise NotImplementedError

    def fprime(self, x, t):
        raise NotImplementedError

    def Fbar(self, x, t, m):
        """t f(x, t) - m F(x, t)."""
        t = np.asarray(t, dtype=float)
        return t * self.f(x, t) - m * self.F(x, t)

    # growth witness Psi with t psi(t) = Psi'(t)
    psi_exponents = (None, None)

    def Psi(self, x, t):
        raise NotImplementedError

    def dPsi(self, x, t):
        raise NotImplementedError

    def gamma_exponent(self, ell, N):
        raise NotImplementedError

    def to_dict(self):
        return {"kind": self.name}


class PowerLog(Nonlinearity):
    """F(t) = |t|^r log(1 + |t|), with Psi = F and Gamma(t) = |t|^gamma."""

    name = "powerlog"

    def __init__(self, r, gamma=None, R=None):
        r = float(r)
        if not r > 1:
            raise ConfigError(f"powerlog needs r > 1, got r={r}")
        self.r = r
        self.gamma = None if gamma is None else float(gamma)
        self.R = None if R is None else float(R)
        self.psi_exponents = (r, r + 1.0)

    def F(self, x, t):
        a = np.abs(t)
        return a**self.r * np.log1p(a)

    def f(self, x, t):
        t = np.asarray(t, dtype=float)
        a = np.abs(t)
        ar1 = a ** (self.r - 1)
        return np.sign(t) * (self.r * ar1 * np.log1p(a) + ar1 * a / (1.0 + a))

    def fprime(self, x, t):
        a = np.abs(np.asarray(t, dtype=float))
        r = self.r
        ar1 = a ** (r - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            l1 = np.where(a > 0, np.log1p(a) / a, 1.0)
        return r * (r - 1) * ar1 * l1 + 2 * r * ar1 / (1.0 + a) - ar1 * a / (1.0 + a) ** 2

    def Psi(self, x, t):
        return self.F(x, t)

    def dPsi(self, x, t):
        return np.abs(self.f(x, t))

    def gamma_exponent(self, ell, N):
        """Declared gamma, else the midpoint of (N / ell, r / (r - ell))."""
        if self.gamma is not None:
            return self.gamma
        lo = N / ell
        hi = self.r / (self.r - ell) if self.r > ell else math.inf
        return 0.5 * (lo + hi) if math.isfinite(hi) else lo + 1.0

    def to_dict(self):
        return {"kind": self.name, "r": self.r, "gamma": self.gamma, "R": self.R}


class ZeroNonlinearity(Nonlinearity):
    """f = 0; the energy reduces to the modular."""

    name = "zero"
    psi_exponents = (None, None)

    def F(self, x, t):
        return np.zeros(np.shape(t))

    f = F
    fprime = F


def nonlinearity_from_dict(d):
    kind = d.get("kind", "powerlog")
    if kind == "powerlog":
        return PowerLog(d["r"], d.get("gamma"), d.get("R"))
    if kind == "zero":
        return ZeroNonlinearity()
    raise ConfigError(f"unknown nonlinearity {kind!r}")


# --------------------------------------------------------------------- config


@dataclass
class SolverConfig:
    """Run parameters.  Quadrature and probe set are built lazily and cached."""

    family: object
    domain: GridDomain
    s: float = 0.25
    nonlinearity: Nonlinearity = None
    K: int = 17
    residual_tol: float = 1e-5
    cerami_tol: float = 1e-4
    max_iter: int = 400
    seed: int = 0
    armijo: float = 1e-4
    step_floor: float = 1e-14
    collar: object = "auto"
    n_probes: int = 32
    newton_every: int = 10

    def __post_init__(self):
        if int(self.K) < 3:
            raise ConfigError("path needs K >= 3 points")
        if not (self.residual_tol > 0 and self.cerami_tol > 0):
            raise ConfigError("tolerances must be positive")
        if not (0 < self.s < 1):
            raise ConfigError("fractional order must lie in (0, 1)")
        if self.nonlinearity is None:
            self.nonlinearity = ZeroNonlinearity()
        self._quad = None
        self._probes = None

    @property
    def quad(self):
        if self._quad is None:
            self._quad = KernelQuadrature(self.domain, self.s, self.collar)
        return self._quad

    @property
    def probes(self):
        if self._probes is None:
            self._probes = ProbeSet(self.family, self.quad, self.n_probes, self.seed)
        return self._probes

    def with_domain(self, domain):
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields["domain"] = domain
        return SolverConfig(**fields)

    def to_dict(self):
        return {
            "family": self.family.to_dict(),
            "domain": self.domain.to_dict(),
            "s": self.s,
            "nonlinearity": self.nonlinearity.to_dict(),
            "K": self.K,
            "residual_tol": self.residual_tol,
            "cerami_tol": self.cerami_tol,
            "max_iter": self.max_iter,
            "seed": self.seed,
            "armijo": self.armijo,
            "step_floor": self.step_floor,
            "collar": self.collar,
            "n_probes": self.n_probes,
        }


# --------------------------------------------------------------------- energy


def _vals(u, cfg):
    return _values(u, cfg.domain)


def energy(u, cfg):
    """J(u) - sum_i F(x_i, u_i) h^N."""
    v = _vals(u, cfg)
    d = cfg.domain
    return modular_gagliardo(v, cfg.family, cfg.quad) - csum(cfg.nonlinearity.F(d.interior, v)) * d.cell_measure


def _grad(v, cfg):
    return gradient_values(v, cfg.family, cfg.quad) - cfg.nonlinearity.f(cfg.domain.interior, v)


def energy_gradient(u, cfg):
    """Nodal gradient of the energy: operator gradient minus f(x_i, u_i)."""
    return GridFunction(cfg.domain, _grad(_vals(u, cfg), cfg))


def energy_hessian(u, cfg, floor=0.0):
    v = _vals(u, cfg)
    H = hessian(v, cfg.family, cfg.quad, floor)
    H[np.diag_indices_from(H)] -= cfg.nonlinearity.fprime(cfg.domain.interior, v)
    return H


def residual(u, cfg):
    """Probe-based lower estimate of the dual norm of I'(u)."""
    return cfg.probes.estimate(_grad(_vals(u, cfg), cfg))


def norm(u, cfg):
    return luxemburg(_vals(u, cfg), "gagliardo", cfg.family, cfg.quad)


# ------------------------------------------------------------------- geometry


def centred_bump(domain):
    """exp(1 - 1 / (1 - |z|^2)) in box-normalized coordinates z in (-1, 1)^N."""
    c = domain.box.mean(axis=1)
    half = 0.5 * (domain.box[:, 1] - domain.box[:, 0])
    z2 = np.sum(((domain.interior - c) / half) ** 2, axis=1)
    out = np.zeros(domain.n)
    inside = z2 < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z2[inside]))
    return out


def _probe_fields(domain, count, rng):
    z = (domain.interior - domain.box[:, 0]) / (domain.box[:, 1] - domain.box[:, 0])
    for k in range(count):
        if k % 3 == 0:
            yield rng.standard_normal(domain.n)
        elif k % 3 == 1:
            c = rng.uniform(0.25, 0.75, domain.N)
            w = rng.uniform(0.08, 0.3)
            yield np.exp(-np.sum((z - c) ** 2, axis=1) / (2 * w * w))
        else:
            modes = rng.integers(1, 4, domain.N)
            yield np.prod(np.sin(np.pi * modes * z), axis=1)


@dataclass
class Geometry:
    rho: float
    alpha: float
    e: np.ndarray
    u0: np.ndarray
    t_e: float
    min_energy: float
    halvings: int
    samples: int

    def to_dict(self):
        return {
            "rho": self.rho,
            "alpha": self.alpha,
            "t_e": self.t_e,
            "energy_e": None,
            "min_energy_at_rho": self.min_energy,
            "halvings": self.halvings,
            "samples": self.samples,
            "u0": "centred bump exp(1 - 1/(1 - |z|^2)) scaled to unit norm",
        }


def sphere_samples(cfg, count=24, seed=None):
    """Unit-norm sample fields (values, norm 1) for probing energies on spheres."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    out = []
    for v in _probe_fields(cfg.domain, count, rng):
        out.append(v / norm(v, cfg))
    return out


def geometry_probe(cfg, samples=24):
    """Find rho, alpha and e for the mountain-pass geometry.

    rho halves from 1 until the least energy of the sampled fields of norm rho
    is positive; alpha is half that least energy.  e = t u0 with u0 a centred
    bump of unit norm and t doubled from 2 until I(e) < 0.
    """
    units = sphere_samples(cfg, samples)
    rho = 1.0
    for k in range(41):
        E = min(energy(rho * v, cfg) for v in units)
        if E > 0:
            break
        rho *= 0.5
    else:
        raise GeometryError("no radius with positive energy after 40 halvings; the small-t condition may fail")
    alpha = 0.5 * E
    b = centred_bump(cfg.domain)
    u0 = b / norm(b, cfg)
    t = 2.0
    for _ in range(80):
        if energy(t * u0, cfg) < 0:
            break
        t *= 2.0
    else:
        raise GeometryError("energy stays nonnegative along t u0; no point with negative energy")
    return Geometry(rho, alpha, t * u0, u0, t, E, k, samples)


# ---------------------------------------------------------------- reporting


@dataclass
class SolutionReport:
    u: GridFunction
    c: float
    rho: float
    alpha: float
    residual: float
    cerami: float
    norm: float
    converged: bool
    status: str
    iterations: dict = field(default_factory=dict)
    morse_index: int = None
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def nontrivial(self):
        return bool(np.any(self.u.values)) and self.norm > 0

    def to_dict(self):
        return {
            "status": self.status,
            "converged": self.converged,
            "c": self.c,
            "rho": self.rho,
            "alpha": self.alpha,
            "residual": self.residual,
            "cerami": self.cerami,
            "norm": self.norm,
            "nontrivial": {"norm": self.norm, "energy": self.c, "holds": self.nontrivial and (self.c > 0 if self.rho is not None else True)},
            "morse_index": self.morse_index,
            "iterations": self.iterations,
            "diagnostics": self.diagnostics,
            "config": self.config,
            "notes": self.notes,
        }


def _notes(cfg):
    out = []
    if cfg.domain.N == 1:
        out.append("one-dimensional run: outside the N >= 2 setting, reported as extrapolation")
    return out


# ---------------------------------------------------------------- Newton


def _newton(v, cfg, tol, max_iter=40, floor=1e-12):
    """Damped Newton on I'(u) = 0 with backtracking on the gradient norm."""
    h = cfg.domain.cell_measure
    g = _grad(v, cfg)
    gn = math.sqrt(csum(g * g) * h)
    for it in range(max_iter):
        if cfg.probes.estimate(g) <= tol:
            return v, it, True
        H = energy_hessian(v, cfg, floor)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            return v, it, False
        if not np.all(np.isfinite(step)):
            return v, it, False
        tau = 1.0
        while tau >= 1e-6:
            w = v + tau * step
            gw = _grad(w, cfg)
            gwn = math.sqrt(csum(gw * gw) * h)
            if gwn <= (1 - 1e-4 * tau) * gn:
                break
            tau *= 0.5
        else:
            return v, it, False
        v, g, gn = w, gw, gwn
    return v, max_iter, cfg.probes.estimate(g) <= tol


def morse_index(v, cfg, floor=1e-12):
    H = energy_hessian(v, cfg, floor)
    ev = np.linalg.eigvalsh(0.5 * (H + H.T))
    scale = np.max(np.abs(ev))
    return int(np.sum(ev < -1e-10 * scale))


# ---------------------------------------------------------------- mountain pass


def _redistribute(path):
    """Re-space path points uniformly in arclength (endpoints fixed)."""
    P = np.array(path)
    seg = np.sqrt(np.sum(np.diff(P, axis=0) ** 2, axis=1))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return path
    target = np.linspace(0, s[-1], len(P))
    out = [P[0]]
    for t in target[1:-1]:
        k = min(np.searchsorted(s, t, side="right") - 1, len(P) - 2)
        lam = (t - s[k]) / seg[k] if seg[k] > 0 else 0.0
        out.append((1 - lam) * P[k] + lam * P[k + 1])
    out.append(P[-1])
    return out


def mountain_pass(cfg, geometry=None):
    """Mountain-pass critical point by path deformation with a Newton polish.

    Returns a :class:`SolutionReport`; on non-convergence raises
    :class:`ConvergenceError` carrying the report of the best iterate.
    """
    geo = geometry or geometry_probe(cfg)
    h = cfg.domain.cell_measure
    K = int(cfg.K)
    path = [t * geo.e for t in np.linspace(0.0, 1.0, K)]
    E = [energy(p, cfg) for p in path]
    steps = np.ones(K)
    newton_tries = 0
    best = None
    last_newton = -cfg.newton_every
    for it in range(int(cfg.max_iter)):
        j = 1 + int(np.argmax(E[1:-1]))
        if E[j] <= 0:
            raise GeometryError("path collapsed: maximal energy along the path is not positive")
        u = path[j]
        g = _grad(u, cfg)
        res = cfg.probes.estimate(g)
        if best is None or res < best[3]:
            best = (None, u, E[j], res, None)
        if it - last_newton >= cfg.newton_every or res < 1e-2:
            last_newton = it
            newton_tries += 1
            w, nit, ok = _newton(u, cfg, 1e-3 * cfg.residual_tol)
            if ok:
                report = _certify(w, cfg, geo, it, newton_tries, nit)
                if report.converged:
                    return report
                log.info("Newton point rejected: %s", report.status)
        # descend the maximizer and its neighbours; a step may not exceed half
        # the local path spacing, so the polyline keeps crossing the ridge
        P = np.array(path)
        spacing = np.sqrt(np.sum(np.diff(P, axis=0) ** 2, axis=1))
        for k in (j - 1, j, j + 1):
            if not 1 <= k <= K - 2:
                continue
            uk = path[k]
            gk = g if k == j else _grad(uk, cfg)
            slope = csum(gk * gk) * h
            if slope == 0:
                continue
            cap = 0.5 * min(spacing[k - 1], spacing[k]) / math.sqrt(float(np.sum(gk * gk)))
            tau = min(steps[k] * 2.0, cap)
            Ek = E[k]
            while tau >= cfg.step_floor:
                w = uk - tau * gk
                Ew = energy(w, cfg)
                if Ew <= Ek - cfg.armijo * tau * slope:
                    path[k], E[k], steps[k] = w, Ew, tau
                    break
                tau *= 0.5
        path = _redistribute(path)
        E = [E[0]] + [energy(p, cfg) for p in path[1:-1]] + [E[-1]]
    _, u, c, res, _ = best
    nrm = norm(u, cfg)
    cer = (1 + nrm) * res
    report = SolutionReport(
        GridFunction(cfg.domain, u), c, geo.rho, geo.alpha, res, cer, nrm, False,
        "iteration cap reached",
        {"path": int(cfg.max_iter), "newton_attempts": newton_tries},
        config=cfg.to_dict(), notes=_notes(cfg),
    )
    raise ConvergenceError("mountain pass did not converge", report)


def _certify(v, cfg, geo, it, tries, nit):
    u = GridFunction(cfg.domain, v)
    c = energy(v, cfg)
    res = residual(v, cfg)
    nrm = norm(v, cfg)
    cer = (1 + nrm) * res
    mi = morse_index(v, cfg)
    checks = {
        "residual": res <= cfg.residual_tol,
        "cerami": cer <= cfg.cerami_tol,
        "level_above_alpha": c >= geo.alpha > 0,
        "nontrivial": nrm > 0 and c > 0,
        "morse_index_one": mi == 1,
    }
    ok = all(checks.values())
    status = "converged" if ok else "rejected: " + ", ".join(k for k, v in checks.items() if not v)
    pairing = csum(gradient_values(v, cfg.family, cfg.quad) * v) * cfg.domain.cell_measure
    source = csum(cfg.nonlinearity.f(cfg.domain.interior, v) * v) * cfg.domain.cell_measure
    J = modular_gagliardo(v, cfg.family, cfg.quad)
    diag = {
        "checks": checks,
        "geometry": geo.to_dict(),
        "modular": J,
        "weak_identity": {"pairing": pairing, "source": source, "lower": cfg.family.ell * J},
    }
    return SolutionReport(
        u, c, geo.rho, geo.alpha, res, cer, nrm, ok, status,
        {"path": it, "newton_attempts": tries, "newton_steps": nit},
        mi, diag, cfg.to_dict(), _notes(cfg),
    )


# ----------------------------------------------------------------- convex solve


def _source_values(source, cfg):
    return _values(source, cfg.domain)


def convex_energy(v, src, cfg):
    return modular_gagliardo(v, cfg.family, cfg.quad) - csum(src * v) * cfg.domain.cell_measure


def _convex_newton(v, src, cfg, max_iter=100):
    h = cfg.domain.cell_measure
    fam, quad = cfg.family, cfg.quad
    E = convex_energy(v, src, cfg)
    for it in range(max_iter):
        g = gradient_values(v, fam, quad) - src
        H = hessian(v, fam, quad, floor=1e-12)
        step = np.linalg.solve(H, -g)
        slope = csum(g * step) * h
        if slope >= 0:
            step, slope = -g, -csum(g * g) * h
        if np.max(np.abs(step)) <= 1e-14 * (1 + np.max(np.abs(v))):
            return v, it
        tau = 1.0
        while tau >= cfg.step_floor:
            w = v + tau * step
            Ew = convex_energy(w, src, cfg)
            if Ew <= E + cfg.armijo * tau * slope:
                break
            tau *= 0.5
        else:
            return v, it
        v, E = w, Ew
    return v, max_iter


def convex_solve(source, cfg, starts=3, tol=1e-6):
    """Minimize J(u) - sum_i source_i u_i h^N from several random starts.

    The functional is strictly convex for strictly increasing densities, so all
    restarts must agree; disagreement beyond ``tol`` in the Luxemburg seminorm
    raises :class:`ConvergenceError` (the family is misconfigured).
    """
    src = np.array(_source_values(source, cfg), dtype=float)
    rng = np.random.default_rng(cfg.seed)
    scale = max(1.0, float(np.max(np.abs(src))))
    sols, its = [], []
    for k in range(int(starts)):
        v0 = rng.standard_normal(cfg.domain.n) * scale
        v, it = _convex_newton(v0, src, cfg)
        sols.append(v)
        its.append(it)
    dist = []
    for a in range(len(sols)):
        for b in range(a + 1, len(sols)):
            dist.append(luxemburg(sols[a] - sols[b], "gagliardo", cfg.family, cfg.quad))
    v = sols[0]
    g = gradient_values(v, cfg.family, cfg.quad) - src
    res = cfg.probes.estimate(g)
    nrm = norm(v, cfg)
    c = convex_energy(v, src, cfg)
    # one more gradient step must not lower the energy beyond tolerance
    h = cfg.domain.cell_measure
    slope = csum(g * g) * h
    fixed = True
    if slope > 0:
        E1 = min(convex_energy(v - t * g, src, cfg) for t in 2.0 ** -np.arange(0, 40, 4))
        fixed = E1 >= c - max(tol, 1e-12 * abs(c))
    agree = all(d <= tol for d in dist)
    status = "converged" if agree and fixed else "restarts disagree: strict convexity lost"
    report = SolutionReport(
        GridFunction(cfg.domain, v), c, None, None, res, (1 + nrm) * res, nrm, agree and fixed, status,
        {"newton_steps": its}, None,
        {"restart_distances": dist, "fixed_point": fixed, "strictly_increasing_density": cfg.family.strictly_increasing_density},
        cfg.to_dict(), _notes(cfg),
    )
    if not agree:
        raise ConvergenceError(status, report)
    return report


def optimality_gap(u, source, cfg, probe_scale=1.0):
    """First-order gap sup_v <J'(u) - source, v> over the probe set."""
    v = _vals(u, cfg)
    g = gradient_values(v, cfg.family, cfg.quad) - _source_values(source, cfg)
    return cfg.probes.estimate(g) * probe_scale


# ----------------------------------------------------------------- audit


@dataclass
class AuditReport:
    conditions: dict
    passed: bool
    lambda1: float
    notes: list

    def to_dict(self):
        return {"conditions": self.conditions, "passed": self.passed, "lambda1_estimate": self.lambda1, "notes": self.notes}


def condition_audit(nl, fam, cfg, lambda1=None, t_max=1e8, C=1.0, points=8):
    """Sample the structural conditions on f and report a verdict per condition.

    f1 growth bound with the Psi witness and its exponents, f1-subcritical
    (m_Psi below the critical exponent), f2 Gamma-domination and F_bar >= 0 for
    |t| >= R, f3 superlinear trend of f / |t|^(m-1), f4 small-t ratio against
    1 / lambda1 (empirical lambda1 estimate, a lower bound).
    """
    d = cfg.domain
    N, s = d.N, cfg.s
    ell, m = fam.ell, fam.m
    rng = np.random.default_rng(cfg.seed)
    xs = d.interior[rng.choice(d.n, size=min(points, d.n), replace=False)]
    t = np.geomspace(1e-8, t_max, 16 * int(round(math.log10(t_max / 1e-8))) + 1)
    X = np.repeat(xs, len(t), axis=0)
    T = np.tile(t, len(xs))
    out = {}
    notes = []

    # f1
    lp, mp = nl.psi_exponents
    if lp is None:
        out["f1"] = {"verdict": "fail", "reason": "no growth witness declared"}
    else:
        f = np.abs(nl.f(X, T))
        bound = C * (1.0 + nl.dPsi(X, T))
        margin = float(np.min((bound - f) / np.maximum(bound, 1.0)))
        ratio = T * nl.dPsi(X, T) / nl.Psi(X, T)
        exps = m < lp <= mp
        rat_ok = bool(np.all(ratio >= lp * (1 - 1e-10)) and np.all(ratio <= mp * (1 + 1e-10)))
        out["f1"] = {
            "verdict": "pass" if (exps and margin >= 0 and rat_ok) else "fail",
            "m": m, "ell_psi": lp, "m_psi": mp,
            "exponent_order_m_lt_ell_psi_le_m_psi": exps,
            "growth_margin": margin,
            "psi_ratio_range": [float(ratio.min()), float(ratio.max())],
        }
        if ell < N / s:
            crit = critical_exponent(ell, N, s)
            out["f1-subcritical"] = {
                "verdict": "pass" if mp < crit else "fail",
                "m_psi": mp, "critical_exponent": crit,
            }
        else:
            out["f1-subcritical"] = {"verdict": "not-applicable", "reason": "ell >= N/s"}

    # f2
    Fb = nl.Fbar(X, T, m)
    gamma = nl.gamma_exponent(ell, N) if lp is not None else None
    if gamma is None:
        out["f2"] = {"verdict": "fail", "reason": "no integrability witness"}
    else:
        G = (nl.F(X, T) / T**ell) ** gamma
        dom = C * Fb - G
        ok = (dom >= 0) & (Fb >= 0)
        okm = ok.reshape(len(xs), len(t)).all(axis=0)
        # R: smallest sampled t beyond which everything holds
        tail_ok = np.flip(np.logical_and.accumulate(np.flip(okm)))
        if nl.R is not None:
            R = nl.R
            idx = np.searchsorted(t, R)
            holds = bool(np.all(okm[idx:]))
        else:
            idx = int(np.argmax(tail_ok)) if tail_ok.any() else len(t)
            R = float(t[idx]) if idx < len(t) else None
            holds = R is not None and R <= t_max / 1e3
        sel = T >= (R if R is not None else np.inf)
        neg = np.nonzero((Fb < 0) & sel)[0] if R is not None else np.nonzero(Fb < 0)[0]
        witness = None
        if neg.size:
            k = neg[np.argmin(Fb[neg])]
            witness = {"t": float(T[k]), "x": X[k].tolist(), "Fbar": float(Fb[k])}
        elif not holds and np.any(Fb < 0):
            k = int(np.argmin(Fb))
            witness = {"t": float(T[k]), "x": X[k].tolist(), "Fbar": float(Fb[k])}
        gamma_ok = gamma > N / ell
        rel = dom[sel] / np.maximum(np.abs(C * Fb[sel]), np.abs(G[sel])) if R is not None and np.any(sel) else np.array([-np.inf])
        out["f2"] = {
            "verdict": "pass" if (holds and gamma_ok) else "fail",
            "R": R, "C": C, "gamma": gamma, "gamma_above_N_over_ell": gamma_ok,
            "domination_margin": float(np.min(rel)),
            "Fbar_min_beyond_R": float(np.min(Fb[sel])) if R is not None and np.any(sel) else None,
            "negative_Fbar_witness": witness,
        }

    # f3
    big = t >= 1e2
    Tb = np.tile(t[big], len(xs))
    Xb = np.repeat(xs, int(big.sum()), axis=0)
    q = (nl.f(Xb, Tb) / Tb ** (m - 1)).reshape(len(xs), -1)
    incr = bool(np.all(np.diff(q, axis=1) > 0))
    growth = float(np.min(q[:, -1] / np.maximum(q[:, 0], 1e-300))) if q.size else 0.0
    out["f3"] = {"verdict": "pass" if incr and growth > 1.0 else "fail", "increasing": incr, "growth_factor": growth, "last_ratio": float(q[:, -1].min()) if q.size else None}

    # f4
    if lambda1 is None:
        lambda1 = poincare_lambda1_estimate(d, fam, cfg.quad, trials=16, seed=cfg.seed).value
    small = t <= 1e-4
    Ts = np.tile(t[small], len(xs))
    Xs = np.repeat(xs, int(small.sum()), axis=0)
    hat = fam.hat(Xs)
    ratio0 = (np.abs(nl.f(Xs, Ts)) / hat.dphi(Ts)).reshape(len(xs), -1)
    lim = float(ratio0[:, 0].max())
    out["f4"] = {
        "verdict": "pass" if lim < 1.0 / lambda1 else "fail",
        "ratio_at_smallest_t": lim, "inverse_lambda1": 1.0 / lambda1,
        "t_smallest": float(t[small][0]),
    }
    notes.append("lambda1 is an empirical estimate (lower bound); the small-t check is conservative for rejection only")
    if N == 1:
        notes.append("one-dimensional run: outside the N >= 2 setting, reported as extrapolation")
    passed = all(c["verdict"] in ("pass", "not-applicable") for c in out.values())
    return AuditReport(out, passed, float(lambda1), notes)


# ----------------------------------------------------------------- two mesh


def two_mesh_report(cfg):
    """Solve on the configured mesh and on its refinement; report the level change."""
    a = mountain_pass(cfg)
    fine = cfg.with_domain(cfg.domain.refine())
    b = mountain_pass(fine)
    return {
        "coarse": {"h": cfg.domain.h, "c": a.c, "alpha": a.alpha, "residual": a.residual},
        "fine": {"h": fine.domain.h, "c": b.c, "alpha": b.alpha, "residual": b.residual},
        "level_change": abs(b.c - a.c),
        "relative_change": abs(b.c - a.c) / max(abs(a.c), 1e-300),
    }
