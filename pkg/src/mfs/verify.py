"""Sampled property suites for N-functions, modulars and the operator.

Every suite returns a :class:`PropertyReport`.  Violations are signed and
normalized so that a positive value means the inequality failed; the verdict is
``pass`` exactly when the worst violation is at most the suite tolerance.
Runs are deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .grid import (
    GridDomain,
    KernelQuadrature,
    luxemburg_detail,
    modular_gagliardo,
    modular_hat,
    modular_hat_conjugate,
)
from .nfunc import (
    conjugate_array,
    critical_exponent,
    growth_certificate,
    SamplePlan,
    sobolev_conjugate_inverse_array,
    xi_bounds,
)
from .operator import derivative_pairing, monotonicity_gap, monotonicity_terms, splus_diagnostic

SUITES = (
    "mn1",
    "mn2",
    "mn-critical",
    "young",
    "est-conjugate",
    "brezis-lieb",
    "monotone",
    "uniform-monotone",
    "coercive-bounded",
    "growth",
    "condition-audit",
)
# the property battery run by "all"
CORE_SUITES = SUITES[:9]

REL_TOL = 1e-10
EPS = np.finfo(float).eps


@dataclass
class PropertyReport:
    suite: str
    samples: int
    worst_violation: float
    witness: dict
    verdict: str
    tolerances: dict
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict in ("pass", "not-applicable")

    def to_dict(self):
        return {
            "suite": self.suite,
            "samples": self.samples,
            "worst_violation": self.worst_violation,
            "witness": self.witness,
            "verdict": self.verdict,
            "tolerances": self.tolerances,
            "details": self.details,
        }


def _report(name, viol, witnesses, tol, details=None, extra_tol=None):
    viol = np.asarray(viol, dtype=float)
    k = int(np.argmax(viol))
    worst = float(viol[k])
    tols = {"relative": tol}
    if extra_tol:
        tols.update(extra_tol)
    return PropertyReport(
        name, int(viol.size), worst, witnesses(k), "pass" if worst <= tol else "fail", tols, details or {}
    )


def _na(name, reason):
    return PropertyReport(name, 0, 0.0, {}, "not-applicable", {}, {"reason": reason})


# ------------------------------------------------------------------ sampling


def _points(rng, box, n):
    box = np.asarray(box, dtype=float)
    return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((n, len(box)))


def _logu(rng, lo, hi, n):
    return 10.0 ** rng.uniform(math.log10(lo), math.log10(hi), n)


def _rel(a, b):
    """(a - b) / scale: positive when a exceeds b."""
    return (a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)


def random_fields(domain, count, rng, decades=(-2.0, 2.0)):
    """Gaussian fields, bumps and checkerboards with log-uniform amplitudes."""
    z = (domain.interior - domain.box[:, 0]) / (domain.box[:, 1] - domain.box[:, 0])
    chk = (-1.0) ** np.sum(domain.interior_index, axis=1)
    out = []
    for k in range(count):
        amp = 10.0 ** rng.uniform(*decades)
        kind = k % 3
        if kind == 0:
            v = rng.standard_normal(domain.n)
        elif kind == 1:
            c = rng.uniform(0.2, 0.8, domain.N)
            w = rng.uniform(0.1, 0.35)
            v = np.exp(-np.sum((z - c) ** 2, axis=1) / (2 * w * w))
        else:
            v = chk * (0.5 + rng.random(domain.n))
        out.append(amp * v)
    return out


# ---------------------------------------------------------------- xi checks


def xi_sandwich_pointwise(fam, which="xi0", n=10_000, seed=0, box=None, N=2, s=0.25, hat=True):
    """Relative violations of xi^-(sigma) F(t) <= F(sigma t) <= xi^+(sigma) F(t).

    ``which`` picks F: "xi0" uses Phi (hat or full), "xi1" the conjugate of
    Phi_hat, "xi2" the Sobolev conjugate (in the equivalent inverse form
    G(xi^-(sigma) tau) <= sigma G(tau) <= G(xi^+(sigma) tau) with G its inverse).
    Returns (violations, witness function).
    """
    rng = np.random.default_rng(seed)
    box = box if box is not None else [(0.0, 1.0)] * N
    x = _points(rng, box, n)
    y = x if hat else _points(rng, box, n)
    sigma = _logu(rng, 1e-3, 1e3, n)
    t = _logu(rng, 1e-6, 1e6, n)
    if which == "xi0":
        b = fam.bind(x, y)
        lo, hi = xi_bounds("xi0", fam.ell, fam.m, sigma)
        ft, fst = b.phi(t), b.phi(sigma * t)
        v = np.maximum(_rel(lo * ft, fst), _rel(fst, hi * ft))
    elif which == "xi1":
        b = fam.bind(x, y)
        lo, hi = xi_bounds("xi1", fam.ell, fam.m, sigma)
        vt, at, _, _ = conjugate_array(b, t)
        vs, as_, _, _ = conjugate_array(b, sigma * t)
        v = np.maximum(_rel(lo * vt, vs + as_), _rel(vs, hi * (vt + at)))
    elif which == "xi2":
        lo, hi = xi_bounds("xi2", fam.ell, fam.m, sigma, N=N, s=s)
        tau = t
        G = sobolev_conjugate_inverse_array(fam, x, s, N, tau)
        Glo = sobolev_conjugate_inverse_array(fam, x, s, N, lo * tau)
        Ghi = sobolev_conjugate_inverse_array(fam, x, s, N, hi * tau)
        v = np.maximum(_rel(Glo, sigma * G), _rel(sigma * G, Ghi))
    else:
        raise DomainError(f"unknown xi bound {which!r}")

    def witness(k):
        return {"which": which, "x": x[k].tolist(), "y": y[k].tolist(), "sigma": float(sigma[k]), "t": float(t[k])}

    return v, witness


def norm_sandwich(fam, domain, modular, fields, quad=None, tol=1e-10):
    """Per-field violations of xi^-(lam) <= modular(u) <= xi^+(lam), lam the Luxemburg norm.

    Each violation is reduced by the slack implied by the root accuracy:
    |modular(u/lam) - 1| = d moves the sandwich by about (m / ell) d relatively.
    """
    which = "xi1" if modular == "hat-conjugate" else "xi0"
    viol, lams, mods = [], [], []
    for u in fields:
        r = luxemburg_detail(u, modular, fam, quad, tol, domain)
        if modular == "gagliardo":
            J = modular_gagliardo(u, fam, quad)
        elif modular == "hat":
            J = modular_hat(u, fam, domain)
        else:
            J = modular_hat_conjugate(u, fam, domain)
        lo, hi = xi_bounds(which, fam.ell, fam.m, r.value)
        a, b = (fam.ell, fam.m) if which == "xi0" else (fam.m / (fam.m - 1), fam.ell / (fam.ell - 1))
        slack = 2.0 * (b / a) * abs(r.modular_at_value - 1.0)
        viol.append(max(_rel(lo, J), _rel(J, hi)) - slack)
        lams.append(r.value)
        mods.append(J)
    return np.array(viol), np.array(lams), np.array(mods)


# ------------------------------------------------------------------- suites


def _young(fam, n, seed, box):
    rng = np.random.default_rng(seed)
    x = _points(rng, box, n)
    y = _points(rng, box, n)
    s = _logu(rng, 1e-6, 1e6, n)
    t = _logu(rng, 1e-6, 1e6, n)
    b = fam.bind(x, y)
    val, acc, _, _ = conjugate_array(b, t)
    ps = b.phi(s)
    rhs = ps + val
    rounding = 4 * EPS * (s * t + rhs)
    v = (s * t - rhs - acc - rounding) / np.maximum(s * t, rhs)
    rel_acc = acc / np.maximum(val, 1e-300)
    return v, x, y, s, t, float(np.max(rel_acc)), float(np.max(acc))


def _est_conjugate(fam, n, seed, box):
    rng = np.random.default_rng(seed)
    x = _points(rng, box, n)
    y = _points(rng, box, n)
    t = _logu(rng, 1e-6, 1e6, n)
    b = fam.bind(x, y)
    arg = b.dphi(t)
    val, acc, _, _ = conjugate_array(b, arg)
    rhs = b.phi(2 * t)
    v = (val - rhs - acc - 4 * EPS * rhs) / np.maximum(np.abs(rhs), 1e-300)
    rel_acc = acc / np.maximum(val, 1e-300)
    return v, x, y, t, float(np.max(rel_acc)), float(np.max(acc))


def phi_increasing(fam, box, seed=0, pairs=16):
    """Whether phi(t) = Phi'(t) / t is nondecreasing on sampled pairs."""
    rng = np.random.default_rng(seed)
    x = _points(rng, box, pairs)
    y = _points(rng, box, pairs)
    t = np.geomspace(1e-6, 1e6, 385)
    b = fam.bind(np.repeat(x, len(t), axis=0), np.repeat(y, len(t), axis=0))
    tt = np.tile(t, pairs)
    ph = (b.dphi(tt) / tt).reshape(pairs, -1)
    return bool(np.all(np.diff(ph, axis=1) >= -1e-12 * np.abs(ph[:, 1:])))


def random_pairs(domain, count, rng):
    f = random_fields(domain, 2 * count, rng, decades=(-1.5, 1.5))
    return list(zip(f[0::2], f[1::2]))


def brezis_lieb_sequence(fam, levels=(12, 24, 48), s=0.25, box=((0.0, 1.0), (0.0, 1.0))):
    """|J(u + w_n) - J(w_n) - J(u)| on refining meshes, over the domain squared.

    u is a fixed smooth field; w_n is a bump of amplitude 1 and radius two cells
    around a fixed point, with sign alternating along the sequence, so w_n -> 0
    at every point.
    """
    out = []
    for i, n in enumerate(levels):
        d = GridDomain(box, (box[0][1] - box[0][0]) / n)
        q = KernelQuadrature(d, s, collar=0)
        z = (d.interior - d.box[:, 0]) / (d.box[:, 1] - d.box[:, 0])
        u = np.prod(np.sin(np.pi * z), axis=1)
        c = d.box[:, 0] + 0.37 * (d.box[:, 1] - d.box[:, 0])
        r = np.sqrt(np.sum((d.interior - c) ** 2, axis=1)) / (2 * d.h)
        w = (-1.0) ** i * np.where(r < 1, np.cos(0.5 * np.pi * r) ** 2, 0.0)
        Ju = modular_gagliardo(u, fam, q)
        Jw = modular_gagliardo(w, fam, q)
        Juw = modular_gagliardo(u + w, fam, q)
        out.append({"n": n, "defect": abs(Juw - Jw - Ju), "J_u": Ju, "J_w": Jw})
    return out


def derivative_fd_check(fam, quad, pairs=20, hs=(1e-2, 1e-3, 1e-4), seed=0):
    """Central-difference errors of the pairing and the per-halving convergence factors.

    With steps a decade apart, the order is log10(e(h) / e(h/10)); the factor per
    halving of h is 2 to that power (4 for second order).
    """
    rng = np.random.default_rng(seed)
    d = quad.domain
    rows = []
    for k in range(pairs):
        u = rng.standard_normal(d.n)
        v = rng.standard_normal(d.n)
        P = derivative_pairing(u, v, fam, quad)
        errs = []
        for h in hs:
            fd = (modular_gagliardo(u + h * v, fam, quad) - modular_gagliardo(u - h * v, fam, quad)) / (2 * h)
            errs.append(abs(fd - P))
        factors = [
            2.0 ** (math.log10(errs[i] / errs[i + 1]) / math.log10(hs[i] / hs[i + 1])) for i in range(len(hs) - 1)
        ]
        rows.append({"pairing": P, "errors": errs, "halving_factors": factors})
    return rows


def splus_check(fam, quad, seed=0, ns=None):
    """(S+) diagnostic on u_n = u + w / n and on u_n = u + w, scaled by
    S = <J'(u), u> + <J'(w), w>.

    w is made pairing-orthogonal to J'(u), so a_n decays like n^-2.
    """
    rng = np.random.default_rng(seed)
    d = quad.domain
    z = (d.interior - d.box[:, 0]) / (d.box[:, 1] - d.box[:, 0])
    u = np.prod(np.sin(np.pi * z), axis=1) + 0.3 * rng.standard_normal(d.n)
    w = rng.standard_normal(d.n)
    w = w - derivative_pairing(u, w, fam, quad) / derivative_pairing(u, u, fam, quad) * u
    S = derivative_pairing(u, u, fam, quad) + derivative_pairing(w, w, fam, quad)
    if ns is None:
        ns = np.unique(np.rint(np.geomspace(1, 1000, 40)).astype(int))
    seq = [u + w / n for n in ns]
    conv = splus_diagnostic(seq, u, fam, quad, tol=1e-6 * S, tol_prime=1e-6 * S)
    fixed = splus_diagnostic([u + w] * 3, u, fam, quad, tol=1e-6 * S, tol_prime=1e-6 * S)
    return {
        "n": [int(n) for n in ns],
        "a": [a / S for a in conv.a],
        "b": [b / S for b in conv.b],
        "implication_holds": conv.holds,
        "fixed_a": [a / S for a in fixed.a],
        "fixed_b": [b / S for b in fixed.b],
        "scale": S,
    }


def run_suite(name, fam, domain=None, seed=0, s=0.25, samples=10_000, fields=50, nonlinearity=None):
    """Run one property suite.  ``domain`` defaults to the 12 x 12 unit square."""
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")
    domain = domain or GridDomain.unit(12)
    box = domain.box.tolist()
    N = domain.N
    rng = np.random.default_rng(seed)
    notes = ["one-dimensional run: extrapolation outside N >= 2"] if N == 1 else []

    if name == "mn1":
        v0, w0 = xi_sandwich_pointwise(fam, "xi0", samples, seed, box, N, s, hat=True)
        v1, w1 = xi_sandwich_pointwise(fam, "xi1", samples, seed + 1, box, N, s, hat=True)
        fl = random_fields(domain, fields, rng)
        n2, lam2, _ = norm_sandwich(fam, domain, "hat", fl)
        n4, lam4, _ = norm_sandwich(fam, domain, "hat-conjugate", fl)
        parts = [v0, v1, n2, n4]
        allv = np.concatenate(parts)
        offs = np.cumsum([0] + [len(p) for p in parts])

        def wit(k):
            if k < offs[1]:
                return {"part": "(i) xi0 for Phi_hat", **w0(k)}
            if k < offs[2]:
                return {"part": "(iii) xi1 for its conjugate", **w1(k - offs[1])}
            if k < offs[3]:
                return {"part": "(ii) norm sandwich, hat modular", "field": int(k - offs[2]), "norm": float(lam2[k - offs[2]])}
            return {"part": "(iv) norm sandwich, conjugate modular", "field": int(k - offs[3]), "norm": float(lam4[k - offs[3]])}

        det = {"worst_by_part": {p: float(np.max(x)) for p, x in zip(["i", "iii", "ii", "iv"], parts)}, "notes": notes}
        return _report(name, allv, wit, REL_TOL, det)

    if name == "mn2":
        v0, w0 = xi_sandwich_pointwise(fam, "xi0", samples, seed, box, N, s, hat=False)
        quad = KernelQuadrature(domain, s)
        fl = random_fields(domain, fields, rng)
        nv, lam, _ = norm_sandwich(fam, domain, "gagliardo", fl, quad)
        allv = np.concatenate([v0, nv])

        def wit(k):
            if k < len(v0):
                return {"part": "(i) xi0 for Phi", **w0(k)}
            return {"part": "(ii) norm sandwich, Gagliardo modular", "field": int(k - len(v0)), "norm": float(lam[k - len(v0)])}

        det = {"worst_by_part": {"i": float(v0.max()), "ii": float(nv.max())}, "notes": notes}
        return _report(name, allv, wit, REL_TOL, det)

    if name == "mn-critical":
        if not (1 < fam.ell <= fam.m < N / s):
            return _na(name, f"needs ell, m in (1, N/s) = (1, {N / s:g})")
        v, w = xi_sandwich_pointwise(fam, "xi2", samples, seed, box, N, s, hat=True)
        det = {
            "form": "inverse: G(xi2-(sigma) tau) <= sigma G(tau) <= G(xi2+(sigma) tau)",
            "critical_exponents": [critical_exponent(fam.ell, N, s), critical_exponent(fam.m, N, s)],
            "notes": notes,
        }
        return _report(name, v, w, REL_TOL, det)

    if name == "young":
        v, x, y, sv, t, rel_acc, abs_acc = _young(fam, samples, seed, box)
        return _report(
            name, v,
            lambda k: {"x": x[k].tolist(), "y": y[k].tolist(), "s": float(sv[k]), "t": float(t[k])},
            REL_TOL, {"max_relative_accuracy": rel_acc, "max_accuracy": abs_acc, "notes": notes},
            {"slack": "per-call conjugate accuracy"},
        )

    if name == "est-conjugate":
        v, x, y, t, rel_acc, abs_acc = _est_conjugate(fam, samples, seed, box)
        return _report(
            name, v,
            lambda k: {"x": x[k].tolist(), "y": y[k].tolist(), "t": float(t[k])},
            REL_TOL, {"max_relative_accuracy": rel_acc, "max_accuracy": abs_acc, "notes": notes},
            {"slack": "per-call conjugate accuracy"},
        )

    if name == "brezis-lieb":
        seq = brezis_lieb_sequence(fam, s=s, box=box if N == 2 else ((0.0, 1.0), (0.0, 1.0)))
        dft = [r["defect"] for r in seq]
        mono = all(b < a for a, b in zip(dft, dft[1:]))
        ratio = dft[-1] / dft[0] if dft[0] > 0 else 0.0
        # violation: positive when not decreasing or final above 10% of initial
        v = max(max((b - a) / a for a, b in zip(dft, dft[1:])), ratio - 0.1)
        return PropertyReport(
            name, len(seq), float(v), {"levels": seq}, "pass" if mono and ratio <= 0.1 else "fail",
            {"final_over_initial": 0.1, "monotone": "strict decrease"},
            {"levels": seq, "final_over_initial": ratio, "monotone": mono},
        )

    quad = KernelQuadrature(domain, s)
    pairs = random_pairs(domain, fields, rng)

    if name == "monotone":
        worst, wk, tot = [], [], 0
        for u, v in pairs:
            t, sc = monotonicity_terms(u, v, fam, quad)
            r = -t / np.maximum(sc, 1e-300)
            k = int(np.argmax(r))
            worst.append(r[k])
            wk.append(k)
            tot += t.size
        v = np.array(worst)
        rep = _report(name, v, lambda k: {"pair": int(k), "term": int(wk[k])}, 1e-12, {"terms": tot, "notes": notes},
                      {"term_scale": "(|a|+|b|)|Du-Dv| w"})
        return rep

    if name == "uniform-monotone":
        if not phi_increasing(fam, box, seed):
            return _na(name, "phi is not increasing on the sampled pairs")
        c = 4.0 ** (1 - fam.m) * fam.ell
        v = []
        for u, w in pairs:
            gap = monotonicity_gap(u, w, fam, quad)
            low = c * modular_gagliardo(u - w, fam, quad)
            v.append(_rel(low, gap))
        return _report(name, np.array(v), lambda k: {"pair": int(k)}, REL_TOL, {"constant": c, "notes": notes})

    if name == "coercive-bounded":
        vc, vb = [], []
        for u, w in pairs:
            ru = luxemburg_detail(u, "gagliardo", fam, quad)
            rw = luxemburg_detail(w, "gagliardo", fam, quad)
            slack = 2.0 * (fam.m / fam.ell) * max(abs(ru.modular_at_value - 1), abs(rw.modular_at_value - 1))
            lam = ru.value
            P = derivative_pairing(u, u, fam, quad)
            vc.append(_rel(fam.ell * min(lam**fam.ell, lam**fam.m), P) - slack)
            Q = abs(derivative_pairing(u, w, fam, quad))
            _, hi = xi_bounds("xi0", fam.ell, fam.m, lam)
            vb.append(_rel(Q, 2.0**fam.m * (hi + 1.0) * rw.value) - slack)
        v = np.maximum(np.array(vc), np.array(vb))
        return _report(
            name, v,
            lambda k: {"field": int(k), "coercive": float(vc[k]), "bounded": float(vb[k])},
            REL_TOL, {"worst_coercive": float(max(vc)), "worst_bounded": float(max(vb)), "notes": notes},
        )

    if name == "growth":
        plan = SamplePlan(box=tuple(map(tuple, box)), seed=seed)
        cert = growth_certificate(fam, plan)
        v = max(
            (fam.ell - cert.ratio_min) / fam.ell,
            (cert.ratio_max - fam.m) / fam.m,
            cert.delta2_max - 1.0,
            0.0 if cert.density_monotone else 1.0,
        )
        return PropertyReport(name, cert.samples, float(v), {"argmin": cert.ratio_argmin, "argmax": cert.ratio_argmax},
                              "pass" if v <= REL_TOL else "fail", {"relative": REL_TOL}, cert.to_dict())

    if name == "condition-audit":
        from .solver import PowerLog, SolverConfig, condition_audit

        nl = nonlinearity or PowerLog(fam.m + 0.5)
        cfg = SolverConfig(fam, domain, s, nl, seed=seed)
        a = condition_audit(nl, fam, cfg)
        failed = [k for k, c in a.conditions.items() if c["verdict"] == "fail"]
        return PropertyReport(name, len(a.conditions), float(len(failed)), {"failed": failed},
                              "pass" if a.passed else "fail", {"conditions_failed": 0}, a.to_dict())

    raise ConfigError(name)  # unreachable
