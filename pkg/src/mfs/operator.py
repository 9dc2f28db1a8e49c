"""Discrete fractional Phi-Laplacian: derivative pairing, gradient, Hessian,
pointwise action and monotonicity diagnostics.

Normalization.  With ``D = D_s u`` on a stored pair and ``w`` its weight, the
pairing sums ``Phi'(|D|) sgn(D) D_s v w`` over ordered pairs, i.e. twice over
stored pairs.  The nodal gradient ``g`` is defined by
``pairing(u, v) = sum_k g_k v_k h^N``; it coincides with the pointwise operator
``2 sum_j Phi'(|D_kj|) sgn(D_kj) h^N / |x_k - x_j|^(N+s)`` (the factor 2 of the
operator and the double count of the pairing are the same 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._numerics import csum
from .errors import ConfigError, DomainError
from .grid import GridFunction, _values, luxemburg, _luxemburg_core


def _check(u, v, quad):
    for w in (u, v):
        if isinstance(w, GridFunction) and w.domain is not quad.domain:
            raise ConfigError("grid function and quadrature live on different domains")


def _flux(u, fam, quad):
    """Phi'(|D_s u|) sgn(D_s u) per stored pair."""
    D = quad.quotient(u)
    return quad.bound(fam).dphi(np.abs(D)) * np.sign(D)


def derivative_pairing(u, v, fam, quad):
    """<J'(u), v> = sum over ordered pairs of phi(|D_s u|) D_s u D_s v w."""
    _check(u, v, quad)
    return 2.0 * csum(_flux(u, fam, quad) * quad.quotient(v) * quad.w)


def _assemble(c, quad):
    n = quad.domain.n
    m = quad.n_ext
    out = np.bincount(quad.I, c, minlength=m) - np.bincount(quad.J, c, minlength=m)
    return out[:n]


def gradient_values(u, fam, quad):
    c = _flux(u, fam, quad) * quad.w / quad.rs
    return (2.0 / quad.domain.cell_measure) * _assemble(c, quad)


def gradient(u, fam, quad):
    """Nodal gradient g with pairing(u, v) = sum_k g_k v_k h^N."""
    _check(u, None, quad)
    return GridFunction(quad.domain, gradient_values(u, fam, quad))


def hessian(u, fam, quad, floor=0.0):
    """Dense matrix H with J''(u)[v, z] = sum_k (H v)_k z_k h^N.

    ``floor`` clips |D_s u| from below before evaluating Phi'', which keeps the
    matrix finite for densities that are singular at 0.
    """
    n = quad.domain.n
    D = np.abs(quad.quotient(u))
    if floor > 0:
        D = np.maximum(D, floor)
    d = 2.0 * quad.bound(fam).d2phi(D) * quad.w / quad.rs**2 / quad.domain.cell_measure
    I, J = quad.I, quad.J
    diag = np.bincount(I, d, minlength=quad.n_ext)[:n] + np.bincount(J, d, minlength=quad.n_ext)[:n]
    inner = J < n
    H = np.bincount(I[inner] * n + J[inner], -d[inner], minlength=n * n).reshape(n, n)
    H = H + H.T
    H[np.diag_indices(n)] += diag
    return H


@dataclass(frozen=True)
class PointwiseAction:
    """Operator value at a node and an upper bound for the truncated far field."""

    value: float
    tail_bound: float

    def __float__(self):
        return self.value


def _ball_area(N):
    return 2.0 if N == 1 else 2.0 * math.pi


def apply_pointwise(u, k, fam, quad):
    """2 sum_{j != k} Phi'(|D_s u(x_k, x_j)|) sgn(D_s u) h^N / |x_k - x_j|^(N+s).

    The sum runs over the extended node set of a collar-equipped quadrature.
    ``tail_bound`` bounds the contribution of |x - x_k| > R, where R is the
    distance from x_k to the edge of the extended lattice, using the upper
    growth exponent; it is not added to ``value``.
    """
    d = quad.domain
    if quad.collar < 1:
        raise DomainError("pointwise action needs a quadrature with a collar")
    if not isinstance(k, (int, np.integer)) or not 0 <= k < d.n:
        raise DomainError(f"node {k!r} is not an interior node")
    U = quad.extend(u)
    sel = np.nonzero((quad.I == k) | (quad.J == k))[0]
    other = np.where(quad.I[sel] == k, quad.J[sel], quad.I[sel])
    diff = quad.points[other] - d.interior[k]
    r = np.sqrt(np.sum(diff * diff, axis=1))
    D = (U[k] - U[other]) / r**quad.s
    x = np.broadcast_to(d.interior[k], (len(other), d.N))
    b = fam.bind(x, quad.points[other])
    terms = b.dphi(np.abs(D)) * np.sign(D) * d.cell_measure / (r**d.N * r**quad.s)
    value = 2.0 * csum(terms)
    uk = abs(U[k])
    if uk == 0:
        return PointwiseAction(value, 0.0)
    lo = d.lo - quad.collar * d.h
    hi = d.lo + (np.array(d.shape) + quad.collar) * d.h
    R = float(min(np.min(d.interior[k] - lo), np.min(hi - d.interior[k])))
    s, ell, m = quad.s, fam.ell, fam.m
    # Phi'(a / |z|^s) <= m Phi(a R^-s) (R/|z|)^(s ell) |z|^s / a for |z| >= R
    phiR = float(d.hat_bound(fam).phi(np.full(d.n, uk * R**-s))[k])
    tail = 2.0 * m * phiR / uk * _ball_area(d.N) / (s * ell)
    return PointwiseAction(value, tail)


def monotonicity_terms(u, v, fam, quad):
    """Per stored pair: (phi(|D u|) D u - phi(|D v|) D v)(D u - D v) w, and a scale."""
    _check(u, v, quad)
    Du, Dv = quad.quotient(u), quad.quotient(v)
    b = quad.bound(fam)
    a = b.dphi(np.abs(Du)) * np.sign(Du)
    c = b.dphi(np.abs(Dv)) * np.sign(Dv)
    t = (a - c) * (Du - Dv) * quad.w
    scale = (np.abs(a) + np.abs(c)) * np.abs(Du - Dv) * quad.w
    return t, scale


def monotonicity_gap(u, v, fam, quad):
    """<J'(u) - J'(v), u - v>; each summand is nonnegative."""
    t, _ = monotonicity_terms(u, v, fam, quad)
    return 2.0 * csum(t)


@dataclass
class SPlusReport:
    a: list
    b: list
    tol: float
    tol_prime: float
    holds: bool
    violations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "records": [{"n": i + 1, "a": a, "b": b} for i, (a, b) in enumerate(zip(self.a, self.b))],
            "tol": self.tol,
            "tol_prime": self.tol_prime,
            "holds": self.holds,
            "violations": self.violations,
        }


def splus_diagnostic(sequence, u, fam, quad, tol=1e-6, tol_prime=1e-6):
    """Finite-dimensional (S+) check along a sequence u_n.

    Records a_n = <J'(u_n), u_n - u> and b_n = J(u_n - u) and checks that
    b_n <= tol whenever a_n <= tol_prime.
    """
    from .grid import modular_gagliardo

    seq = list(sequence)
    if not seq:
        raise DomainError("sequence must be nonempty")
    a, b, bad = [], [], []
    for i, un in enumerate(seq):
        diff = _values(un, quad.domain) - _values(u, quad.domain)
        a.append(derivative_pairing(un, diff, fam, quad))
        b.append(modular_gagliardo(diff, fam, quad))
        if max(a[-1], 0.0) <= tol_prime and b[-1] > tol:
            bad.append(i)
    return SPlusReport(a, b, tol, tol_prime, not bad, bad)


class ProbeSet:
    """Unit-norm probe directions for lower estimates of dual norms.

    Coordinate directions e_k and ``n_random`` Gaussian fields, each scaled
    to unit Luxemburg seminorm.  Stored as rows of ``directions``.
    """

    def __init__(self, fam, quad, n_random=32, seed=0):
        d = quad.domain
        n = d.n
        dirs = np.zeros((n + n_random, n))
        # coordinate directions: only pairs touching k matter
        for k in range(n):
            sel = np.nonzero((quad.I == k) | (quad.J == k))[0]
            A = 1.0 / quad.rs[sel]
            b = fam.bind(quad.points[quad.I[sel]], quad.points[quad.J[sel]])
            w = quad.w[sel]
            lam = _luxemburg_core(lambda c: 2.0 * csum(b.phi(A * c) * w), fam.ell, fam.m, 1e-10)
            dirs[k, k] = 1.0 / lam
        rng = np.random.default_rng(seed)
        for j in range(n_random):
            v = rng.standard_normal(n)
            dirs[n + j] = v / luxemburg(v, "gagliardo", fam, quad)
        self.directions = dirs
        self.cell_measure = d.cell_measure

    def estimate(self, g):
        """max |<g, v>| over the probes, for a nodal gradient ``g``."""
        g = np.asarray(getattr(g, "values", g), dtype=float)
        return float(np.max(np.abs(self.directions @ g)) * self.cell_measure)


def dual_norm_estimate(g, probes):
    return probes.estimate(g)
