"""Generalized N-functions Phi_{x,y}(t), their densities and derived functions.

A family is evaluated in two steps.  ``fam.bind(x, y)`` resolves the
coefficient and exponent fields at a batch of point pairs and returns a
:class:`BoundNFunction` whose methods act on arrays of ``t >= 0`` with one
entry per pair.  The module-level helpers (:func:`eval_phi`,
:func:`eval_density`, :func:`conjugate`, ...) wrap this for single points.

Throughout, ``density`` means ``t * phi(t) = Phi'(t)``, with value 0 at t = 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._numerics import gauss_legendre, invert_increasing
from .errors import AccuracyWarning, ConditionViolation, ConfigError, DomainError

EPS = np.finfo(float).eps


def as_points(x, N=None):
    """Coerce a point or a batch of points to shape ``(n, N)``.

    A 1-D input is one point, except when ``N == 1`` where it is a batch.
    """
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        if N == 1 and a.size != 1:
            return a.reshape(-1, 1)
        return a.reshape(1, -1)
    return a


# --------------------------------------------------------------------- fields


class Field:
    """A real function of a point pair ``(x, y)``.

    ``rule(x, y)`` receives arrays of shape ``(n, N)`` and returns shape ``(n,)``.
    ``bounds`` is the declared ``(lo, hi)`` range; it is checked, never inferred.
    """

    def __init__(self, rule, bounds=None, name="custom"):
        self.rule = rule
        self.bounds = None if bounds is None else (float(bounds[0]), float(bounds[1]))
        self.name = name

    def __call__(self, x, y, check=True):
        x = as_points(x)
        y = as_points(y, x.shape[1])
        v = np.broadcast_to(np.asarray(self.rule(x, y), dtype=float), (max(len(x), len(y)),))
        if check:
            if not np.all(np.isfinite(v)):
                raise ConfigError(f"field {self.name!r} is not finite on the sampled pairs")
            w = np.broadcast_to(np.asarray(self.rule(y, x), dtype=float), v.shape)
            bad = np.abs(v - w) > 1e-12 * np.maximum(1.0, np.abs(v))
            if np.any(bad):
                k = int(np.argmax(bad))
                raise ConfigError(
                    f"field {self.name!r} is not symmetric: f(x,y)={v[k]!r} but f(y,x)={w[k]!r}"
                )
            if self.bounds is not None:
                lo, hi = self.bounds
                if np.any(v < lo - 1e-12) or np.any(v > hi + 1e-12):
                    raise ConfigError(
                        f"field {self.name!r} leaves its declared range [{lo}, {hi}]"
                    )
        return v

    def to_dict(self):
        return {"type": self.name, "bounds": self.bounds}


class Constant(Field):
    def __init__(self, value):
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError("constant field must be finite")
        self.value = value
        super().__init__(lambda x, y: np.full(len(x), value), (value, value), "constant")

    def __call__(self, x, y, check=True):
        n = max(len(as_points(x)), len(as_points(y)))
        return np.full(n, self.value)

    def to_dict(self):
        return {"type": "constant", "value": self.value}


class SmoothBump(Field):
    """``base + amplitude * b((x + y) / 2)`` with the compactly supported bump
    ``b(z) = exp(1 - 1 / (1 - |z - c|^2 / R^2))`` (so ``0 <= b <= 1``, ``b(c) = 1``)."""

    def __init__(self, base, amplitude, center=(0.5, 0.5), radius=0.5):
        self.base = float(base)
        self.amplitude = float(amplitude)
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        if self.radius <= 0:
            raise ConfigError("bump radius must be positive")
        lo = self.base + min(0.0, self.amplitude)
        hi = self.base + max(0.0, self.amplitude)
        super().__init__(self._rule, (lo, hi), "bump")

    def _rule(self, x, y):
        mid = 0.5 * (x + y)
        c = self.center[: mid.shape[1]]
        z = np.sum((mid - c) ** 2, axis=1) / self.radius**2
        inside = z < 1.0
        b = np.zeros(len(mid))
        b[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside]))
        return self.base + self.amplitude * b

    def to_dict(self):
        return {
            "type": "bump",
            "base": self.base,
            "amplitude": self.amplitude,
            "center": self.center.tolist(),
            "radius": self.radius,
        }


def as_field(value, name="field"):
    if isinstance(value, Field):
        return value
    if callable(value):
        return Field(value, name=name)
    return Constant(value)


# -------------------------------------------------------------- bound functions


class BoundNFunction:
    """Phi, Phi' and Phi'' at a fixed batch of point pairs.

    Every method takes ``t >= 0`` broadcastable against the batch (shape ``(n,)``
    or ``(n, k)``); parameters are broadcast along the leading axis.
    """

    def __init__(self, ell, m):
        self.ell = ell
        self.m = m

    def _p(self, a, t):
        a = np.asarray(a)
        t = np.asarray(t)
        if a.ndim == 1 and t.ndim == 2:
            return a[:, None]
        return a

    def phi(self, t):
        raise NotImplementedError

    def dphi(self, t):
        raise NotImplementedError

    def d2phi(self, t):
        raise NotImplementedError

    def inverse(self, v):
        """Solve ``Phi(t) = v`` for ``t >= 0``, one ``v`` per pair of the batch."""
        v = np.asarray(v, dtype=float)
        pos = v > 0
        phi1 = self.phi(np.ones(v.shape))
        target = np.where(pos, v, phi1)
        r = target / phi1
        # growth bounds: t lies between r^(1/m) and r^(1/ell)
        a = r ** (1.0 / self.m)
        b = r ** (1.0 / self.ell)
        lo = np.minimum(a, b) * 0.5
        hi = np.maximum(a, b) * 2.0
        out = invert_increasing(self.phi, target, lo, hi)
        return np.where(pos, out, 0.0)


class _DoublePhaseBound(BoundNFunction):
    def __init__(self, p, q, a):
        super().__init__(p, q)
        self.p, self.q, self.a = p, q, a

    def phi(self, t):
        a = self._p(self.a, t)
        return t**self.p / self.p + a * t**self.q / self.q

    def dphi(self, t):
        a = self._p(self.a, t)
        return t ** (self.p - 1) + a * t ** (self.q - 1)

    def d2phi(self, t):
        a = self._p(self.a, t)
        with np.errstate(divide="ignore"):
            return (self.p - 1) * t ** (self.p - 2) + a * (self.q - 1) * t ** (self.q - 2)


class _PowerBound(BoundNFunction):
    """``c * t^p`` with per-pair coefficient and exponent."""

    def __init__(self, p, c, ell, m):
        super().__init__(ell, m)
        self.p, self.c = p, c

    def phi(self, t):
        return self._p(self.c, t) * t ** self._p(self.p, t)

    def dphi(self, t):
        p = self._p(self.p, t)
        return self._p(self.c, t) * p * t ** (p - 1)

    def d2phi(self, t):
        p = self._p(self.p, t)
        with np.errstate(divide="ignore"):
            return self._p(self.c, t) * p * (p - 1) * t ** (p - 2)


class _LogBound(BoundNFunction):
    def __init__(self, p, ell, m):
        super().__init__(ell, m)
        self.p = p

    def phi(self, t):
        return t ** self._p(self.p, t) * np.log1p(t)

    def dphi(self, t):
        p = self._p(self.p, t)
        tp1 = t ** (p - 1)
        return p * tp1 * np.log1p(t) + tp1 * t / (1.0 + t)

    def d2phi(self, t):
        p = self._p(self.p, t)
        tp1 = t ** (p - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            l1 = np.where(t > 0, np.log1p(t) / t, 1.0)
        return p * (p - 1) * tp1 * l1 + 2 * p * tp1 / (1.0 + t) - tp1 * t / (1.0 + t) ** 2


class _CustomBound(BoundNFunction):
    """Phi from a user density by geometric-octave Gauss-Legendre quadrature."""

    OCTAVES = 48
    NODES = 8
    CHUNK = 2048

    def __init__(self, rule, rule_prime, x, y, ell, m):
        super().__init__(ell, m)
        self.rule, self.rule_prime, self.x, self.y = rule, rule_prime, x, y

    def _grid(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 2:
            return t
        return np.broadcast_to(t, (len(self.x),))[:, None]

    def _eval(self, rule, t, rows=slice(None)):
        # a 2-D ``t`` already holds just the ``rows`` batch
        shape = np.shape(t)
        t2 = self._grid(t)
        n, k = t2.shape
        xs = np.repeat(self.x[rows], k, axis=0)
        ys = np.repeat(self.y[rows], k, axis=0)
        v = np.asarray(rule(xs, ys, t2.ravel()), dtype=float).reshape(n, k)
        return v if len(shape) == 2 else v[:, 0]

    def dphi(self, t):
        return self._eval(self.rule, t)

    def d2phi(self, t):
        if self.rule_prime is not None:
            return self._eval(self.rule_prime, t)
        t = np.asarray(t, dtype=float)
        h = 1e-6 * np.maximum(t, 1e-8)
        lo = np.maximum(t - h, 0.0)
        return (self.dphi(t + h) - self.dphi(lo)) / (t + h - lo)

    def phi(self, t):
        flat = np.ndim(t) < 2
        t2 = self._grid(t)
        xg, wg = gauss_legendre(self.NODES)
        lo = 2.0 ** -(np.arange(self.OCTAVES) + 1.0)
        nodes = (lo[:, None] * (1.0 + xg[None, :])).ravel()
        weights = (lo[:, None] * wg[None, :]).ravel()
        out = np.empty(t2.shape)
        n, k = t2.shape
        for r0 in range(0, n, self.CHUNK):
            rows = slice(r0, min(n, r0 + self.CHUNK))
            tc = t2[rows]
            tn = (tc[:, :, None] * nodes).reshape(len(tc), -1)
            vals = self._eval(self.rule, tn, rows).reshape(len(tc), k, -1)
            body = (vals * weights).sum(axis=2) * tc
            t0 = tc * 2.0**-self.OCTAVES
            # below the last octave Phi(t0) ~ t0 Phi'(t0) / ratio with ratio in [ell, m]
            tail = t0 * self._eval(self.rule, t0, rows) * 0.5 * (1.0 / self.ell + 1.0 / self.m)
            out[rows] = body + tail
        return out[:, 0] if flat else out


# ------------------------------------------------------------------- families


class NFunctionFamily:
    """Base class.  Subclasses set ``kind``, ``ell``, ``m`` and implement ``_bind``."""

    kind = "abstract"

    def __init__(self, ell, m):
        ell, m = float(ell), float(m)
        if not (1.0 < ell <= m < math.inf):
            raise ConfigError(f"growth exponents must satisfy 1 < ell <= m < inf, got ell={ell}, m={m}")
        self.ell, self.m = ell, m

    def bind(self, x, y=None, check=True):
        x = as_points(x)
        y = x if y is None else as_points(y, x.shape[1])
        if len(y) != len(x):
            n = max(len(x), len(y))
            x = np.broadcast_to(x, (n, x.shape[1]))
            y = np.broadcast_to(y, (n, x.shape[1]))
        return self._bind(x, y, check)

    def hat(self, x, check=True):
        """Bound function Phi_hat_x(t) = Phi_{x,x}(t)."""
        return self.bind(x, x, check)

    def _bind(self, x, y, check):
        raise NotImplementedError

    @property
    def strictly_increasing_density(self):
        """Whether t * phi(t) is strictly increasing for every pair."""
        return True

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class DoublePhase(NFunctionFamily):
    """Phi(t) = t^p / p + a(x, y) t^q / q."""

    kind = "doublephase"

    def __init__(self, p, q, a=1.0):
        p, q = float(p), float(q)
        if not (1.0 < p < q):
            raise ConfigError(f"doublephase requires 1 < p < q, got p={p}, q={q}")
        self.p, self.q = p, q
        self.a = as_field(a, "a")
        if self.a.bounds is not None and self.a.bounds[0] < 0:
            raise ConfigError("doublephase coefficient a must be nonnegative")
        super().__init__(p, q)

    def _bind(self, x, y, check):
        a = self.a(x, y, check)
        if check and np.any(a < 0):
            raise ConfigError("doublephase coefficient a must be nonnegative")
        return _DoublePhaseBound(self.p, self.q, a)

    def to_dict(self):
        return {"kind": self.kind, "p": self.p, "q": self.q, "a": self.a.to_dict()}


class AnisotropicP(NFunctionFamily):
    """Phi(t) = a(x, y) t^p with a > 0."""

    kind = "anisotropic"

    def __init__(self, p, a=1.0):
        p = float(p)
        if not p > 1.0:
            raise ConfigError(f"anisotropic family requires p > 1, got p={p}")
        self.p = p
        self.a = as_field(a, "a")
        if self.a.bounds is not None and self.a.bounds[0] <= 0:
            raise ConfigError("anisotropic coefficient a must be positive")
        super().__init__(p, p)

    def _bind(self, x, y, check):
        a = self.a(x, y, check)
        if check and np.any(a <= 0):
            raise ConfigError("anisotropic coefficient a must be positive")
        return _PowerBound(self.p, a, self.ell, self.m)

    def to_dict(self):
        return {"kind": self.kind, "p": self.p, "a": self.a.to_dict()}


def _exponent_field(p, name):
    f = as_field(p, name)
    if f.bounds is None:
        raise ConfigError(f"exponent field {name!r} must declare bounds (p_minus, p_plus)")
    if f.bounds[0] <= 1.0:
        raise ConfigError(f"exponent field {name!r} must stay above 1, lower bound is {f.bounds[0]}")
    return f


class VariableExponent(NFunctionFamily):
    """Phi(t) = t^p(x,y) / p(x,y)."""

    kind = "pxy"

    def __init__(self, p):
        self.p = _exponent_field(p, "p")
        super().__init__(*self.p.bounds)

    def _bind(self, x, y, check):
        p = self.p(x, y, check)
        return _PowerBound(p, 1.0 / p, self.ell, self.m)

    def to_dict(self):
        return {"kind": self.kind, "p": self.p.to_dict()}


class LogPerturbed(NFunctionFamily):
    """Phi(t) = t^p(x,y) log(1 + t); growth exponents p_minus and p_plus + 1."""

    kind = "logpert"

    def __init__(self, p):
        self.p = _exponent_field(p, "p")
        super().__init__(self.p.bounds[0], self.p.bounds[1] + 1.0)

    def _bind(self, x, y, check):
        return _LogBound(self.p(x, y, check), self.ell, self.m)

    def to_dict(self):
        return {"kind": self.kind, "p": self.p.to_dict()}


class Custom(NFunctionFamily):
    """User density ``rule(x, y, t) = t * phi_{x,y}(t)`` with declared exponents.

    Phi is obtained by quadrature, so evaluation is much slower than for the
    closed-form families.  ``ell`` and ``m`` are verified by
    :func:`growth_certificate`, never inferred.
    """

    kind = "custom"

    def __init__(self, density, ell, m, density_prime=None, name="custom", increasing=True):
        self.rule = density
        self.rule_prime = density_prime
        self.name = name
        self._increasing = bool(increasing)
        super().__init__(ell, m)

    def _bind(self, x, y, check):
        return _CustomBound(self.rule, self.rule_prime, x, y, self.ell, self.m)

    @property
    def strictly_increasing_density(self):
        return self._increasing

    def to_dict(self):
        return {"kind": self.kind, "name": self.name, "ell": self.ell, "m": self.m}


def family_from_dict(d):
    """Build a family from its serialized form (see ``to_dict``)."""
    d = dict(d)
    kind = d.pop("kind")

    def fld(v):
        if isinstance(v, dict):
            t = v.get("type")
            if t == "constant":
                return Constant(v["value"])
            if t == "bump":
                return SmoothBump(v["base"], v["amplitude"], v.get("center", (0.5, 0.5)), v.get("radius", 0.5))
            raise ConfigError(f"unknown field type {t!r}")
        return v

    if kind == "doublephase":
        return DoublePhase(d["p"], d["q"], fld(d.get("a", 1.0)))
    if kind == "anisotropic":
        return AnisotropicP(d["p"], fld(d.get("a", 1.0)))
    if kind == "pxy":
        return VariableExponent(fld(d["p"]))
    if kind == "logpert":
        return LogPerturbed(fld(d["p"]))
    raise ConfigError(f"unknown family kind {kind!r}")


# --------------------------------------------------------- scalar evaluation


def _scalar_bound(fam, x, y):
    return fam.bind(as_points(x), as_points(y, as_points(x).shape[1]))


def eval_phi(fam, x, y, t):
    """Phi_{x,y}(|t|)."""
    t = float(t)
    if not math.isfinite(t):
        raise DomainError("t must be finite")
    return float(_scalar_bound(fam, x, y).phi(np.array([abs(t)]))[0])


def eval_density(fam, x, y, t):
    """t * phi_{x,y}(t) for t >= 0 (0 at t = 0)."""
    t = float(t)
    if not t >= 0:
        raise DomainError(f"density needs t >= 0, got {t}")
    if t == 0:
        return 0.0
    return float(_scalar_bound(fam, x, y).dphi(np.array([t]))[0])


# ----------------------------------------------------------------- conjugate


@dataclass(frozen=True)
class ConjugateValue:
    """A lower approximation of the Young conjugate and its certified accuracy."""

    value: float
    accuracy: float
    argmax: float
    converged: bool

    def __float__(self):
        return self.value


def conjugate_array(bound, t, depth=64):
    """Vectorized conjugate sup_s (t s - Phi(s)) for a bound function.

    Returns ``(value, accuracy, argmax, converged)`` arrays.  ``value`` is the
    best objective seen, hence a lower bound that cannot decrease with depth;
    ``value + accuracy`` bounds the true supremum from above (tangent-line
    bound of the concave objective on the final bracket, plus rounding).
    """
    if int(depth) < 1:
        raise DomainError("depth must be >= 1")
    t = np.asarray(t, dtype=float)
    n = np.broadcast_shapes(t.shape, np.shape(bound.phi(np.ones(1))))
    t = np.broadcast_to(t, n).astype(float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("conjugate needs finite t >= 0")
    value = np.zeros(n)
    acc = np.zeros(n)
    arg = np.zeros(n)
    conv = np.ones(n, dtype=bool)
    pos = t > 0
    if not np.any(pos):
        return value, acc, arg, conv

    dphi = bound.dphi
    phi = bound.phi

    def ev(fun, s):
        # evaluate on the full batch but only use positive-t entries
        buf = np.ones(n)
        buf[pos] = s
        return fun(buf)[pos]

    tp = t[pos]
    hi = np.ones(tp.shape)
    lo = np.ones(tp.shape)
    up = ev(dphi, hi) < tp
    for _ in range(4096):
        need = up & (ev(dphi, hi) < tp)
        if not np.any(need):
            break
        hi = np.where(need, hi * 2.0, hi)
    else:
        raise ConditionViolation("density does not reach the requested slope")
    lo = np.where(up, hi * 0.5, lo)
    down = ~up
    for _ in range(4096):
        need = down & (ev(dphi, lo) >= tp) & (lo > 0)
        if not np.any(need):
            break
        lo = np.where(need, lo * 0.5, lo)
    hi = np.where(down, np.where(lo > 0, lo * 2.0, hi), hi)
    lo = np.where(down & (ev(dphi, lo) >= tp), 0.0, lo)

    def g(s):
        return tp * s - ev(phi, s)

    glo, ghi = g(lo), g(hi)
    best = np.maximum(glo, ghi)
    barg = np.where(glo >= ghi, lo, hi)
    for _ in range(int(depth)):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        better = gm > best
        best = np.where(better, gm, best)
        barg = np.where(better, mid, barg)
        right = ev(dphi, mid) < tp
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    glo, ghi = g(lo), g(hi)
    da = tp - ev(dphi, lo)
    db = tp - ev(dphi, hi)
    den = da - db
    with np.errstate(divide="ignore", invalid="ignore"):
        s_int = (ghi - glo + da * lo - db * hi) / den
        upper = np.where(den > 0, glo + da * (s_int - lo), np.maximum(glo, ghi))
    upper = np.maximum(upper, best)
    rnd = 4.0 * EPS * (tp * hi + ev(phi, hi))
    gap = upper - best
    value[pos] = np.maximum(best, 0.0)
    acc[pos] = gap + rnd
    arg[pos] = barg
    conv[pos] = gap <= 2.0 * rnd
    return value, acc, arg, conv


def conjugate(fam, x, y, t, depth=64):
    """Young conjugate sup_{s>=0} (t s - Phi_{x,y}(s)) at one point pair.

    The maximizer is bracketed on the monotone equation Phi'(s) = t and refined
    by ``depth`` bisection steps.  Emits :class:`AccuracyWarning` when the
    bracket is not resolved to rounding level.
    """
    t = float(t)
    if not t >= 0 or not math.isfinite(t):
        raise DomainError(f"conjugate needs finite t >= 0, got {t}")
    if int(depth) < 1:
        raise DomainError("depth must be >= 1")
    v, a, s, c = conjugate_array(_scalar_bound(fam, x, y), np.array([t]), depth)
    out = ConjugateValue(float(v[0]), float(a[0]), float(s[0]), bool(c[0]))
    if not out.converged:
        warnings.warn(
            f"conjugate at t={t} not converged at depth {depth}: accuracy {out.accuracy:.3e}",
            AccuracyWarning,
            stacklevel=2,
        )
    return out


@dataclass
class ConjugateTable:
    """Conjugate values on a sorted t-grid, one row per (x, y) sample."""

    t: np.ndarray
    values: np.ndarray
    accuracy: np.ndarray
    depth: int
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def build(cls, fam, x, y, t, depth=64):
        t = np.asarray(t, dtype=float)
        if t.ndim != 1 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise DomainError("t-grid must be sorted, strictly increasing and positive")
        x = as_points(x)
        y = as_points(y, x.shape[1])
        b = fam.bind(np.repeat(x, len(t), axis=0), np.repeat(y, len(t), axis=0))
        tt = np.tile(t, len(x))
        v, a, _, _ = conjugate_array(b, tt, depth)
        shape = (len(x), len(t))
        tab = cls(t, v.reshape(shape), a.reshape(shape), int(depth), x, y)
        tab.values.setflags(write=False)
        tab.accuracy.setflags(write=False)
        return tab

    def check(self):
        """Nonnegative, nondecreasing and convex along the grid, up to accuracy."""
        v, a = self.values, self.accuracy
        ok = bool(np.all(v >= 0))
        ok &= bool(np.all(np.diff(v, axis=1) >= -(a[:, 1:] + a[:, :-1])))
        if len(self.t) >= 3:
            t = self.t
            w = (t[2:] - t[1:-1]) / (t[2:] - t[:-2])
            interp = w * v[:, :-2] + (1 - w) * v[:, 2:]
            ok &= bool(np.all(v[:, 1:-1] <= interp + a[:, 1:-1] + a[:, :-2] + a[:, 2:]))
        return ok

    def to_csv(self, path, sample=0):
        with open(path, "w") as fh:
            fh.write("t,value,accuracy\n")
            for t, v, a in zip(self.t, self.values[sample], self.accuracy[sample]):
                fh.write(f"{float(t)!r},{float(v)!r},{float(a)!r}\n")


# ----------------------------------------------------------------- xi bounds


def critical_exponent(e, N, s):
    """N e / (N - s e); requires 1 < e < N / s."""
    if not (1.0 < e < N / s):
        raise DomainError(f"critical exponent needs 1 < {e} < N/s = {N / s}")
    return N * e / (N - s * e)


def xi_exponents(which, ell, m, N=None, s=None):
    if which in ("xi0", 0):
        return ell, m
    if which in ("xi1", 1):
        if not (ell > 1 and m > 1):
            raise DomainError("xi1 needs ell, m > 1")
        return ell / (ell - 1.0), m / (m - 1.0)
    if which in ("xi2", 2):
        if N is None or s is None:
            raise DomainError("xi2 needs N and s")
        return critical_exponent(ell, N, s), critical_exponent(m, N, s)
    raise DomainError(f"unknown xi bound {which!r}")


def xi_bounds(which, ell, m, sigma, N=None, s=None):
    """``(min(sigma^a, sigma^b), max(sigma^a, sigma^b))`` for the exponent pair of ``which``.

    ``which`` is ``"xi0"`` (ell, m), ``"xi1"`` (conjugate exponents) or
    ``"xi2"`` (critical exponents, needs ``N`` and ``s``).  Works elementwise on arrays.
    """
    a, b = xi_exponents(which, float(ell), float(m), N, s)
    sig = np.asarray(sigma, dtype=float)
    if np.any(sig < 0):
        raise DomainError("sigma must be >= 0")
    pa, pb = sig**a, sig**b
    lo, hi = np.minimum(pa, pb), np.maximum(pa, pb)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


# ----------------------------------------------------------- growth certificate


@dataclass
class SamplePlan:
    """Log-uniform t-grid over [t_min, t_max] and random (x, y) pairs in a box."""

    t_min: float = 1e-6
    t_max: float = 1e6
    per_decade: int = 64
    pairs: int = 32
    box: tuple = ((0.0, 1.0), (0.0, 1.0))
    seed: int = 0

    def t_grid(self):
        dec = math.log10(self.t_max / self.t_min)
        n = max(2, int(round(dec * self.per_decade)) + 1)
        return np.geomspace(self.t_min, self.t_max, n)

    def points(self):
        rng = np.random.default_rng(self.seed)
        box = np.asarray(self.box, dtype=float)
        lo, hi = box[:, 0], box[:, 1]
        x = lo + (hi - lo) * rng.random((self.pairs, len(box)))
        y = lo + (hi - lo) * rng.random((self.pairs, len(box)))
        return x, y


@dataclass
class GrowthCertificate:
    ell: float
    m: float
    ratio_min: float
    ratio_max: float
    ratio_argmin: dict
    ratio_argmax: dict
    delta2_max: float
    phi1_min: float
    phi1_max: float
    density_monotone: bool
    passed: bool
    samples: int
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def growth_certificate(fam, plan=None, rtol=1e-10):
    """Sample t * Phi'(t) / Phi(t) and check it against the declared [ell, m].

    Also reports the worst Delta_2 quotient Phi(2t) / (2^m Phi(t)) (must be <= 1),
    the range of Phi_{x,y}(1) over the sampled pairs, and monotonicity of the density.
    """
    plan = plan or SamplePlan()
    t = plan.t_grid()
    x, y = plan.points()
    k = len(t)
    b = fam.bind(np.repeat(x, k, axis=0), np.repeat(y, k, axis=0))
    tt = np.tile(t, len(x))
    ph = b.phi(tt)
    if np.any(ph <= 0):
        raise ConfigError("Phi vanishes at some t > 0: the family is not an N-function")
    d = b.dphi(tt)
    ratio = tt * d / ph
    delta2 = b.phi(2 * tt) / (2.0**fam.m * ph)
    mono = bool(np.all(np.diff(d.reshape(len(x), k), axis=1) >= 0))
    phi1 = fam.bind(x, y).phi(np.ones(len(x)))
    i, j = int(np.argmin(ratio)), int(np.argmax(ratio))
    passed = (
        ratio[i] >= fam.ell * (1 - rtol)
        and ratio[j] <= fam.m * (1 + rtol)
        and float(delta2.max()) <= 1 + rtol
        and mono
    )
    notes = []
    if len(plan.box) == 1:
        notes.append("one-dimensional sampling: outside the N >= 2 setting, reported as extrapolation")
    return GrowthCertificate(
        ell=fam.ell,
        m=fam.m,
        ratio_min=float(ratio[i]),
        ratio_max=float(ratio[j]),
        ratio_argmin={"t": float(tt[i]), "x": x[i // k].tolist(), "y": y[i // k].tolist()},
        ratio_argmax={"t": float(tt[j]), "x": x[j // k].tolist(), "y": y[j // k].tolist()},
        delta2_max=float(delta2.max()),
        phi1_min=float(phi1.min()),
        phi1_max=float(phi1.max()),
        density_monotone=mono,
        passed=bool(passed),
        samples=int(ratio.size),
        notes=notes,
    )


# ------------------------------------------------------- Sobolev conjugate

_OCTAVES = 64
_GL_NODES = 10


def _sobolev_integrand(bh, v, N, s):
    # after substituting tau = Phi_hat(v): v Phi_hat'(v) Phi_hat(v)^(-(N+s)/N)
    return v * bh.dphi(v) * bh.phi(v) ** (-(N + s) / N)


def sobolev_conjugate_inverse_array(fam, x, s, N, t):
    """Vectorized inverse of the Musielak-Sobolev conjugate at points ``x``.

    Computes int_0^t Phi_hat_x^{-1}(tau) tau^{-(N+s)/N} dtau after the change of
    variables tau = Phi_hat_x(v), on geometric octaves towards v = 0 with a
    power-law tail.  Raises :class:`ConditionViolation` when the integrand is
    not integrable at 0.
    """
    if not (0 < s < 1):
        raise DomainError("s must lie in (0, 1)")
    t = np.asarray(t, dtype=float)
    x = as_points(x, N)
    n = max(len(x), t.size)
    t = np.broadcast_to(t, (n,)).copy()
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("t must be finite and >= 0")
    x = np.broadcast_to(x, (n, x.shape[1]))
    bh = fam.hat(x)
    out = np.zeros(n)
    pos = t > 0
    if not np.any(pos):
        return out
    T = bh.inverse(np.where(pos, t, 1.0))
    xg, wg = gauss_legendre(_GL_NODES)
    j = np.arange(_OCTAVES)
    lo = 2.0 ** -(j + 1)
    nodes = (lo[:, None] * (1.0 + xg[None, :])).ravel()
    weights = (lo[:, None] * wg[None, :]).ravel()
    v = T[:, None] * nodes[None, :]
    with np.errstate(divide="ignore", over="ignore"):
        f = _sobolev_integrand(bh, v, N, s)
    body = (f * weights[None, :]).sum(axis=1) * T
    # local power law f ~ v^alpha on the last octave
    v1 = T * 2.0**-_OCTAVES
    v2 = 2.0 * v1
    f1 = _sobolev_integrand(bh, v1, N, s)
    f2 = _sobolev_integrand(bh, v2, N, s)
    alpha = np.log2(f2 / f1)
    if np.any(alpha[pos] <= -1.0 + 1e-9) or not np.all(np.isfinite(body[pos])):
        raise ConditionViolation(
            "integrand of the Sobolev conjugate is not integrable at 0 "
            f"(local exponent {float(np.min(alpha[pos])):.4f} <= -1); need m < N/s"
        )
    tail = f1 * v1 / (alpha + 1.0)
    out[pos] = (body + tail)[pos]
    return out


def sobolev_conjugate_inverse(fam, x, s, N, t):
    """Inverse of the Musielak-Sobolev conjugate Phi_hat*_{s,x} at one point."""
    t = float(t)
    if t < 0 or not math.isfinite(t):
        raise DomainError("t must be finite and >= 0")
    if t == 0:
        return 0.0
    return float(sobolev_conjugate_inverse_array(fam, as_points(x, N), s, N, np.array([t]))[0])


def sobolev_conjugate(fam, x, s, N, t):
    """Phi_hat*_{s,x}(t) by inverting :func:`sobolev_conjugate_inverse` (vectorized)."""
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    x = as_points(x, N)
    n = max(len(x), t.size)
    t = np.broadcast_to(t, (n,))
    out = np.zeros(n)
    pos = t > 0
    if not np.any(pos):
        return float(out[0]) if scalar else out
    xp = np.broadcast_to(x, (n, x.shape[1]))[pos]
    target = t[pos]
    # G(tau) grows like tau^(1/ell* .. 1/m*); bracket generously in log scale
    g1 = sobolev_conjugate_inverse_array(fam, xp, s, N, np.ones(len(xp)))
    r = target / g1
    e_lo = critical_exponent(fam.ell, N, s)
    e_hi = critical_exponent(fam.m, N, s)
    a, b = r**e_lo, r**e_hi
    lo = np.minimum(a, b) * 0.25
    hi = np.maximum(a, b) * 4.0

    def G(tau):
        return sobolev_conjugate_inverse_array(fam, xp, s, N, tau)

    out[pos] = invert_increasing(G, target, lo, hi, iters=120, rtol=1e-14)
    return float(out[0]) if scalar else out
