"""Uniform cell-centred grids, grid functions, pair quadrature and modulars.

Nodes are the centres of the cells of a uniform lattice with spacing ``h``.
Lattice multi-index ``k`` sits at ``lo + (k + 1/2) h`` and the lattice extends
past the bounding box, so every node of the plane has an index.  A grid function
stores one value per interior node and is zero everywhere else.

The pair quadrature discretizes the double integral of ``F(x, y) dx dy / |x-y|^N``
by the midpoint rule per cell pair, skipping the diagonal.  Pairs are stored once
(``I < J`` in the extended index, ``I`` interior); sums carry the factor 2.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._numerics import csum
from .errors import AccuracyWarning, BracketOverflowError, ConfigError, DomainError
from .nfunc import conjugate_array


class GridDomain:
    """Uniform grid on a box or polygon in R^N, N in {1, 2}.

    Parameters
    ----------
    box : sequence of (lo, hi)
        Bounding box; each side must be an integer multiple of ``h``.
    h : float
        Mesh width.
    polygon : sequence of (x, y), optional
        Vertices of a simple polygon (N = 2); interior nodes are the cell
        centres inside it.  Without a polygon the whole box is the domain.
    """

    def __init__(self, box, h, polygon=None):
        box = np.asarray(box, dtype=float).reshape(-1, 2)
        N = len(box)
        if N not in (1, 2):
            raise ConfigError(f"only N in {{1, 2}} is supported, got N={N}")
        h = float(h)
        if not h > 0:
            raise ConfigError("mesh width must be positive")
        if np.any(box[:, 1] <= box[:, 0]):
            raise ConfigError("box sides must have lo < hi")
        cells = (box[:, 1] - box[:, 0]) / h
        ncell = np.rint(cells).astype(int)
        if np.any(np.abs(cells - ncell) > 1e-9 * np.maximum(1, cells)) or np.any(ncell < 1):
            raise ConfigError("box sides must be positive integer multiples of h")
        self.N = N
        self.h = h
        self.box = box
        self.lo = box[:, 0].copy()
        self.shape = tuple(int(c) for c in ncell)
        idx = np.stack(np.meshgrid(*[np.arange(c) for c in self.shape], indexing="ij"), -1).reshape(-1, N)
        self.lattice = idx
        self.nodes = self.lo + (idx + 0.5) * h
        if polygon is None:
            self.polygon = None
            mask = np.ones(len(idx), dtype=bool)
        else:
            if N != 2:
                raise ConfigError("polygon domains need N = 2")
            import shapely

            self.polygon = [tuple(map(float, v)) for v in polygon]
            poly = shapely.Polygon(self.polygon)
            if not poly.is_valid or poly.area <= 0:
                raise ConfigError("polygon must be simple with positive area")
            mask = shapely.contains_xy(poly, self.nodes[:, 0], self.nodes[:, 1])
        if not np.any(mask):
            raise ConfigError("domain has no interior node")
        self.mask = mask
        self.interior_index = idx[mask]
        self.interior = self.nodes[mask]
        self.n = int(mask.sum())
        self.cell_measure = h**N
        ext = self.interior.max(axis=0) - self.interior.min(axis=0) + h
        self.diameter = float(np.sqrt(np.sum(ext**2)))
        self._lookup = {tuple(k): i for i, k in enumerate(self.interior_index.tolist())}
        self._hat = {}

    @classmethod
    def unit(cls, n, N=2):
        """Unit cube (0, 1)^N with ``n`` cells per side."""
        return cls([(0.0, 1.0)] * N, 1.0 / n)

    @property
    def extrapolated(self):
        """True for 1-D grids, which lie outside the N >= 2 setting."""
        return self.N == 1

    def refine(self):
        """Same domain with half the mesh width."""
        return GridDomain(self.box, self.h / 2, self.polygon)

    def point(self, k):
        return self.lo + (np.asarray(k, dtype=float) + 0.5) * self.h

    def index_of(self, k):
        """Interior index of lattice multi-index ``k``, or None if exterior."""
        return self._lookup.get(tuple(int(v) for v in np.atleast_1d(k)))

    def hat_bound(self, fam):
        key = id(fam)
        hit = self._hat.get(key)
        if hit is None or hit[0] is not fam:
            hit = (fam, fam.hat(self.interior))
            self._hat[key] = hit
        return hit[1]

    def to_dict(self):
        d = {"N": self.N, "box": self.box.tolist(), "h": self.h}
        if self.polygon is not None:
            d["polygon"] = [list(v) for v in self.polygon]
        return d

    def __repr__(self):
        return f"GridDomain(N={self.N}, shape={self.shape}, h={self.h}, interior={self.n})"


class GridFunction:
    """Nodal values on the interior nodes of a domain, zero outside."""

    __array_priority__ = 100

    def __init__(self, domain, values):
        v = np.array(values, dtype=float).reshape(-1)
        if v.size == 1 and domain.n != 1:
            v = np.full(domain.n, float(v[0]))
        if v.size != domain.n:
            raise ConfigError(f"expected {domain.n} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ConfigError("grid function values must be finite")
        v.setflags(write=False)
        self.domain = domain
        self.values = v

    @classmethod
    def zeros(cls, domain):
        return cls(domain, np.zeros(domain.n))

    @classmethod
    def from_function(cls, domain, f):
        """Sample ``f(points)`` with points of shape (n, N)."""
        return cls(domain, f(domain.interior))

    def at(self, k):
        """Value at lattice multi-index ``k`` or interior index ``k``."""
        if np.ndim(k) == 0 and isinstance(k, (int, np.integer)):
            return float(self.values[int(k)])
        i = self.domain.index_of(k)
        return 0.0 if i is None else float(self.values[i])

    def _wrap(self, v):
        return GridFunction(self.domain, v)

    def _other(self, o):
        if isinstance(o, GridFunction):
            if o.domain is not self.domain:
                raise ConfigError("grid functions live on different domains")
            return o.values
        return o

    def __add__(self, o):
        return self._wrap(self.values + self._other(o))

    __radd__ = __add__

    def __sub__(self, o):
        return self._wrap(self.values - self._other(o))

    def __rsub__(self, o):
        return self._wrap(self._other(o) - self.values)

    def __mul__(self, c):
        return self._wrap(self.values * self._other(c))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self._wrap(self.values / c)

    def __neg__(self):
        return self._wrap(-self.values)

    def is_zero(self):
        return not np.any(self.values)

    def to_csv(self, path):
        names = ["x", "y"][: self.domain.N]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["value"])
            for p, v in zip(self.domain.interior, self.values):
                w.writerow([repr(float(c)) for c in p] + [repr(float(v))])

    @classmethod
    def from_csv(cls, domain, path):
        """Read ``x[,y],value`` rows; nodes must match interior nodes (missing ones are 0)."""
        vals = np.zeros(domain.n)
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if len(header) != domain.N + 1:
                raise ConfigError(f"CSV needs {domain.N} coordinate columns and a value column")
            for row in r:
                if not row:
                    continue
                p = np.array([float(c) for c in row[: domain.N]])
                k = np.rint((p - domain.lo) / domain.h - 0.5).astype(int)
                if np.max(np.abs(domain.point(k) - p)) > 1e-6 * domain.h:
                    raise ConfigError(f"CSV point {p.tolist()} is not a grid node")
                i = domain.index_of(k)
                if i is None:
                    raise ConfigError(f"CSV point {p.tolist()} is not an interior node")
                vals[i] = float(row[domain.N])
        return cls(domain, vals)


def _values(u, domain=None):
    if isinstance(u, GridFunction):
        if domain is not None and u.domain is not domain:
            raise ConfigError("grid function and quadrature live on different domains")
        return u.values
    v = np.asarray(u, dtype=float)
    if domain is not None and v.shape != (domain.n,):
        raise ConfigError(f"expected {domain.n} nodal values, got shape {v.shape}")
    return v


class KernelQuadrature:
    """Pair list and weights for the measure dx dy / |x - y|^N.

    The extended node set is the bounding-box lattice widened by ``collar`` cells
    on every side; ``collar="auto"`` uses the domain diameter in cells.  With
    ``collar=0`` only interior nodes are used, which gives the double integral
    over the domain times itself.  Extended index: interior nodes first.
    """

    def __init__(self, domain, s, collar="auto"):
        s = float(s)
        if not (0 < s < 1):
            raise ConfigError(f"fractional order must lie in (0, 1), got s={s}")
        if collar == "auto":
            collar = int(math.ceil(domain.diameter / domain.h - 1e-9))
        collar = int(collar)
        if collar < 0:
            raise ConfigError("collar must be >= 0")
        self.domain = domain
        self.s = s
        self.collar = collar
        N, h = domain.N, domain.h
        if collar == 0:
            ext_idx = domain.interior_index
        else:
            rng = [np.arange(-collar, c + collar) for c in domain.shape]
            full = np.stack(np.meshgrid(*rng, indexing="ij"), -1).reshape(-1, N)
            inside = np.zeros(len(full), dtype=bool)
            lat = full
            ok = np.all((lat >= 0) & (lat < np.array(domain.shape)), axis=1)
            flat_shape = np.array(domain.shape)
            lin = np.zeros(len(full), dtype=int)
            for a in range(N):
                lin = lin * flat_shape[a] + np.clip(lat[:, a], 0, flat_shape[a] - 1)
            inside[ok] = domain.mask[lin[ok]]
            ext_idx = np.concatenate([domain.interior_index, full[~inside]])
        self.ext_index = ext_idx
        self.points = domain.lo + (ext_idx + 0.5) * h
        self.n_ext = len(ext_idx)
        n = domain.n
        Is, Js = [], []
        for i in range(n):
            j = np.arange(i + 1, self.n_ext)
            Is.append(np.full(j.size, i))
            Js.append(j)
        self.I = np.concatenate(Is) if Is else np.zeros(0, int)
        self.J = np.concatenate(Js) if Js else np.zeros(0, int)
        diff = self.points[self.I] - self.points[self.J]
        self.r = np.sqrt(np.sum(diff * diff, axis=1))
        self.w = h ** (2 * N) / self.r**N
        self.rs = self.r**s
        self.radius = (collar + 0.5) * h
        self._bound = {}

    @property
    def pairs(self):
        return self.I.size

    def bound(self, fam):
        """Family bound at every stored pair (cached)."""
        key = id(fam)
        hit = self._bound.get(key)
        if hit is None or hit[0] is not fam:
            hit = (fam, fam.bind(self.points[self.I], self.points[self.J]))
            self._bound[key] = hit
        return hit[1]

    def extend(self, u):
        v = _values(u, self.domain)
        U = np.zeros(self.n_ext)
        U[: self.domain.n] = v
        return U

    def quotient(self, u):
        """D_s u on every stored pair."""
        U = self.extend(u)
        return (U[self.I] - U[self.J]) / self.rs

    def to_dict(self):
        return {"s": self.s, "collar": self.collar, "pairs": int(self.pairs)}


def ds_quotient(u, i, j, s):
    """(u(x_i) - u(x_j)) / |x_i - x_j|^s with exterior values 0.

    ``i`` and ``j`` are interior indices (int) or lattice multi-indices (tuples),
    which may lie outside the domain.
    """
    d = u.domain

    def resolve(k):
        if isinstance(k, (int, np.integer)):
            if not 0 <= k < d.n:
                raise DomainError(f"interior index {k} out of range")
            return d.interior_index[int(k)]
        return np.atleast_1d(np.asarray(k, dtype=int))

    ki, kj = resolve(i), resolve(j)
    if np.array_equal(ki, kj):
        raise DomainError("difference quotient needs two distinct nodes")
    r = float(np.linalg.norm((ki - kj) * d.h))
    return (u.at(tuple(ki)) - u.at(tuple(kj))) / r**s


def modular_terms(u, fam, quad):
    """Per-pair contributions Phi(|D_s u|) w (one entry per stored pair)."""
    return quad.bound(fam).phi(np.abs(quad.quotient(u))) * quad.w


def modular_gagliardo(u, fam, quad):
    """Discrete modular: sum over ordered pairs of Phi_{x,y}(|D_s u|) w_xy."""
    return 2.0 * csum(modular_terms(u, fam, quad))


def modular_hat(u, fam, domain=None):
    """sum_i Phi_hat_{x_i}(|u_i|) h^N."""
    domain = domain or u.domain
    v = _values(u, domain)
    return csum(domain.hat_bound(fam).phi(np.abs(v))) * domain.cell_measure


def modular_hat_conjugate(u, fam, domain=None, depth=64):
    """sum_i of the conjugate of Phi_hat_{x_i} at |u_i|, times h^N."""
    domain = domain or u.domain
    v = _values(u, domain)
    val, _, _, _ = conjugate_array(domain.hat_bound(fam), np.abs(v), depth)
    return csum(val) * domain.cell_measure


_MODULARS = ("gagliardo", "hat", "hat-conjugate")


def _scaled_modular(v, modular, fam, quad, domain):
    """Return ``c -> modular(c * v)``, with the scale-independent work done once."""
    if modular == "gagliardo":
        if quad is None:
            raise ConfigError("the Gagliardo modular needs a quadrature")
        A = np.abs(quad.quotient(v))
        b = quad.bound(fam)
        w = quad.w
        return lambda c: 2.0 * csum(b.phi(A * c) * w)
    if modular == "hat":
        b = domain.hat_bound(fam)
        A = np.abs(v)
        return lambda c: csum(b.phi(A * c)) * domain.cell_measure
    if modular == "hat-conjugate":
        return lambda c: modular_hat_conjugate(v * c, fam, domain)
    raise ConfigError(f"unknown modular {modular!r}; expected one of {_MODULARS}")


def growth_pair(fam, modular):
    """Exponent pair governing the scaling of a modular."""
    if modular == "hat-conjugate":
        return fam.m / (fam.m - 1.0), fam.ell / (fam.ell - 1.0)
    return fam.ell, fam.m


@dataclass
class LuxemburgResult:
    value: float
    modular_at_value: float
    evaluations: int


def _luxemburg_core(M, a_exp, b_exp, tol, stats=None):
    """Root of M(1 / lam) = 1 for a scaled modular ``M(c) = modular(c u)``.

    The growth exponents turn one evaluation at lam = 1 into a bracket
    (falling back to doubling/halving), then Brent's method runs in log(lam).
    """
    count = [0]

    def f(mu):
        count[0] += 1
        return M(math.exp(-mu)) - 1.0

    J = f(0.0) + 1.0
    lo, hi = sorted((math.log(J) / a_exp, math.log(J) / b_exp))
    lo -= 1e-6 + 1e-9 * abs(lo)
    hi += 1e-6 + 1e-9 * abs(hi)
    flo, fhi = f(lo), f(hi)
    step = math.log(2.0)
    k = 0
    while flo < 0:
        lo -= step
        flo = f(lo)
        k += 1
        if k > 200:
            raise BracketOverflowError("no Luxemburg bracket found after 200 halvings")
    k = 0
    while fhi > 0:
        hi += step
        fhi = f(hi)
        k += 1
        if k > 200:
            raise BracketOverflowError("no Luxemburg bracket found after 200 doublings")
    if flo == 0:
        mu = lo
    elif fhi == 0:
        mu = hi
    else:
        mu = brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
    lam = math.exp(mu)
    val = M(1.0 / lam)
    if abs(val - 1.0) > tol:
        warnings.warn(
            f"Luxemburg root met |modular - 1| = {abs(val - 1.0):.2e} > tol {tol:.1e}",
            AccuracyWarning,
            stacklevel=3,
        )
    if stats is not None:
        stats["modular"] = val
        stats["evaluations"] = count[0] + 1
    return lam


def luxemburg_detail(u, modular="gagliardo", fam=None, quad=None, tol=1e-10, domain=None):
    """Luxemburg norm inf{lam > 0 : modular(u / lam) <= 1} with diagnostics."""
    if not tol > 0:
        raise DomainError("tol must be positive")
    if fam is None:
        raise ConfigError("a family is required")
    if domain is None:
        domain = quad.domain if quad is not None else u.domain
    v = _values(u, domain)
    if not np.any(v):
        return LuxemburgResult(0.0, 0.0, 0)
    # the norm is homogeneous: work with max|v| = 1 to avoid under/overflow
    c = float(np.max(np.abs(v)))
    M = _scaled_modular(v / c, modular, fam, quad, domain)
    stats = {}
    lam = _luxemburg_core(M, *growth_pair(fam, modular), tol, stats)
    return LuxemburgResult(lam * c, stats["modular"], stats["evaluations"])


def luxemburg(u, modular="gagliardo", fam=None, quad=None, tol=1e-10, domain=None):
    """Luxemburg (semi)norm of ``u`` for ``modular`` in {gagliardo, hat, hat-conjugate}."""
    return luxemburg_detail(u, modular, fam, quad, tol, domain).value


# ------------------------------------------------------------ Poincare constant


def sample_fields(domain, count, seed=0):
    """Deterministic mix of constants, bumps, oscillatory and random fields.

    Yields ``(label, values)``; the sequence for ``count`` is a prefix of the
    sequence for any larger count.
    """
    rng = np.random.default_rng(seed)
    x = domain.interior
    lo = domain.box[:, 0]
    span = domain.box[:, 1] - domain.box[:, 0]
    z = (x - lo) / span
    for k in range(count):
        kind = k % 4
        amp = 10.0 ** rng.uniform(-1.5, 1.5)
        if kind == 0:
            yield f"constant amp={amp:.4g}", np.full(domain.n, amp)
        elif kind == 1:
            c = rng.uniform(0.2, 0.8, domain.N)
            w = rng.uniform(0.1, 0.4)
            yield f"bump amp={amp:.4g}", amp * np.exp(-np.sum((z - c) ** 2, axis=1) / (2 * w * w))
        elif kind == 2:
            modes = rng.integers(1, 4, domain.N)
            yield f"sine modes={modes.tolist()} amp={amp:.4g}", amp * np.prod(np.sin(np.pi * modes * z), axis=1)
        else:
            yield f"gaussian amp={amp:.4g}", amp * rng.standard_normal(domain.n)


@dataclass
class PoincareEstimate:
    """Empirical lower bound for the best discrete Poincare constant."""

    value: float
    best_sample: str
    history: list = field(default_factory=list)
    label: str = "empirical estimate (lower bound on sampled fields)"

    def __float__(self):
        return self.value


def poincare_lambda1_estimate(domain, fam, quad, trials=32, seed=0, samples=None):
    """Max of modular_hat(u) / modular_gagliardo(u) over sampled fields.

    ``samples`` overrides the built-in sampler with an iterable of
    ``(label, values)``.  ``history`` is the running maximum.
    """
    if int(trials) < 1:
        raise DomainError("trials must be >= 1")
    it = samples if samples is not None else sample_fields(domain, int(trials), seed)
    best, label, hist = -math.inf, None, []
    for k, (name, v) in enumerate(it):
        if k >= trials:
            break
        if not np.any(v):
            continue
        r = modular_hat(v, fam, domain) / modular_gagliardo(v, fam, quad)
        if r > best:
            best, label = r, name
        hist.append(best)
    if label is None:
        raise DomainError("all Poincare samples are zero")
    return PoincareEstimate(float(best), label, hist)
