"""Low-level numerical helpers: compensated sums, quadrature nodes, monotone inversion."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

# The partition count is fixed so that results never depend on the worker count.
_PARTITIONS = 8
_workers = None


def set_threads(n):
    """Cap the number of worker threads used by partitioned reductions."""
    global _workers
    _workers = None if n is None else max(1, int(n))


def threads():
    if _workers is not None:
        return _workers
    env = os.environ.get("MFS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _cascade(x):
    """Pairwise summation with error-free TwoSum at every level.

    Returns the leading sum followed by the per-level rounding errors; their
    exact total equals the exact sum up to second-order terms (n eps^2).
    """
    out = []
    while x.size > 1:
        if x.size % 2:
            x = np.append(x, 0.0)
        a, b = x[0::2], x[1::2]
        s = a + b
        bb = s - a
        out.append(float(((a - (s - bb)) + (b - bb)).sum()))
        x = s
    out.append(float(x[0]) if x.size else 0.0)
    return out


def csum(x):
    """Compensated sum with an error bound essentially independent of the term count.

    The input is cut into a fixed number of contiguous partitions, each reduced by
    a cascaded TwoSum pairwise sum; partial sums and error terms are merged with
    ``math.fsum`` in partition order, so the result is bit-identical for any
    thread count.
    """
    x = np.ascontiguousarray(x, dtype=float).ravel()
    if x.size <= 4096:
        return math.fsum(x.tolist())
    parts = np.array_split(x, _PARTITIONS)
    nthreads = threads()
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            partials = list(pool.map(_cascade, parts))
    else:
        partials = [_cascade(p) for p in parts]
    return math.fsum(v for p in partials for v in p)


_GL_CACHE = {}


def gauss_legendre(n):
    """Nodes and weights on [0, 1]."""
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


def invert_increasing(fun, target, lo, hi, iters=200, rtol=4e-16):
    """Vectorised log-space bisection for ``fun(t) = target`` with ``t`` in ``[lo, hi]``.

    ``fun`` must be strictly increasing and positive on the bracket, and the bracket
    must satisfy ``fun(lo) <= target <= fun(hi)`` elementwise.
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    for _ in range(iters):
        mid = np.sqrt(lo * hi)
        # geometric midpoint stalls once lo and hi are adjacent floats
        mid = np.where((hi - lo) <= rtol * hi, hi, mid)
        below = fun(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all((hi - lo) <= rtol * hi):
            break
    return 0.5 * (lo + hi)
