import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfs._numerics import csum, set_threads
from mfs.errors import ConfigError, DomainError
from mfs.grid import (
    GridDomain,
    GridFunction,
    KernelQuadrature,
    ds_quotient,
    luxemburg,
    luxemburg_detail,
    modular_gagliardo,
    modular_hat,
    modular_hat_conjugate,
    poincare_lambda1_estimate,
)
from mfs.nfunc import AnisotropicP, DoublePhase, LogPerturbed, xi_bounds


# ------------------------------------------------------------- summation


def test_csum_matches_fsum_on_cancelling_data():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(300_000) * 10.0 ** rng.integers(-8, 8, 300_000)
    x = np.concatenate([x, -x[:1000] * (1 + 1e-9)])
    assert csum(x) == pytest.approx(math.fsum(x), rel=1e-15, abs=1e-15 * np.sum(np.abs(x)) * 1e-3)


def test_csum_independent_of_threads():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(200_000)
    vals = []
    for k in (1, 2, 4, None):
        set_threads(k)
        vals.append(csum(x))
    set_threads(None)
    assert len(set(vals)) == 1


# --------------------------------------------------------------- domains


def test_unit_domain():
    d = GridDomain.unit(12)
    assert d.n == 144 and d.cell_measure == pytest.approx(1 / 144)
    assert np.all((d.interior > 0) & (d.interior < 1))


def test_polygon_domain():
    tri = [(0, 0), (1, 0), (0, 1)]
    d = GridDomain([(0, 1), (0, 1)], 0.1, polygon=tri)
    # cell centres strictly below the diagonal
    assert d.n == 45
    assert np.all(d.interior.sum(axis=1) < 1)


def test_domain_errors():
    with pytest.raises(ConfigError):
        GridDomain([(0, 1), (0, 1)], 0.3)
    with pytest.raises(ConfigError):
        GridDomain([(0, 1)] * 3, 0.5)
    with pytest.raises(ConfigError):
        GridDomain([(0, 1), (0, 1)], 0.5, polygon=[(5, 5), (6, 5), (5, 6)])


def test_one_dimensional_domain_is_flagged():
    d = GridDomain.unit(16, N=1)
    assert d.N == 1 and d.extrapolated and d.n == 16


def test_gridfunction_csv_roundtrip(tmp_path, dom6):
    rng = np.random.default_rng(2)
    u = GridFunction(dom6, rng.standard_normal(dom6.n))
    p = tmp_path / "u.csv"
    u.to_csv(p)
    assert p.read_text().splitlines()[0] == "x,y,value"
    v = GridFunction.from_csv(dom6, p)
    assert np.array_equal(u.values, v.values)


def test_gridfunction_immutable_and_finite(dom6):
    u = GridFunction(dom6, np.ones(dom6.n))
    with pytest.raises(ValueError):
        u.values[0] = 3.0
    with pytest.raises(ConfigError):
        GridFunction(dom6, np.full(dom6.n, np.nan))


# --------------------------------------------------------------- quotient


def test_ds_quotient(dom6):
    c = GridFunction(dom6, np.full(dom6.n, 3.0))
    assert ds_quotient(c, 0, 7, 0.5) == 0.0
    e = np.zeros(dom6.n)
    i = dom6.index_of((0, 2))
    e[i] = 1.0
    u = GridFunction(dom6, e)
    # exterior neighbour one cell to the left
    assert ds_quotient(u, (0, 2), (-1, 2), 0.5) == pytest.approx(1 / math.sqrt(dom6.h), rel=1e-15)
    rng = np.random.default_rng(3)
    w = GridFunction(dom6, rng.standard_normal(dom6.n))
    assert ds_quotient(w, 3, 17, 0.3) == -ds_quotient(w, 17, 3, 0.3)
    with pytest.raises(DomainError):
        ds_quotient(w, 4, 4, 0.3)


# ---------------------------------------------------------------- modulars


def _brute_modular(u, fam, quad):
    # independent double loop over ordered pairs of the extended node set
    d = quad.domain
    U = np.zeros(quad.n_ext)
    U[: d.n] = u
    tot = []
    for i in range(d.n):
        for j in range(quad.n_ext):
            if i == j:
                continue
            r = np.linalg.norm(quad.points[i] - quad.points[j])
            D = abs(U[i] - U[j]) / r**quad.s
            phi = fam.bind(quad.points[i][None], quad.points[j][None]).phi(np.array([D]))[0]
            w = d.h ** (2 * d.N) / r**d.N
            tot.append(phi * w * (2 if j >= d.n else 1))
    return math.fsum(tot)


def test_modular_matches_brute_force():
    d = GridDomain.unit(4)
    q = KernelQuadrature(d, 0.3, collar=2)
    u = np.random.default_rng(4).standard_normal(d.n)
    fam = DoublePhase(2, 3)
    assert modular_gagliardo(u, fam, q) == pytest.approx(_brute_modular(u, fam, q), rel=1e-13)


def test_collar_zero_is_interior_only(dom6):
    q = KernelQuadrature(dom6, 0.25, collar=0)
    assert q.pairs == dom6.n * (dom6.n - 1) // 2
    assert np.all(q.w > 0)


def test_auto_collar(quad12):
    assert quad12.collar == 17
    assert quad12.pairs > 0 and np.all(q > 0 for q in (quad12.w.min(), quad12.r.min()))


def test_modular_basic_properties(families, quad6, dom6):
    rng = np.random.default_rng(5)
    for fam in families.values():
        assert modular_gagliardo(np.zeros(dom6.n), fam, quad6) == 0.0
        u, v = rng.standard_normal(dom6.n), rng.standard_normal(dom6.n)
        Ju, Jv = modular_gagliardo(u, fam, quad6), modular_gagliardo(v, fam, quad6)
        assert modular_gagliardo(0.5 * (u + v), fam, quad6) <= 0.5 * (Ju + Jv)
        lo, hi = xi_bounds("xi0", fam.ell, fam.m, 2.0)
        J2 = modular_gagliardo(2 * u, fam, quad6)
        assert lo * Ju * (1 - 1e-12) <= J2 <= hi * Ju * (1 + 1e-12)
        assert modular_gagliardo(np.full(dom6.n, 1.0), fam, quad6) > 0


def test_modular_hat(dom12):
    fam = AnisotropicP(2.0)
    assert modular_hat(np.zeros(dom12.n), fam, dom12) == 0.0
    assert modular_hat(np.ones(dom12.n), fam, dom12) == pytest.approx(1.0, rel=1e-14)
    rng = np.random.default_rng(6)
    u = rng.standard_normal(dom12.n)
    v = u * (1 + rng.random(dom12.n))
    f = LogPerturbed(2.0)
    assert modular_hat(u, f, dom12) <= modular_hat(v, f, dom12)


def test_modular_hat_conjugate_quadratic(dom6):
    # Phi = t^2 has conjugate t^2 / 4
    u = np.random.default_rng(7).standard_normal(dom6.n)
    ref = math.fsum(u**2 / 4) * dom6.cell_measure
    assert modular_hat_conjugate(u, AnisotropicP(2.0), dom6) == pytest.approx(ref, rel=1e-13)


# -------------------------------------------------------------- Luxemburg


def test_luxemburg_zero(quad6, dom6):
    assert luxemburg(np.zeros(dom6.n), "gagliardo", DoublePhase(2, 3), quad6) == 0.0


def test_luxemburg_hat_closed_form(dom12):
    fam = AnisotropicP(2.0)
    for c in (1e-3, 0.7, 42.0):
        assert luxemburg(np.full(dom12.n, -c), "hat", fam, domain=dom12) == pytest.approx(c, rel=1e-12)


def test_luxemburg_modular_at_root(families, quad6, dom6):
    rng = np.random.default_rng(8)
    for fam in families.values():
        for amp in (1e-3, 1.0, 1e3):
            u = amp * rng.standard_normal(dom6.n)
            r = luxemburg_detail(u, "gagliardo", fam, quad6)
            assert abs(modular_gagliardo(u / r.value, fam, quad6) - 1) <= 1e-10


def test_luxemburg_homogeneity_sandwich(quad6, dom6):
    fam = DoublePhase(2, 3)
    u = np.random.default_rng(9).standard_normal(dom6.n)
    lam = luxemburg(2 * u, "gagliardo", fam, quad6)
    J = modular_gagliardo(2 * u, fam, quad6)
    lo, hi = xi_bounds("xi0", fam.ell, fam.m, lam)
    assert lo * (1 - 1e-9) <= J <= hi * (1 + 1e-9)
    # a seminorm is absolutely homogeneous
    assert luxemburg(-3 * u, "gagliardo", AnisotropicP(2.0), quad6) == pytest.approx(
        3 * luxemburg(u, "gagliardo", AnisotropicP(2.0), quad6), rel=1e-12
    )


def test_luxemburg_bad_arguments(quad6, dom6):
    with pytest.raises(DomainError):
        luxemburg(np.ones(dom6.n), "gagliardo", DoublePhase(2, 3), quad6, tol=0)
    with pytest.raises(ConfigError):
        luxemburg(np.ones(dom6.n), "nope", DoublePhase(2, 3), quad6)


@settings(max_examples=40, deadline=None)
@given(scale=st.floats(1e-4, 1e4), seed=st.integers(0, 10_000))
def test_luxemburg_root_property(scale, seed):
    d, q = _small()
    fam = LogPerturbed(2.0)
    u = scale * np.random.default_rng(seed).standard_normal(d.n)
    lam = luxemburg(u, "gagliardo", fam, q)
    assert abs(modular_gagliardo(u / lam, fam, q) - 1) <= 1e-10


@functools.lru_cache(maxsize=1)
def _small():
    d = GridDomain.unit(5)
    return d, KernelQuadrature(d, 0.25, collar=0)


# ---------------------------------------------------------------- Poincare


def test_poincare_estimate(dom6, quad6):
    fam = DoublePhase(2, 3)
    est = poincare_lambda1_estimate(dom6, fam, quad6, trials=16)
    assert 0 < est.value < math.inf
    assert all(b >= a for a, b in zip(est.history, est.history[1:]))
    assert "estimate" in est.label


def test_poincare_zero_samples(dom6, quad6):
    with pytest.raises(DomainError):
        poincare_lambda1_estimate(dom6, DoublePhase(2, 3), quad6, trials=2, samples=[("z", np.zeros(dom6.n))] * 2)


def test_poincare_two_mesh_consistency():
    fam = DoublePhase(2, 3)
    ests = []
    for n in (8, 16):
        d = GridDomain.unit(n)
        q = KernelQuadrature(d, 0.25, collar=0)
        z = d.interior
        smooth = [
            ("sine", np.sin(np.pi * z[:, 0]) * np.sin(np.pi * z[:, 1])),
            ("bump", np.exp(-np.sum((z - 0.5) ** 2, axis=1) / 0.05)),
            ("sine2", 3 * np.sin(2 * np.pi * z[:, 0]) * np.sin(np.pi * z[:, 1])),
        ]
        ests.append(poincare_lambda1_estimate(d, fam, q, trials=3, samples=smooth).value)
    assert abs(ests[1] - ests[0]) <= 0.25 * ests[0]
