import math

import numpy as np
import pytest

from mfs.errors import ConfigError, DomainError
from mfs.grid import GridDomain, GridFunction, KernelQuadrature, luxemburg, modular_gagliardo
from mfs.nfunc import AnisotropicP, DoublePhase, LogPerturbed
from mfs.operator import (
    ProbeSet,
    apply_pointwise,
    derivative_pairing,
    gradient,
    hessian,
    monotonicity_gap,
    monotonicity_terms,
    splus_diagnostic,
)


def _uv(d, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(d.n), rng.standard_normal(d.n)


def test_pairing_at_zero(families, quad6, dom6):
    u, v = _uv(dom6)
    for fam in families.values():
        assert derivative_pairing(np.zeros(dom6.n), v, fam, quad6) == 0.0
        assert np.all(gradient(np.zeros(dom6.n), fam, quad6).values == 0)


def test_pairing_growth_bounds(families, quad6, dom6):
    for seed in range(5):
        u, _ = _uv(dom6, seed)
        u *= 10.0 ** (seed - 2)
        for fam in families.values():
            J = modular_gagliardo(u, fam, quad6)
            P = derivative_pairing(u, u, fam, quad6)
            assert fam.ell * J * (1 - 1e-12) <= P <= fam.m * J * (1 + 1e-12)


def test_pairing_central_difference_order_two(quad12, dom12):
    fam = DoublePhase(2, 3)
    u, v = _uv(dom12, 1)
    P = derivative_pairing(u, v, fam, quad12)
    errs = []
    for h in (1e-2, 1e-3, 1e-4):
        fd = (modular_gagliardo(u + h * v, fam, quad12) - modular_gagliardo(u - h * v, fam, quad12)) / (2 * h)
        errs.append(abs(fd - P))
    orders = [math.log10(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.8 <= o <= 2.2 for o in orders)


def test_gradient_consistency_and_sign(families, quad12, dom12):
    u, v = _uv(dom12, 2)
    for fam in families.values():
        g = gradient(u, fam, quad12)
        lhs = math.fsum(g.values * v) * dom12.cell_measure
        assert lhs == pytest.approx(derivative_pairing(u, v, fam, quad12), rel=1e-12)
        assert math.fsum(g.values * u) * dom12.cell_measure >= 0


def test_gradient_rejects_foreign_domain(quad6):
    other = GridDomain.unit(6)
    with pytest.raises(ConfigError):
        gradient(GridFunction(other, np.ones(other.n)), DoublePhase(2, 3), quad6)


def test_hessian_against_fd_of_gradient(quad6, dom6):
    fam = LogPerturbed(2.0)
    u, v = _uv(dom6, 3)
    H = hessian(u, fam, quad6)
    assert np.allclose(H, H.T, rtol=0, atol=1e-12 * np.abs(H).max())
    e = 1e-6
    fd = (gradient(u + e * v, fam, quad6).values - gradient(u - e * v, fam, quad6).values) / (2 * e)
    assert np.allclose(H @ v, fd, rtol=1e-6, atol=1e-6 * np.abs(fd).max())


def test_apply_pointwise(families, quad6, dom6):
    u, v = _uv(dom6, 4)
    fam = families["pxy"]
    assert apply_pointwise(np.zeros(dom6.n), 3, fam, quad6).value == 0.0
    a = apply_pointwise(u, 5, fam, quad6).value
    assert apply_pointwise(-u, 5, fam, quad6).value == pytest.approx(-a, rel=1e-14)
    acts = [apply_pointwise(u, k, fam, quad6) for k in range(dom6.n)]
    lhs = math.fsum(a.value * vk for a, vk in zip(acts, v)) * dom6.cell_measure
    budget = math.fsum(a.tail_bound * abs(vk) for a, vk in zip(acts, v)) * dom6.cell_measure
    assert abs(lhs - derivative_pairing(u, v, fam, quad6)) <= budget + 1e-10
    assert all(a.tail_bound > 0 for a in acts)


def test_apply_pointwise_errors(dom6):
    q0 = KernelQuadrature(dom6, 0.25, collar=0)
    with pytest.raises(DomainError):
        apply_pointwise(np.ones(dom6.n), 0, DoublePhase(2, 3), q0)
    q = KernelQuadrature(dom6, 0.25, collar=2)
    with pytest.raises(DomainError):
        apply_pointwise(np.ones(dom6.n), dom6.n, DoublePhase(2, 3), q)


def test_monotonicity(families, quad6, dom6):
    for seed in range(4):
        u, v = _uv(dom6, 10 + seed)
        for fam in families.values():
            assert monotonicity_gap(u, u, fam, quad6) == 0.0
            t, sc = monotonicity_terms(u, v, fam, quad6)
            assert np.all(t >= -1e-12 * sc)


def test_uniform_monotonicity_doublephase(quad6, dom6):
    fam = DoublePhase(2, 3)
    c = 4.0 ** (1 - fam.m) * fam.ell
    for seed in range(6):
        u, v = _uv(dom6, 20 + seed)
        u *= 10.0 ** (seed - 3)
        gap = monotonicity_gap(u, v, fam, quad6)
        assert gap >= c * modular_gagliardo(u - v, fam, quad6) * (1 - 1e-12)


def test_splus(quad6, dom6):
    fam = DoublePhase(2, 3)
    u, w = _uv(dom6, 30)
    same = splus_diagnostic([u] * 4, u, fam, quad6)
    assert all(a == 0 for a in same.a) and all(b == 0 for b in same.b) and same.holds
    seq = splus_diagnostic([u + w / n for n in range(1, 200)], u, fam, quad6)
    assert seq.holds
    assert abs(seq.a[-1]) < 1e-2 * abs(seq.a[0]) and seq.b[-1] < 1e-3 * seq.b[0]
    fixed = splus_diagnostic([u + w] * 3, u, fam, quad6)
    assert min(fixed.a) > 1.0
    with pytest.raises(DomainError):
        splus_diagnostic([], u, fam, quad6)


def test_probe_estimate_is_lower_bound_quadratic(dom6):
    # Phi = t^2: seminorm^2 = J, so the dual norm of g is sqrt(2 h^N g.H^-1.g)
    q = KernelQuadrature(dom6, 0.25, collar=2)
    fam = AnisotropicP(2.0)
    probes = ProbeSet(fam, q, n_random=8)
    for row in probes.directions[:: 7]:
        assert luxemburg(row, "gagliardo", fam, q) == pytest.approx(1.0, rel=1e-9)
    H = hessian(np.zeros(dom6.n), fam, q)
    rng = np.random.default_rng(31)
    for _ in range(5):
        g = rng.standard_normal(dom6.n)
        exact = math.sqrt(2 * dom6.cell_measure * g @ np.linalg.solve(H, g))
        est = probes.estimate(g)
        assert 0 < est <= exact * (1 + 1e-10)
    # for a unit probe v, J(v) = 1, so g = H v has dual norm exactly 2 and v attains it
    v = probes.directions[dom6.n]
    assert probes.estimate(H @ v) == pytest.approx(2.0, rel=1e-9)
