import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wadg.quadrature import triangle_quadrature
from wadg.reference import build_operators, orthonormal_basis_eval
from wadg.weighted import (SingularMassMatrixError, WeightedOps, conservation_correction,
                           corrected_inv_apply, solve_projection_triple)


def _duffy_rule(n):
    # independent collapsed rule from numpy's Gauss-Legendre nodes
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = np.meshgrid(x, x, indexing="ij")
    wa, wb = np.meshgrid(w, w, indexing="ij")
    r = 0.5 * (1 + a) * (1 - b) - 1
    s = b
    return np.column_stack([r.ravel(), s.ravel()]), (wa * wb * 0.5 * (1 - b)).ravel()


def _ops(N, degree, basis="modal"):
    return WeightedOps(build_operators(N), triangle_quadrature(degree), basis=basis)


@pytest.mark.parametrize("basis", ["modal", "nodal"])
def test_weighted_mass_against_fine_oracle(basis):
    N = 3
    ops = _ops(N, 2 * N + 1, basis)
    # weight is a degree-1 polynomial so degree 2N+1 integrates exactly
    w = lambda r, s: 2 + r - 0.5 * s
    rq, sq = ops.rule.r, ops.rule.s
    Mw = ops.weighted_mass(w(rq, sq)[None], np.array([1.0]))[0]
    pts, wts = _duffy_rule(21)
    V = orthonormal_basis_eval(N, pts)
    if basis == "nodal":
        V = V @ ops.ref.Vinv
    oracle = (V.T * (wts * w(pts[:, 0], pts[:, 1]))) @ V
    np.testing.assert_allclose(Mw, oracle, atol=1e-13)


def test_dense_and_matrix_free_agree():
    ops = _ops(4, 9, "nodal")
    rng = np.random.default_rng(1)
    K = 5
    wq = 1 + 0.5 * rng.random((K, len(ops.rule)))
    J = rng.uniform(0.1, 2, K)
    u = rng.standard_normal((K, ops.Np))
    Mw = ops.weighted_mass(wq, J)
    dense = np.linalg.solve(ops.mass(J), np.einsum("kij,kj->ki", Mw, u)[..., None])[..., 0]
    np.testing.assert_allclose(ops.apply_Tw(u, wq), dense, atol=1e-12)
    A = ops.adjusted_mass(wq, J)
    np.testing.assert_allclose(ops.adjusted_inv_apply(u, wq, J),
                               np.linalg.solve(A, u[..., None])[..., 0], atol=1e-10)


def test_tw_inverse_identity():
    ops = _ops(3, 7, "nodal")
    rng = np.random.default_rng(2)
    wq = 1 + rng.random((3, len(ops.rule)))
    J = np.array([0.5, 1.0, 2.0])
    u = rng.standard_normal((3, ops.Np))
    np.testing.assert_allclose(ops.apply_Tw(ops.apply_Tw_inv(u, wq, J), wq), u, atol=1e-12)


def test_constant_weight_reductions():
    ops = _ops(3, 7)
    wq = np.full((2, len(ops.rule)), 2.5)
    J = np.array([1.0, 0.3])
    u = np.random.default_rng(3).standard_normal((2, ops.Np))
    np.testing.assert_allclose(ops.apply_Tw(u, wq), 2.5 * u, atol=1e-13)
    np.testing.assert_allclose(ops.adjusted_mass(wq, J), ops.weighted_mass(wq, J), atol=1e-13)
    tri = solve_projection_triple(ops, u, wq, J)
    np.testing.assert_allclose(tri.u1, tri.u2, atol=1e-13)
    np.testing.assert_allclose(tri.u1, tri.u3, atol=1e-13)
    assert np.all(tri.correction.alpha == 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.floats(0.05, 1.0), st.integers(0, 10**6))
def test_norm_equivalence(N, amp, seed):
    ops = _ops(N, 2 * N + 2)
    rng = np.random.default_rng(seed)
    wq = 1 + amp * np.sin(3 * ops.rule.r + 2 * ops.rule.s + rng.random())[None]
    wmin, wmax = wq.min(), wq.max()
    J = np.array([1.0])
    Mw = ops.weighted_mass(wq, J)[0]
    A = ops.adjusted_mass(wq, J)[0]
    assert np.all(np.linalg.eigvalsh(Mw) > 0)
    assert np.all(np.linalg.eigvalsh(A) > 0)
    u = rng.standard_normal(ops.Np)
    m = u @ u
    # weighted norms bracketed by extreme weights (modal mass = identity)
    for G in (Mw, A):
        q = u @ G @ u
        assert wmin * m * (1 - 1e-12) <= q <= wmax * m * (1 + 1e-12)


def test_singular_weighted_mass_reported():
    ops = _ops(4, 6)  # 16 points for a 15-dimensional space, degenerate
    with pytest.raises(SingularMassMatrixError) as info:
        ops.weighted_mass(np.ones((1, len(ops.rule))), np.array([1.0]))
    assert info.value.element == 0


def _smooth_weight(ops, K, rng):
    r, s = ops.rule.r, ops.rule.s
    ph = rng.random((K, 1))
    return 1 / (1 + 0.5 * np.sin(np.pi * (r + ph)) * np.sin(np.pi * s))


def test_conservation_correction_restores_mean():
    ops = _ops(3, 7)
    rng = np.random.default_rng(4)
    K = 6
    wq = _smooth_weight(ops, K, rng)
    J = rng.uniform(0.2, 1.0, K)
    b = rng.standard_normal((K, ops.Np))
    tri = solve_projection_triple(ops, b, wq, J)
    Mw = ops.weighted_mass(wq, J)
    e = np.tile(ops.e, (K, 1))
    mean = lambda u: np.einsum("ki,kij,kj->k", e, Mw, u)
    assert np.abs(mean(tri.u1) - mean(tri.u3)).max() < 1e-13
    assert np.abs(mean(tri.u1) - mean(tri.u2)).max() > 1e-8
    # corrected operator reproduces constants exactly
    d = tri.correction
    A = ops.adjusted_mass(wq, J) + d.alpha[:, None, None] * np.einsum("ki,kj->kij", d.v, d.v)
    np.testing.assert_allclose(np.einsum("kij,kj->ki", A, e),
                               np.einsum("kij,kj->ki", Mw, e), atol=1e-13)


def test_sherman_morrison_matches_dense():
    ops = _ops(4, 9, "nodal")
    rng = np.random.default_rng(5)
    K = 4
    wq = _smooth_weight(ops, K, rng)
    J = rng.uniform(0.2, 1.0, K)
    d = conservation_correction(ops, wq, J)
    A = ops.adjusted_mass(wq, J) + d.alpha[:, None, None] * np.einsum("ki,kj->kij", d.v, d.v)
    b = rng.standard_normal((K, ops.Np))
    np.testing.assert_allclose(corrected_inv_apply(ops, b, wq, J, d),
                               np.linalg.solve(A, b[..., None])[..., 0], rtol=1e-9, atol=1e-11)
    # corrected Gram matrix stays symmetric positive definite
    assert np.all(np.linalg.eigvalsh(A) > 0)
