import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinkfield.errors import ConditioningError, DimensionError
from kinkfield.tensor import contract, dominant_eigenpair, eig_lowest, factorize_svd, lanczos_lowest


def test_contract_identity_returns_vector():
    v = np.array([1.0, -2.0, 3.5])
    assert np.array_equal(contract(np.eye(3), v, [(1, 0)]), v)


def test_contract_matches_triple_loop():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((2, 3)), rng.standard_normal((3, 4))
    ref = np.zeros((2, 4))
    for i in range(2):
        for j in range(4):
            for k in range(3):
                ref[i, j] += a[i, k] * b[k, j]
    assert np.allclose(contract(a, b, [(1, 0)]), ref, atol=1e-14)


def test_contract_empty_pairs_is_outer_product():
    out = contract(np.arange(2.0), np.arange(3.0), [])
    assert out.shape == (2, 3)
    assert np.array_equal(out, np.outer(np.arange(2.0), np.arange(3.0)))


def test_contract_extent_mismatch():
    with pytest.raises(DimensionError):
        contract(np.ones((2, 3)), np.ones((4, 2)), [(1, 0)])


def test_contract_rejects_duplicate_pairs():
    with pytest.raises(ValueError):
        contract(np.ones((2, 2)), np.ones((2, 2)), [(0, 0), (0, 1)])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_contract_agrees_with_einsum(p, q, r, s, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((p, q, r))
    b = rng.standard_normal((r, s, p))
    got = contract(a, b, [(2, 0), (0, 2)])
    assert np.allclose(got, np.einsum("pqr,rsp->qs", a, b), atol=1e-12)


def test_svd_identity():
    u, s, v, w = factorize_svd(np.eye(4), 1)
    assert np.allclose(s, 1.0) and w == 0.0


def test_svd_rank_one():
    u, v = np.array([1.0, 2.0, 2.0]), np.array([3.0, 4.0])
    _, s, _, w = factorize_svd(np.outer(u, v), 1, cutoff=1e-12)
    assert len(s) == 1
    assert s[0] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v), rel=1e-14)
    assert w < 1e-20


def test_svd_truncation_error_is_dropped_weight():
    a = np.random.default_rng(1).standard_normal((6, 6))
    u, s, v, w = factorize_svd(a, 1, max_rank=3)
    full = np.linalg.svd(a, compute_uv=False)
    err = np.linalg.norm(a - (u * s) @ v) ** 2
    assert err == pytest.approx(np.sum(full[3:] ** 2), rel=1e-10)
    assert w == pytest.approx(np.sum(full[3:] ** 2), rel=1e-10)


def test_svd_split_keeps_index_groups():
    a = np.random.default_rng(2).standard_normal((2, 3, 4, 5))
    u, s, v, _ = factorize_svd(a, 2)
    assert u.shape[:2] == (2, 3) and v.shape[1:] == (4, 5)
    assert np.allclose(np.tensordot(u * s, v, axes=(2, 0)), a, atol=1e-12)


def test_eig_lowest_diagonal():
    res = eig_lowest(np.diag([3.0, 1.0, 2.0]))
    assert res.eigenvalues[0] == pytest.approx(1.0)
    assert abs(abs(res.eigenvectors[1, 0]) - 1.0) < 1e-12


def test_eig_lowest_proportional_metric():
    res = eig_lowest(np.diag([2.0, 4.0]), np.diag([1.0, 2.0]), k=2)
    assert np.allclose(res.eigenvalues, 2.0)


def test_eig_lowest_singular_metric_raises():
    with pytest.raises(ConditioningError):
        eig_lowest(np.eye(2), np.diag([1.0, 0.0]))


def test_iterative_matches_dense():
    m = np.random.default_rng(3).standard_normal((8, 8))
    h = m + m.T
    dense = eig_lowest(h).eigenvalues[0]
    it = eig_lowest(h, mode="iterative", tol=1e-12)
    assert it.converged
    assert it.eigenvalues[0] == pytest.approx(dense, abs=1e-10)


def test_iterative_generalized_matches_dense():
    rng = np.random.default_rng(4)
    m = rng.standard_normal((10, 10))
    h = m + m.T
    q = rng.standard_normal((10, 10))
    n = q @ q.T + np.eye(10)
    dense = eig_lowest(h, n).eigenvalues[0]
    it = eig_lowest(lambda v: h @ v, n, mode="iterative", dim=10, tol=1e-12)
    assert it.eigenvalues[0] == pytest.approx(dense, abs=1e-9)


def test_lanczos_several_pairs():
    h = np.diag(np.arange(30, dtype=float))
    vals, vecs, ok = lanczos_lowest(lambda v: h @ v, 30, k=3, tol=1e-12)
    assert ok
    assert np.allclose(vals, [0, 1, 2], atol=1e-9)


def test_dominant_scaled_identity():
    val, left, right = dominant_eigenpair(lambda x: 2.0 * x, 5)
    assert val == pytest.approx(2.0)
    assert left @ right == pytest.approx(1.0)


def test_dominant_diagonal():
    m = np.diag([3.0, 1.0])
    val, left, right = dominant_eigenpair(lambda x: m @ x, 2)
    assert val == pytest.approx(3.0)
    assert abs(right[0]) == pytest.approx(1.0) and abs(right[1]) < 1e-14


@pytest.mark.parametrize("dim", [6, 500])
def test_dominant_positive_matrix_matches_dense(dim):
    rng = np.random.default_rng(dim)
    m = rng.uniform(0.1, 1.0, (dim, dim))
    vals, vecs = np.linalg.eig(m)
    i = np.argmax(abs(vals))
    val, left, right = dominant_eigenpair(lambda x: m @ x, dim, apply_left=lambda y: m.T @ y)
    assert val == pytest.approx(vals[i].real, rel=1e-10)
    assert np.allclose(m @ right, val * right, atol=1e-9 * abs(val))
    assert np.allclose(m.T @ left, val * left, atol=1e-9 * abs(val) * np.abs(left).max())
