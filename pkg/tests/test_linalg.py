import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ietidp.linalg import (DecompositionError, factorize, generalized_sym_eig, kron_apply,
                           kron_sum_apply)

sizes = st.integers(min_value=1, max_value=7)


def spd(rng, n, shift=1.0):
    X = rng.standard_normal((n, n))
    return X @ X.T + shift * np.eye(n)


@given(sizes, st.integers(0, 2**32 - 1))
def test_generalized_eig(n, seed):
    rng = np.random.default_rng(seed)
    K = spd(rng, n, 0.0)  # semidefinite is fine for K
    M = spd(rng, n)
    U, d = generalized_sym_eig(K, M)
    assert np.allclose(U.T @ M @ U, np.eye(n), atol=1e-8)
    assert np.allclose(U.T @ K @ U, np.diag(d), atol=1e-8 * max(1, np.abs(d).max()))
    assert np.all(np.diff(d) >= -1e-12)


def test_generalized_eig_rejects_indefinite_mass():
    with pytest.raises(DecompositionError):
        generalized_sym_eig(np.eye(2), np.diag([1.0, -1.0]))
    with pytest.raises(DecompositionError):
        generalized_sym_eig(np.eye(2), np.eye(3))


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5),
       st.integers(0, 2**32 - 1))
def test_kron_apply(m1, n1, m2, n2, seed):
    rng = np.random.default_rng(seed)
    A1, A2 = rng.standard_normal((m1, n1)), rng.standard_normal((m2, n2))
    x = rng.standard_normal(n1 * n2)
    assert np.allclose(kron_apply(A1, A2, x), np.kron(A1, A2) @ x)
    X = rng.standard_normal((n1 * n2, 3))
    assert np.allclose(kron_apply(A1, A2, X), np.kron(A1, A2) @ X)


def test_kron_apply_shape_check():
    with pytest.raises(ValueError):
        kron_apply(np.eye(2), np.eye(3), np.ones(5))


def test_kron_sum_apply(rng):
    K1, M1 = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    K2, M2 = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
    x = rng.standard_normal(12)
    ref = (np.kron(K1, M2) + np.kron(M1, K2)) @ x
    assert np.allclose(kron_sum_apply(K1, M1, K2, M2, x), ref)


@pytest.mark.parametrize("sparse", [False, True])
def test_factorization_solves_indefinite(rng, sparse):
    n = 30
    A = spd(rng, n)
    C = np.zeros((2, n))
    C[0, 3] = C[1, 17] = 1.0
    aug = np.block([[A, C.T], [C, np.zeros((2, 2))]])
    mat = sp.csc_matrix(aug) if sparse else aug
    f = factorize(mat, symmetric_indefinite=True)
    b = rng.standard_normal(n + 2)
    assert np.allclose(aug @ f.solve(b), b)
    B = rng.standard_normal((n + 2, 3))
    assert np.allclose(aug @ f.solve(B), B)
    assert f.nnz > 0


def test_factorization_rejects_singular():
    with pytest.raises(DecompositionError):
        factorize(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(DecompositionError):
        factorize(sp.csc_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])))
    with pytest.raises(DecompositionError):
        factorize(np.ones((2, 3)))


@given(arrays(np.float64, (4,), elements=st.floats(-1e3, 1e3)))
def test_factorization_identity(b):
    assert np.allclose(factorize(sp.identity(4, format="csc")).solve(b), b)
