"""Small linear-algebra kernels: generalized eigenproblems, factorizations,
Kronecker products."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class DecompositionError(np.linalg.LinAlgError):
    pass


def generalized_sym_eig(K: np.ndarray, M: np.ndarray):
    """Solve ``K U = M U diag(d)`` with ``U^T M U = I``, d ascending."""
    K = np.asarray(K, dtype=float)
    M = np.asarray(M, dtype=float)
    if K.shape != M.shape or K.shape[0] != K.shape[1]:
        raise DecompositionError("K and M must be square and of equal shape")
    try:
        sla.cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError("mass matrix is not positive definite") from exc
    d, U = sla.eigh(K, M)
    return U, d


class Factorization:
    """Solve handle for a square nonsingular matrix."""

    def __init__(self, A, symmetric_indefinite: bool = False):
        self.shape = A.shape
        if A.shape[0] != A.shape[1]:
            raise DecompositionError("matrix must be square")
        self.symmetric_indefinite = symmetric_indefinite
        if sp.issparse(A):
            A = sp.csc_matrix(A)
            try:
                # minimum degree on A^T + A: far less fill than COLAMD for
                # the structurally symmetric patch matrices
                self._lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise DecompositionError(str(exc)) from exc
            self._solve = self._lu.solve
            self.nnz = self._lu.nnz
        else:
            A = np.asarray(A, dtype=float)
            lu, piv = sla.lu_factor(A, check_finite=True)
            if np.any(np.abs(np.diag(lu)) <= 1e-14 * max(1.0, np.abs(lu).max())):
                raise DecompositionError("numerically singular pivot")
            self._solve = lambda b: sla.lu_solve((lu, piv), b)
            self.nnz = lu.size

    def solve(self, b):
        return self._solve(np.asarray(b, dtype=float))


def factorize(A, symmetric_indefinite: bool = False) -> Factorization:
    return Factorization(A, symmetric_indefinite)


def kron_apply(A1: np.ndarray, A2: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``(A1 kron A2) x`` without forming the Kronecker product.

    ``x`` is read as an ``n1 x n2`` array in row-major order (index
    ``i1 * n2 + i2``), so the product is ``A1 X A2^T``.
    """
    n1, n2 = A1.shape[1], A2.shape[1]
    x = np.asarray(x)
    if x.shape[0] != n1 * n2:
        raise ValueError(f"vector of length {x.shape[0]} does not match {n1}x{n2}")
    if x.ndim == 1:
        return (A1 @ x.reshape(n1, n2) @ A2.T).ravel()
    tail = x.shape[1:]
    X = x.reshape(n1, n2, -1)
    Y = np.einsum("ia,abk,jb->ijk", A1, X, A2, optimize=True)
    return Y.reshape((A1.shape[0] * A2.shape[0],) + tail)


def kron_sum_apply(K1, M1, K2, M2, x):
    """``(K1 kron M2 + M1 kron K2) x``."""
    X = x.reshape(K1.shape[1], K2.shape[1])
    return (K1 @ X @ M2.T + M1 @ X @ K2.T).ravel()
