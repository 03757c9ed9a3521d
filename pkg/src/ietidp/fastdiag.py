"""Fast diagonalization solvers for parameter-domain patch operators.

With per-direction generalized eigendecompositions ``K U = M U diag(d)``,
``U^T M U = I``, the operator ``K_x kron M_y + M_x kron K_y`` becomes
``diag(d_x[i] + d_y[j])`` in the coordinates ``U_x kron U_y``.  The rank-one
term ``gamma M e e^T M`` that makes floating patches invertible is diagonal
in the same coordinates, because ``e`` spans the kernel of the untrimmed 1D
stiffness matrices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import ParameterOperator
from .linalg import generalized_sym_eig

ZERO_EIG = 1e-12
SUPPORT_TOL = 1e-8


@dataclass(eq=False)
class FdSolver:
    Ux: np.ndarray
    dx: np.ndarray
    Uy: np.ndarray
    dy: np.ndarray
    gamma: int
    w: np.ndarray        # (U_x^T M_x e) kron (U_y^T M_y e), as an nx x ny array
    dtilde: np.ndarray   # corrected diagonal, nx x ny
    woodbury: tuple | None = None

    @property
    def shape(self):
        return self.Ux.shape[0], self.Uy.shape[0]

    def apply(self, rhs: np.ndarray) -> np.ndarray:
        return fd_apply(self, rhs)


def build_fd(po: ParameterOperator) -> FdSolver:
    Ux, dx = generalized_sym_eig(po.Kx, po.Mx)
    Uy, dy = generalized_sym_eig(po.Ky, po.My)
    D = dx[:, None] + dy[None, :]
    wx = Ux.T @ (po.Mx @ np.ones(po.Mx.shape[0]))
    wy = Uy.T @ (po.My @ np.ones(po.My.shape[0]))
    W = np.outer(wx, wy)
    woodbury = None
    if po.gamma == 0:
        dtilde = D.copy()
    else:
        scale = D.max()
        zero = np.abs(D) <= ZERO_EIG * scale
        off = np.abs(W[~zero]).max(initial=0.0)
        if zero.sum() == 1 and off <= SUPPORT_TOL:
            dtilde = D + po.gamma * W * W
        else:
            dtilde, woodbury = _woodbury_setup(D, W, po.gamma, zero)
    if np.any(dtilde <= 0) and woodbury is None:
        raise np.linalg.LinAlgError("corrected FD diagonal is not positive")
    return FdSolver(Ux, dx, Uy, dy, po.gamma, W, dtilde, woodbury)


def _woodbury_setup(D, W, gamma, zero):
    """Exact inverse of ``diag(D) + gamma w w^T`` when the diagonal update fails.

    A unit shift on the (near) zero eigenvalues makes the diagonal invertible;
    the shift is removed again through a low-rank Woodbury correction.
    """
    shift = zero.astype(float)
    dt = D + shift
    cols = [W.ravel()] + [np.eye(D.size)[i] for i in np.flatnonzero(zero.ravel())]
    Uc = np.stack(cols, axis=1)
    Cinv = np.diag([1.0 / gamma] + [-1.0] * int(zero.sum()))
    DiU = Uc / dt.ravel()[:, None]
    cap = Cinv + Uc.T @ DiU
    return dt, (DiU, np.linalg.inv(cap))


def fd_apply(fd: FdSolver, rhs: np.ndarray) -> np.ndarray:
    """``(U_x kron U_y) diag(dtilde)^{-1} (U_x kron U_y)^T rhs``."""
    nx, ny = fd.shape
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != nx * ny:
        raise ValueError(f"rhs of length {rhs.shape[0]} does not match {nx}x{ny}")
    if rhs.ndim == 2:
        return np.stack([fd_apply(fd, rhs[:, k]) for k in range(rhs.shape[1])], axis=1)
    Z = fd.Ux.T @ rhs.reshape(nx, ny) @ fd.Uy
    if fd.woodbury is None:
        Z = Z / fd.dtilde
    else:
        DiU, capinv = fd.woodbury
        z = Z.ravel() / fd.dtilde.ravel()
        z = z - DiU @ (capinv @ (DiU.T @ (Z.ravel())))
        Z = z.reshape(nx, ny)
    return (fd.Ux @ Z @ fd.Uy.T).ravel()


def build_interior_fd(po: ParameterOperator) -> FdSolver:
    """FD solver for the block of coefficients with vanishing trace."""
    return build_fd(po.interior())
