"""Patch-local Galerkin assembly for the Poisson problem.

Physical stiffness matrices are assembled by Gauss quadrature of the pulled
back Laplace form; the parameter-domain operators keep their Kronecker
structure and are only used by the preconditioners.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import GeometryError, MultiPatch, PatchDofs
from .linalg import kron_sum_apply
from .splines import SplineSpace1D, assemble_1d

# element-matrix chunk budget (floats)
_CHUNK = 6_000_000


@dataclass(eq=False)
class LocalSystem:
    A: sp.csr_matrix
    f: np.ndarray
    dofs: PatchDofs


def _geometry_factors(geo, XI, ETA, wx, wy):
    """Quadrature-weighted metric ``|det J| J^{-1} J^{-T}`` and ``|det J|``."""
    J = geo.jacobian(XI, ETA)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(det <= 0):
        raise GeometryError("nonpositive Jacobian determinant at a quadrature point")
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1] / det
    inv[..., 1, 1] = J[..., 0, 0] / det
    inv[..., 0, 1] = -J[..., 0, 1] / det
    inv[..., 1, 0] = -J[..., 1, 0] / det
    w = wx[:, :, None, None] * wy[None, None, :, :] * det
    G = np.einsum("...ik,...jk->...ij", inv, inv) * w[..., None, None]
    return G, w


def assemble_patch(geo, sx: SplineSpace1D, sy: SplineSpace1D, rhs=None, n_quad=None):
    """Assemble the untrimmed patch stiffness (band layout) and load vector.

    Returns ``(band, f)`` with ``band[i, j, di + p, dj + p]`` the entry coupling
    coefficient ``(i, j)`` with ``(i + di, j + dj)``.
    """
    ptx, wx, fx, Bx, dBx = sx.element_basis(n_quad)
    pty, wy, fy, By, dBy = sy.element_basis(n_quad)
    if np.any(fx != np.arange(fx.size)) or np.any(fy != np.arange(fy.size)):
        raise GeometryError("band assembly needs simple knots (first active == element)")
    px, py = sx.degree, sy.degree
    p1x, p1y = px + 1, py + 1
    Ex, qx = ptx.shape
    Ey, qy = pty.shape
    n0, n1 = sx.n, sy.n
    band = np.zeros((n0, n1, 2 * px + 1, 2 * py + 1))
    f = np.zeros((n0, n1))
    Yf = (By, dBy)

    per_row = Ey * p1x * p1x * p1y * p1y
    step = max(1, min(Ex, _CHUNK // max(per_row, 1)))
    for e0 in range(0, Ex, step):
        e1 = min(Ex, e0 + step)
        c = e1 - e0
        XI = ptx[e0:e1, :, None, None]
        ETA = pty[None, None, :, :]
        G, w = _geometry_factors(geo, XI, ETA, wx[e0:e1], wy)
        Xf = (dBx[e0:e1], Bx[e0:e1])
        Ael = np.zeros((c, p1x * p1x, Ey * p1y * p1y))
        for i in range(2):
            for j in range(2):
                T = np.einsum("exfy,fyb,fyd->exfbd", G[..., i, j], Yf[i], Yf[j],
                              optimize=True)
                P = Xf[i][:, :, :, None] * Xf[j][:, :, None, :]
                Ael += np.matmul(P.reshape(c, qx, -1).transpose(0, 2, 1),
                                 T.reshape(c, qx, -1))
        Ael = Ael.reshape(c, p1x, p1x, Ey, p1y, p1y)
        for a in range(p1x):
            for cc in range(p1x):
                blk = Ael[:, a, cc]
                for b in range(p1y):
                    for d in range(p1y):
                        band[e0 + a:e1 + a, b:b + Ey, cc - a + px, d - b + py] += blk[:, :, b, d]
        if rhs is not None:
            X = geo.eval(XI, ETA)
            F = w * rhs(X[..., 0], X[..., 1])
            R = np.einsum("exfy,exa,fyb->eafb", F, Bx[e0:e1], By, optimize=True)
            for a in range(p1x):
                for b in range(p1y):
                    f[e0 + a:e1 + a, b:b + Ey] += R[:, a, :, b]
    return band, f.ravel()


def band_to_csr(band: np.ndarray, dofs: PatchDofs | None = None) -> sp.csr_matrix:
    """Convert band layout to CSR; with ``dofs`` restrict to the trimmed grid."""
    n0, n1, w0, w1 = band.shape
    px, py = (w0 - 1) // 2, (w1 - 1) // 2
    I = np.arange(n0)[:, None, None, None]
    J = np.arange(n1)[None, :, None, None]
    DI = np.arange(-px, px + 1)[None, None, :, None]
    DJ = np.arange(-py, py + 1)[None, None, None, :]
    I2, J2 = I + DI, J + DJ
    valid = (I2 >= 0) & (I2 < n0) & (J2 >= 0) & (J2 < n1)
    I, J, I2, J2 = (np.broadcast_to(a, band.shape)[valid] for a in (I, J, I2, J2))
    vals = band[valid]
    if dofs is None:
        rows, cols, n = I * n1 + J, I2 * n1 + J2, n0 * n1
    else:
        rows, cols = dofs.local_index(I, J), dofs.local_index(I2, J2)
        keep = (rows >= 0) & (cols >= 0)
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        n = dofs.n
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    A.sort_indices()
    return A


def assemble_local(geo, spaces, rhs, dofs: PatchDofs) -> LocalSystem:
    sx, sy = spaces
    band, f = assemble_patch(geo, sx, sy, rhs)
    A = band_to_csr(band, dofs)
    A = (A + A.T) * 0.5
    A = A.tocsr()
    A.sort_indices()
    keep = np.setdiff1d(np.arange(sx.n * sy.n), dofs.dirichlet_full)
    return LocalSystem(A, f[keep], dofs)


@dataclass(eq=False)
class ParameterOperator:
    """Trimmed 1D factors of the parameter-domain stiffness and mass matrices.

    ``A_hat = Kx kron My + Mx kron Ky`` and ``M_hat = Mx kron My`` on the
    Dirichlet-free coefficient grid.
    """

    Kx: np.ndarray
    Mx: np.ndarray
    Ky: np.ndarray
    My: np.ndarray
    gamma: int
    K1x: np.ndarray  # untrimmed factors, kept for the interior block
    M1x: np.ndarray
    K1y: np.ndarray
    M1y: np.ndarray

    @property
    def shape(self):
        return self.Kx.shape[0], self.Ky.shape[0]

    @property
    def n(self):
        return self.Kx.shape[0] * self.Ky.shape[0]

    @property
    def e_h(self):
        return np.ones(self.n)

    def apply_A(self, x):
        return kron_sum_apply(self.Kx, self.Mx, self.Ky, self.My, x)

    def apply_M(self, x):
        return (self.Mx @ x.reshape(self.shape) @ self.My.T).ravel()

    def dense_A(self):
        return np.kron(self.Kx, self.My) + np.kron(self.Mx, self.Ky)

    def dense_M(self):
        return np.kron(self.Mx, self.My)

    def dense_AM(self):
        Me = self.dense_M() @ self.e_h
        return self.dense_A() + self.gamma * np.outer(Me, Me)

    def interior(self) -> "ParameterOperator":
        """Operator restricted to coefficients with vanishing trace."""
        if self.K1x.shape[0] <= 2 or self.K1y.shape[0] <= 2:
            raise ValueError("patch has no interior coefficients")
        s = slice(1, -1)
        return ParameterOperator(self.K1x[s, s], self.M1x[s, s], self.K1y[s, s],
                                 self.M1y[s, s], 0, self.K1x, self.M1x, self.K1y, self.M1y)


def parameter_operator(spaces, dirichlet_sides) -> ParameterOperator:
    sx, sy = spaces
    K1x, M1x = assemble_1d(sx)
    K1y, M1y = assemble_1d(sy)
    ds = set(dirichlet_sides)
    lx, hx = int(0 in ds), sx.n - int(1 in ds)
    ly, hy = int(2 in ds), sy.n - int(3 in ds)
    if hx - lx < 1 or hy - ly < 1:
        raise ValueError("trimming leaves an empty direction")
    gamma = 0 if ds else 1
    return ParameterOperator(K1x[lx:hx, lx:hx], M1x[lx:hx, lx:hx], K1y[ly:hy, ly:hy],
                             M1y[ly:hy, ly:hy], gamma, K1x, M1x, K1y, M1y)


# --- error norms --------------------------------------------------------------


def evaluate_patch(geo, spaces, coeffs_full, n_quad=None):
    """u_h, physical gradient, quadrature weights and points on a patch grid."""
    sx, sy = spaces
    nq = n_quad or max(sx.degree, sy.degree) + 3
    ptx, wx, fx, Bx, dBx = sx.element_basis(nq)
    pty, wy, fy, By, dBy = sy.element_basis(nq)
    Ex, p1x = fx.size, sx.degree + 1
    Ey, p1y = fy.size, sy.degree + 1
    C = coeffs_full.reshape(sx.n, sy.n)
    # gather element coefficient blocks (Ex, Ey, p1x, p1y)
    ia = fx[:, None] + np.arange(p1x)[None, :]
    jb = fy[:, None] + np.arange(p1y)[None, :]
    Ce = C[ia[:, None, :, None], jb[None, :, None, :]]
    u = np.einsum("efab,exa,fyb->exfy", Ce, Bx, By, optimize=True)
    gx = np.einsum("efab,exa,fyb->exfy", Ce, dBx, By, optimize=True)
    gy = np.einsum("efab,exa,fyb->exfy", Ce, Bx, dBy, optimize=True)
    XI, ETA = ptx[:, :, None, None], pty[None, None, :, :]
    J = geo.jacobian(XI, ETA)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    # physical gradient: J^{-T} (gx, gy)
    dx = (J[..., 1, 1] * gx - J[..., 1, 0] * gy) / det
    dy = (-J[..., 0, 1] * gx + J[..., 0, 0] * gy) / det
    w = wx[:, :, None, None] * wy[None, None, :, :] * np.abs(det)
    X = geo.eval(XI, ETA)
    return u, np.stack([dx, dy], -1), w, X


def h1_l2_error(mp: MultiPatch, spaces, coeffs_full, u_exact, grad_exact):
    """Absolute L2 error and H1 seminorm error summed over patches."""
    l2 = h1 = 0.0
    for pt, spc, c in zip(mp.patches, spaces, coeffs_full):
        u, g, w, X = evaluate_patch(pt.geo, spc, c)
        ue = u_exact(X[..., 0], X[..., 1])
        ge = grad_exact(X[..., 0], X[..., 1])
        l2 += float(np.sum(w * (u - ue) ** 2))
        h1 += float(np.sum(w * ((g[..., 0] - ge[0]) ** 2 + (g[..., 1] - ge[1]) ** 2)))
    return np.sqrt(l2), np.sqrt(h1)


# --- monolithic conforming system -------------------------------------------


def global_numbering(mp: MultiPatch, dofs: list[PatchDofs]):
    """Map each patch's trimmed coefficients to conforming global indices.

    Pinned corner coefficients (boundary values kept in the trimmed grid) map
    to -1.
    """
    offsets = np.concatenate([[0], np.cumsum([d.n for d in dofs])])
    parent = np.arange(offsets[-1])
    pinned = np.zeros(offsets[-1], bool)
    for k, d in enumerate(dofs):
        pinned[offsets[k] + d.pinned] = True

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    for itf in mp.topology.interfaces:
        da, db = dofs[itf.patch_a], dofs[itf.patch_b]
        la = da.local_index(*da.side_full(itf.side_a))
        lb = db.local_index(*db.side_full(itf.side_b))
        if la.size != lb.size:
            raise GeometryError("non-matching interface discretization")
        if itf.reversed:
            lb = lb[::-1]
        odd = (la < 0) != (lb < 0)
        free_odd = np.concatenate([la[odd & (la >= 0)] + offsets[itf.patch_a],
                                   lb[odd & (lb >= 0)] + offsets[itf.patch_b]])
        if not np.all(pinned[free_odd]):
            raise GeometryError("Dirichlet status differs across an interface")
        both = (la >= 0) & (lb >= 0)
        for a, b in zip(la[both] + offsets[itf.patch_a], lb[both] + offsets[itf.patch_b]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(offsets[-1])])
    # a class containing a pinned corner is a boundary value
    pinned_roots = np.unique(roots[pinned])
    drop = np.isin(roots, pinned_roots)
    uniq, glob = np.unique(roots[~drop], return_inverse=True)
    g = np.full(offsets[-1], -1)
    g[~drop] = glob
    return [g[offsets[k]:offsets[k + 1]] for k in range(len(dofs))], uniq.size


def assemble_global(locals_: list[LocalSystem], maps, n_global):
    rows, cols, vals = [], [], []
    f = np.zeros(n_global)
    for ls, g in zip(locals_, maps):
        A = ls.A.tocoo()
        keep = (g[A.row] >= 0) & (g[A.col] >= 0)
        rows.append(g[A.row[keep]])
        cols.append(g[A.col[keep]])
        vals.append(A.data[keep])
        np.add.at(f, g[g >= 0], ls.f[g >= 0])
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_global, n_global))
    return A, f
