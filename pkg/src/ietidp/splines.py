"""One-dimensional B-spline spaces on (0, 1).

Open knot vectors with simple interior knots (maximum smoothness), vectorized
Cox-de Boor evaluation, Gauss-Legendre rules and the 1D mass and stiffness
matrices from which all tensor-product operators are built.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SplineError(ValueError):
    """Invalid spline parameters or evaluation request."""


@dataclass(frozen=True, eq=False)
class KnotVector:
    degree: int
    knots: np.ndarray

    def __post_init__(self):
        p, t = self.degree, np.asarray(self.knots, dtype=float)
        if p < 1:
            raise SplineError(f"degree must be >= 1, got {p}")
        if t.ndim != 1 or t.size < 2 * (p + 1):
            raise SplineError("knot vector too short for an open knot vector")
        if np.any(np.diff(t) < 0):
            raise SplineError("knots must be non-decreasing")
        if np.any(t[: p + 1] != 0.0) or np.any(t[-(p + 1):] != 1.0):
            raise SplineError("knot vector must be open on [0, 1]")
        inner = t[p + 1:-(p + 1)]
        if inner.size and (np.any(np.diff(inner) == 0) or inner[0] <= 0 or inner[-1] >= 1):
            raise SplineError("interior knots must be simple")
        t.setflags(write=False)
        object.__setattr__(self, "knots", t)

    @property
    def interior(self) -> np.ndarray:
        p = self.degree
        return self.knots[p + 1:-(p + 1)]


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class SplineSpace1D:
    kv: KnotVector
    level: int = 0
    breaks: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "breaks", np.unique(self.kv.knots))

    @property
    def degree(self) -> int:
        return self.kv.degree

    @property
    def knots(self) -> np.ndarray:
        return self.kv.knots

    @property
    def n(self) -> int:
        return self.kv.knots.size - self.kv.degree - 1

    @property
    def n_elements(self) -> int:
        return self.breaks.size - 1

    @property
    def h(self) -> float:
        return float(np.max(np.diff(self.breaks)))

    def eval_basis(self, x: float, deriv_order: int = 0):
        """Return ``(first_active, values)`` of the p+1 functions active at x."""
        if deriv_order not in (0, 1):
            raise SplineError("deriv_order must be 0 or 1")
        first, vals, ders = self.eval_many(np.array([x], dtype=float))
        out = vals if deriv_order == 0 else ders
        return int(first[0]), out[0]

    def span(self, x: np.ndarray) -> np.ndarray:
        p, n = self.degree, self.n
        mu = np.searchsorted(self.knots, x, side="right") - 1
        return np.clip(mu, p, n - 1)

    def eval_many(self, x):
        """Vectorized Cox-de Boor recursion.

        Returns ``(first, values, derivs)`` with ``values[m, a]`` the value of
        basis function ``first[m] + a`` at ``x[m]``.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < 0.0) or np.any(x > 1.0) or np.any(~np.isfinite(x)):
            raise SplineError("evaluation points must lie in [0, 1]")
        p, t = self.degree, self.knots
        mu = self.span(x)
        m = x.size
        N = np.zeros((m, p + 1))
        N[:, 0] = 1.0
        left = np.zeros((m, p + 1))
        right = np.zeros((m, p + 1))
        lower = None
        for j in range(1, p + 1):
            if j == p:
                lower = N[:, :p].copy()
            left[:, j] = x - t[mu + 1 - j]
            right[:, j] = t[mu + j] - x
            saved = np.zeros(m)
            for r in range(j):
                tmp = N[:, r] / (right[:, r + 1] + left[:, j - r])
                N[:, r] = saved + right[:, r + 1] * tmp
                saved = left[:, j - r] * tmp
            N[:, j] = saved
        if p == 1:
            lower = np.ones((m, 1))
        # degree p-1 functions mu-p+1..mu -> derivative of degree p functions
        D = np.zeros((m, p + 1))
        for a in range(p + 1):
            i = mu - p + a
            if a >= 1:
                D[:, a] += lower[:, a - 1] / (t[i + p] - t[i])
            if a <= p - 1:
                D[:, a] -= lower[:, a] / (t[i + p + 1] - t[i + 1])
        D *= p
        return mu - p, N, D

    def quadrature(self, n_points: int | None = None):
        """Per-element Gauss points and weights, shape ``(n_elements, q)``."""
        q = gauss_rule(n_points or self.degree + 1)
        a, b = self.breaks[:-1, None], self.breaks[1:, None]
        pts = 0.5 * (a + b) + 0.5 * (b - a) * q.nodes[None, :]
        wts = 0.5 * (b - a) * q.weights[None, :]
        return pts, wts

    def element_basis(self, n_points: int | None = None):
        """Basis values and derivatives at per-element Gauss points.

        Returns ``(pts, wts, first, vals, ders)``; ``first`` has one entry per
        element, ``vals``/``ders`` have shape ``(n_elements, q, p+1)``.
        """
        pts, wts = self.quadrature(n_points)
        E, q = pts.shape
        first, vals, ders = self.eval_many(pts.ravel())
        p1 = self.degree + 1
        first = first.reshape(E, q)[:, 0]
        return pts, wts, first, vals.reshape(E, q, p1), ders.reshape(E, q, p1)


def make_space(p: int, r: int, extra_inner: int = 0) -> SplineSpace1D:
    """Uniformly refined maximum-smoothness space of degree p at level r."""
    if int(p) != p or p < 1:
        raise SplineError(f"degree must be an integer >= 1, got {p}")
    if int(r) != r or r < 0:
        raise SplineError(f"refinement level must be an integer >= 0, got {r}")
    if extra_inner not in (0, 1):
        raise SplineError("extra_inner must be 0 or 1")
    n_el = (2 if extra_inner else 1) * 2**r
    inner = np.arange(1, n_el) / n_el  # dyadic, exact in binary floating point
    knots = np.concatenate([np.zeros(p + 1), inner, np.ones(p + 1)])
    return SplineSpace1D(KnotVector(int(p), knots), level=int(r))


def gauss_rule(n_points: int) -> QuadratureRule:
    if not 1 <= n_points <= 30:
        raise SplineError(f"number of Gauss points must be in [1, 30], got {n_points}")
    x, w = np.polynomial.legendre.leggauss(n_points)
    return QuadratureRule(x, w)


def assemble_1d(space: SplineSpace1D):
    """Dense 1D stiffness and mass matrices ``(K1, M1)`` over (0, 1)."""
    _, wts, first, vals, ders = space.element_basis()
    n, p1 = space.n, space.degree + 1
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    Ke = np.einsum("eq,eqa,eqb->eab", wts, ders, ders)
    Me = np.einsum("eq,eqa,eqb->eab", wts, vals, vals)
    for e, f0 in enumerate(first):
        K[f0:f0 + p1, f0:f0 + p1] += Ke[e]
        M[f0:f0 + p1, f0:f0 + p1] += Me[e]
    # exact symmetry; the element sums are symmetric up to roundoff already
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    return K, M


def trim(K: np.ndarray, M: np.ndarray, drop_left: bool = False, drop_right: bool = False):
    n = K.shape[0]
    lo, hi = int(bool(drop_left)), n - int(bool(drop_right))
    if hi - lo < 1:
        raise SplineError("trimming leaves an empty space")
    return K[lo:hi, lo:hi].copy(), M[lo:hi, lo:hi].copy()
