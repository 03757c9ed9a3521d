"""Preconditioned CG and MINRES with relative-residual stopping.

Both solvers start from a zero initial guess and stop once
``||b - A x||_2 <= tol * ||b||_2``.  CG additionally returns an estimate of
the condition number of the preconditioned operator from the Lanczos
tridiagonal matrix built out of its step coefficients.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

REFRESH = 50
STOP_RULES = ("l2", "prec", "mixed")


class NotSPDError(ArithmeticError):
    pass


@dataclass
class SolveReport:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    converged: bool = False
    cond_est: float = float("nan")
    lambda_min: float = float("nan")
    lambda_max: float = float("nan")
    time: float = 0.0
    prec_residuals: list = field(default_factory=list)


@dataclass
class LinearOperator:
    n: int
    matvec: Callable[[np.ndarray], np.ndarray]
    symmetric: bool = True

    def __matmul__(self, x):
        return self.matvec(x)

    @property
    def shape(self):
        return (self.n, self.n)


def as_operator(A) -> Callable[[np.ndarray], np.ndarray]:
    if A is None:
        return lambda x: x.copy()
    if isinstance(A, LinearOperator):
        return A.matvec
    if callable(A) and not hasattr(A, "shape"):
        return A
    return lambda x: A @ x


def lanczos_extremes(alphas, betas):
    """Extreme eigenvalues of the CG Lanczos matrix."""
    k = len(alphas)
    if k == 0:
        return float("nan"), float("nan")
    a = np.asarray(alphas)
    b = np.asarray(betas[: k - 1])
    diag = 1.0 / a
    diag[1:] += b / a[:-1]
    off = np.sqrt(b) / a[:-1]
    ev = eigvalsh_tridiagonal(diag, off) if k > 1 else diag
    return float(ev.min()), float(ev.max())


def pcg(op, prec, b, tol=1e-6, maxit=5000):
    t0 = time.perf_counter()
    A, P = as_operator(op), as_operator(prec)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    rep = SolveReport()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        rep.converged = True
        rep.residuals.append(0.0)
        return x, rep
    r = b.copy()
    z = P(r)
    p = z.copy()
    rz = r @ z
    if rz <= 0:
        raise NotSPDError("preconditioner is not positive definite")
    alphas, betas = [], []
    rep.residuals.append(1.0)
    for it in range(1, maxit + 1):
        q = A(p)
        pq = p @ q
        if pq <= 0:
            raise NotSPDError("p^T A p <= 0 in CG")
        alpha = rz / pq
        x += alpha * p
        if it % REFRESH == 0:
            r = b - A(x)
        else:
            r -= alpha * q
        rel = np.linalg.norm(r) / bnorm
        rep.residuals.append(rel)
        alphas.append(alpha)
        rep.iterations = it
        if rel <= tol:
            rep.converged = True
            break
        z = P(r)
        rz_new = r @ z
        if rz_new <= 0:
            raise NotSPDError("preconditioner is not positive definite")
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    lo, hi = lanczos_extremes(alphas, betas)
    rep.lambda_min, rep.lambda_max = lo, hi
    rep.cond_est = hi / lo if lo > 0 else float("inf")
    rep.time = time.perf_counter() - t0
    return x, rep


def pminres(op, prec, b, tol=1e-6, maxit=5000, stop="l2"):
    """Preconditioned MINRES (Paige-Saunders recurrences).

    ``stop="l2"`` measures the true residual ``||b - A x||_2 / ||b||_2``,
    maintained by recurrence and refreshed every ``REFRESH`` steps;
    ``stop="prec"`` uses the preconditioned residual norm that MINRES
    minimizes, relative to its initial value; ``stop="mixed"`` divides that
    preconditioned norm by the l2 norm of ``b``.
    """
    if stop not in STOP_RULES:
        raise ValueError(f"stop must be one of {STOP_RULES}")
    t0 = time.perf_counter()
    A, M = as_operator(op), as_operator(prec)
    b = np.asarray(b, dtype=float)
    n = b.size
    x = np.zeros(n)
    rep = SolveReport()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        rep.converged = True
        rep.residuals.append(0.0)
        return x, rep

    r1 = b.copy()
    y = M(r1)
    beta1 = r1 @ y
    if beta1 < 0:
        raise NotSPDError("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)
    oldb, beta, dbar, epsln = 0.0, beta1, 0.0, 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    Aw = np.zeros(n)
    Aw2 = np.zeros(n)
    r2 = r1.copy()
    res = b.copy()  # true residual
    rep.residuals.append(1.0)
    rep.prec_residuals.append(1.0)

    for it in range(1, maxit + 1):
        s = 1.0 / beta
        v = s * y
        Av = A(v)
        y = Av.copy()
        if it >= 2:
            y -= (beta / oldb) * r1
        alfa = v @ y
        y -= (alfa / beta) * r2
        r1, r2 = r2, y
        y = M(r2)
        oldb = beta
        beta2 = r2 @ y
        if beta2 < 0:
            raise NotSPDError("preconditioner is not positive definite")
        beta = np.sqrt(beta2)
        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = np.hypot(gbar, beta)
        if gamma == 0.0:
            gamma = np.finfo(float).eps
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        Aw1, Aw2 = Aw2, Aw
        Aw = (Av - oldeps * Aw1 - delta * Aw2) / gamma
        x += phi * w
        if it % REFRESH == 0:
            res = b - A(x)
        else:
            res -= phi * Aw
        rel = np.linalg.norm(res) / bnorm
        rep.residuals.append(rel)
        rep.prec_residuals.append(phibar / beta1)
        rep.iterations = it
        crit = {"l2": rel, "prec": phibar / beta1, "mixed": phibar / bnorm}[stop]
        if crit <= tol:
            if stop == "l2":
                res = b - A(x)
                rel = np.linalg.norm(res) / bnorm
                rep.residuals[-1] = rel
                if rel > tol:
                    continue
            rep.converged = True
            break
        if beta == 0.0:
            # exact invariant subspace: x is the solution
            rep.converged = True
            break
    rep.time = time.perf_counter() - t0
    return x, rep


def solve_multi_rhs(solver, op, prec, B, tol=1e-6, **kw):
    """Column-by-column solves; returns ``(X, reports)``."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    X = np.zeros_like(B)
    reports = []
    for k in range(B.shape[1]):
        X[:, k], rep = solver(op, prec, B[:, k], tol=tol, **kw)
        reports.append(rep)
    return X, reports
