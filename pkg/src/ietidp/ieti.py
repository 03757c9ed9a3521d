"""Dual-primal tearing and interconnecting solvers for multi-patch IgA.

Three variants share the same system setup:

``mfd``
    MINRES on the dual-primal saddle point system, block-diagonal
    preconditioner with fast-diagonalization local solves, primal basis from
    preconditioned MINRES, parameter-domain scaled Dirichlet preconditioner.
``mlu``
    Same outer iteration, every local solve done with a sparse factorization
    of the constrained patch matrix ``[[A, C^T], [C, 0]]``.
``cglu``
    CG on the dual Schur complement system for the multipliers with the
    scaled Dirichlet preconditioner on physical Schur complements.
"""
from __future__ import annotations

import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .assembly import LocalSystem, ParameterOperator, assemble_local, parameter_operator
from .fastdiag import FdSolver, build_fd, build_interior_fd
from .geometry import DofClassification, MultiPatch, TopologyError, classify_dofs
from .krylov import LinearOperator, SolveReport, pcg, pminres
from .linalg import Factorization, factorize

VARIANTS = ("mfd", "mlu", "cglu")


def model_rhs(x, y):
    return 2.0 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y)


def model_solution(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def model_gradient(x, y):
    return (np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
            np.pi * np.sin(np.pi * x) * np.cos(np.pi * y))


class InnerSolveError(RuntimeError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class Stopwatch:
    """Accumulates wall time of repeated sections."""

    def __init__(self):
        self.total = 0.0
        self.calls = 0

    def __enter__(self):
        self._t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.total += time.perf_counter() - self._t
        self.calls += 1


# --- constraints and jumps ---------------------------------------------------


@dataclass(eq=False)
class Constraints:
    """Corner selection ``C^(k)`` and its local-to-global primal map."""

    primal: np.ndarray         # local (trimmed) indices of the selected coefficients
    primal_global: np.ndarray  # global primal id of each row, -1 for a pinned corner
    n: int

    @property
    def active(self) -> np.ndarray:
        """Rows that carry a global primal dof."""
        return self.primal_global >= 0

    def matrix(self) -> sp.csr_matrix:
        c = self.primal.size
        return sp.csr_matrix((np.ones(c), (np.arange(c), self.primal)), shape=(c, self.n))

    def R(self, n_primal: int) -> sp.csr_matrix:
        c = self.primal.size
        rows = np.flatnonzero(self.active)
        return sp.csr_matrix((np.ones(rows.size), (rows, self.primal_global[rows])),
                             shape=(c, n_primal))


def build_constraints(cls: DofClassification) -> list[Constraints]:
    return [Constraints(d.primal, d.primal_global, d.n) for d in cls.patches]


@dataclass(eq=False)
class JumpOperator:
    """Signed incidence ``B^(k)``: multiplier ``lam[k]`` couples local dof ``dof[k]``."""

    n_lambda: int
    lam: list[np.ndarray]
    dof: list[np.ndarray]
    sign: list[np.ndarray]
    sizes: list[int]

    def matrix(self, k: int) -> sp.csr_matrix:
        return sp.csr_matrix((self.sign[k], (self.lam[k], self.dof[k])),
                             shape=(self.n_lambda, self.sizes[k]))

    def apply(self, k, u):
        out = np.zeros(self.n_lambda)
        out[self.lam[k]] = self.sign[k] * u[self.dof[k]]
        return out

    def apply_T(self, k, lam):
        out = np.zeros(self.sizes[k])
        out[self.dof[k]] = self.sign[k] * lam[self.lam[k]]
        return out

    def multiplicity(self, k) -> np.ndarray:
        """Number of patches sharing each local dof (1 for uncoupled dofs)."""
        m = np.ones(self.sizes[k])
        np.add.at(m, self.dof[k], 1.0)
        return m


def build_jumps(mp: MultiPatch, cls: DofClassification) -> JumpOperator:
    K = mp.K
    lam = [[] for _ in range(K)]
    dof = [[] for _ in range(K)]
    sign = [[] for _ in range(K)]
    n_lambda = 0
    for itf in mp.topology.interfaces:
        da, db = cls.patches[itf.patch_a], cls.patches[itf.patch_b]
        la = da.local_index(*da.side_full(itf.side_a))
        lb = db.local_index(*db.side_full(itf.side_b))
        if la.size != lb.size:
            raise TopologyError(
                f"interface {itf.patch_a}/{itf.patch_b}: {la.size} vs {lb.size} coefficients")
        if itf.reversed:
            lb = lb[::-1]
        la, lb = la[1:-1], lb[1:-1]  # corners are primal or Dirichlet
        if np.any(la < 0) or np.any(lb < 0):
            raise TopologyError("interface coefficient marked Dirichlet")
        ids = n_lambda + np.arange(la.size)
        n_lambda += la.size
        lo, hi = sorted((itf.patch_a, itf.patch_b))
        for k, loc in ((itf.patch_a, la), (itf.patch_b, lb)):
            lam[k].append(ids)
            dof[k].append(loc)
            sign[k].append(np.full(la.size, 1.0 if k == lo else -1.0))

    def cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype)

    return JumpOperator(
        n_lambda,
        [cat(x, int) for x in lam],
        [cat(x, int) for x in dof],
        [cat(x, float) for x in sign],
        [d.n for d in cls.patches],
    )


# --- factorization cache ----------------------------------------------------

BYTES_PER_FACTOR_NNZ = 12  # float64 value plus int32 row index


def available_memory() -> int:
    """Currently available physical memory in bytes (0 if unknown)."""
    try:
        return os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return 0


class FactorCache:
    """Sparse factorizations, optionally shared between numerically equal matrices.

    Congruent patches carrying the same boundary conditions (for example the
    sectors of one ring of an annulus) produce matrices that agree up to
    rounding; with ``share=True`` they reuse one factorization.  ``budget``
    caps the total factor storage in bytes; exceeding it raises
    ``MemoryError`` before the next factorization is attempted.
    """

    def __init__(self, share: bool = False, budget: float | None = None, rtol: float = 1e-12):
        self.share = share
        self.budget = budget
        self.rtol = rtol
        self.bytes = 0
        self.largest = 0
        self.n_factorizations = 0
        self.n_reused = 0
        self._entries: dict[tuple, list] = {}
        self._lock = threading.Lock()

    def _key(self, M):
        return (M.shape, M.nnz, hash(M.indptr.tobytes()), hash(M.indices.tobytes()))

    def get(self, M, symmetric_indefinite=False) -> Factorization:
        M = sp.csc_matrix(M)
        M.sort_indices()
        key = self._key(M)
        if self.share:
            with self._lock:
                for data, fact in self._entries.get(key, []):
                    scale = np.abs(data).max()
                    if np.all(np.abs(data - M.data) <= self.rtol * scale):
                        self.n_reused += 1
                        return fact
        if self.budget is not None and self.bytes + self.largest > self.budget:
            raise MemoryError(
                f"factor storage {self.bytes / 2**30:.2f} GiB; next factorization "
                f"would exceed the budget of {self.budget / 2**30:.2f} GiB")
        fact = factorize(M, symmetric_indefinite=symmetric_indefinite)
        size = fact.nnz * BYTES_PER_FACTOR_NNZ
        with self._lock:
            self.bytes += size
            self.largest = max(self.largest, size)
            self.n_factorizations += 1
            if self.share:
                self._entries.setdefault(key, []).append((M.data.copy(), fact))
        return fact


# --- per-patch data ---------------------------------------------------------


@dataclass(eq=False)
class PatchBlock:
    k: int
    local: LocalSystem
    po: ParameterOperator
    con: Constraints
    delta: np.ndarray
    gamma_idx: np.ndarray
    interior: np.ndarray
    Psi: np.ndarray = None
    fd: FdSolver = None
    fd_int: FdSolver = None
    Sc_inv: np.ndarray = None        # (C A_M^{-1} C^T)^{-1}
    aug: Factorization = None        # [[A, C^T], [C, 0]]
    aug_M: Factorization = None      # bordered A + gamma m m^T (mlu 'projected')
    A_II: Factorization = None
    psi_reports: list = field(default_factory=list)

    @property
    def n(self):
        return self.local.A.shape[0]

    @property
    def c(self):
        return self.con.primal.size

    def apply_A_dd(self, u_d):
        """``A_dd u_d`` through the full local matrix (no stored submatrix)."""
        return (self.local.A @ self.embed(u_d))[self.delta]

    def embed(self, u_d):
        out = np.zeros(self.n)
        out[self.delta] = u_d
        return out


@dataclass
class Timings:
    assemble: float = 0.0
    psi: float = 0.0
    setup: float = 0.0
    apply: float = 0.0
    solve: float = 0.0
    total: float = 0.0


@dataclass(eq=False)
class IetiSolution:
    coeffs: list[np.ndarray]      # per patch, full tensor grid (Dirichlet zeros)
    local: list[np.ndarray]       # per patch, trimmed grid
    u_pi: np.ndarray
    lam: np.ndarray
    report: SolveReport
    timings: Timings


class IetiSystem:
    """Assembled multi-patch problem plus the local solvers of one variant."""

    def __init__(self, mp: MultiPatch, p: int, r: int, rhs=model_rhs, variant: str = "mfd",
                 psi_tol: float = 1e-8, psi_maxit: int = 2000, schur: str | None = None,
                 mlu_local: str = "augmented", threads: int = 1, stop: str = "l2",
                 share_factors: bool = False, memory_budget: float | None = None):
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if mlu_local not in ("augmented", "projected"):
            raise ValueError("mlu_local must be 'augmented' or 'projected'")
        self.mp, self.p, self.r, self.variant = mp, p, r, variant
        self.psi_tol, self.psi_maxit = psi_tol, psi_maxit
        self.schur = schur or ("param" if variant == "mfd" else "phys")
        if self.schur not in ("param", "phys"):
            raise ValueError("schur must be 'param' or 'phys'")
        self.mlu_local = mlu_local
        self.stop = stop
        self.threads = max(1, int(threads))
        self.factors = FactorCache(share_factors, memory_budget)
        self.timings = Timings()
        self.apply_clock = Stopwatch()
        t0 = time.perf_counter()

        self.spaces = mp.spaces(p, r)
        self.cls = classify_dofs(mp, self.spaces)
        self.n_pi = self.cls.n_primal
        self.jumps = build_jumps(mp, self.cls)
        self.n_lambda = self.jumps.n_lambda
        cons = build_constraints(self.cls)

        def setup_patch(k):
            d = self.cls.patches[k]
            loc = assemble_local(mp.patches[k].geo, self.spaces[k], rhs, d)
            po = parameter_operator(self.spaces[k], mp.dirichlet_sides(k))
            blk = PatchBlock(k, loc, po, cons[k], d.delta, d.gamma, d.interior)
            return blk

        self.blocks = self._map(setup_patch, range(mp.K))
        self.timings.assemble = time.perf_counter() - t0

        t1 = time.perf_counter()
        self._map(self._setup_local_solvers, self.blocks)
        self.timings.setup = time.perf_counter() - t1

        t2 = time.perf_counter()
        self._map(self._compute_psi, self.blocks)
        self.timings.psi = time.perf_counter() - t2

        self._assemble_primal()
        self.sizes = [b.delta.size for b in self.blocks]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)
        self.n_delta = int(self.offsets[-1])
        self.n_dofs = self.n_delta - self.n_lambda + self.n_pi
        self._Dinv = [1.0 / self.jumps.multiplicity(b.k)[b.gamma_idx] for b in self.blocks]
        self._gpos = []
        for b in self.blocks:
            pos = np.full(b.n, -1)
            pos[b.gamma_idx] = np.arange(b.gamma_idx.size)
            self._gpos.append(pos)

    # -- helpers --

    def _map(self, fn, items):
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return [fn(it) for it in items]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, items))

    def _setup_local_solvers(self, blk: PatchBlock):
        A, po = blk.local.A, blk.po
        if self.variant == "mfd" or self.schur == "param":
            blk.fd = build_fd(po)
            if blk.interior.size:
                blk.fd_int = build_interior_fd(po)
            if blk.c:
                E = np.zeros((blk.n, blk.c))
                E[blk.con.primal, np.arange(blk.c)] = 1.0
                S = blk.fd.apply(E)[blk.con.primal]
                blk.Sc_inv = np.linalg.inv(0.5 * (S + S.T))
        if self.variant in ("mlu", "cglu"):
            C = blk.con.matrix()
            aug = sp.bmat([[A, C.T], [C, None]], format="csc")
            blk.aug = self.factors.get(aug, symmetric_indefinite=True)
            if self.variant == "mlu" and self.mlu_local == "projected":
                m = po.apply_M(po.e_h)[:, None]
                g = po.gamma
                bord = sp.bmat([[A, sp.csr_matrix(m)],
                                [sp.csr_matrix(m.T), sp.csr_matrix([[-1.0 / g if g else -1.0]])]],
                               format="csc")
                if g:
                    blk.aug_M = self.factors.get(bord, symmetric_indefinite=True)
                else:
                    blk.aug_M = self.factors.get(A)
        if self.schur == "phys" and blk.interior.size:
            A_II = A[blk.interior][:, blk.interior]
            blk.A_II = self.factors.get(A_II)

    def _compute_psi(self, blk: PatchBlock):
        c, n = blk.c, blk.n
        if c == 0:
            blk.Psi = np.zeros((n, 0))
            return
        if self.variant == "mfd":
            A = blk.local.A
            prim = blk.con.primal

            def aug_apply(x):
                u, mu = x[:n], x[n:]
                y = A @ u
                y[prim] += mu
                return np.concatenate([y, u[prim]])

            def prec(x):
                return np.concatenate([blk.fd.apply(x[:n]), blk.Sc_inv @ x[n:]])

            Psi = np.zeros((n, c))
            for j in range(c):
                rhs = np.zeros(n + c)
                rhs[n + j] = 1.0
                x, rep = pminres(aug_apply, prec, rhs, tol=self.psi_tol,
                                 maxit=self.psi_maxit, stop="l2")
                blk.psi_reports.append(rep)
                if not rep.converged:
                    raise InnerSolveError(f"primal basis solve on patch {blk.k} failed", rep)
                Psi[:, j] = x[:n]
            blk.Psi = Psi
        else:
            rhs = np.zeros((n + c, c))
            rhs[n:, :] = np.eye(c)
            blk.Psi = blk.aug.solve(rhs)[:n]

    def _assemble_primal(self):
        n_pi, n_lam = self.n_pi, self.n_lambda
        A_pi = np.zeros((n_pi, n_pi))
        f_pi = np.zeros(n_pi)
        B_pi = np.zeros((n_lam, n_pi))
        for b in self.blocks:
            act = b.con.active
            if not act.any():
                continue
            g = b.con.primal_global[act]
            Psi = b.Psi[:, act]
            A_pi[np.ix_(g, g)] += Psi.T @ (b.local.A @ Psi)
            f_pi[g] += Psi.T @ b.local.f
            J = self.jumps
            for j in range(g.size):
                B_pi[:, g[j]] += J.apply(b.k, Psi[:, j])
        self.A_pi = 0.5 * (A_pi + A_pi.T)
        self.f_pi = f_pi
        self.B_pi = sp.csr_matrix(B_pi)
        self.A_pi_fact = sla.cho_factor(self.A_pi) if n_pi else None

    def solve_A_pi(self, x):
        if self.n_pi == 0:
            return np.zeros(0)
        return sla.cho_solve(self.A_pi_fact, x)

    # -- local solver applications (timed) --

    def local_delta_solve(self, blk: PatchBlock, g):
        """Delta-block preconditioner of one patch applied to ``g`` (delta coords)."""
        with self.apply_clock:
            gf = blk.embed(g)
            if self.variant == "mfd" or (self.variant == "mlu" and self.mlu_local == "projected"):
                prim = blk.con.primal
                t = gf.copy()
                if blk.c:
                    t[prim] -= blk.Psi.T @ gf          # Q^T
                v = blk.fd.apply(t) if self.variant == "mfd" else self._solve_AM(blk, t)
                if blk.c:
                    v = v - blk.Psi @ v[prim]          # Q
                return v[blk.delta]
            u = blk.aug.solve(np.concatenate([gf, np.zeros(blk.c)]))[:blk.n]
            return u[blk.delta]

    def _solve_AM(self, blk, t):
        if blk.po.gamma:
            return blk.aug_M.solve(np.concatenate([t, [0.0]]))[:blk.n]
        return blk.aug_M.solve(t)

    def exact_delta_solve(self, blk: PatchBlock, g):
        """``A_dd^{-1} g`` through the constrained factorization."""
        with self.apply_clock:
            gf = blk.embed(g)
            u = blk.aug.solve(np.concatenate([gf, np.zeros(blk.c)]))[:blk.n]
            return u[blk.delta]

    def schur_apply(self, blk: PatchBlock, x_g):
        """Interface Schur complement of one patch applied to ``x_g`` (Gamma coords)."""
        with self.apply_clock:
            xf = np.zeros(blk.n)
            xf[blk.gamma_idx] = x_g
            if self.schur == "param":
                Aop = blk.po.apply_A
                if blk.interior.size:
                    y = Aop(xf)
                    xf[blk.interior] = -blk.fd_int.apply(y[blk.interior])
            else:
                A = blk.local.A
                Aop = A.__matmul__
                if blk.interior.size:
                    y = A @ xf
                    xf[blk.interior] = -blk.A_II.solve(y[blk.interior])
            return Aop(xf)[blk.gamma_idx]

    # -- operators --

    def split(self, x):
        u = [x[self.offsets[k]:self.offsets[k + 1]] for k in range(len(self.blocks))]
        u_pi = x[self.n_delta:self.n_delta + self.n_pi]
        lam = x[self.n_delta + self.n_pi:]
        return u, u_pi, lam

    @property
    def n_saddle(self):
        return self.n_delta + self.n_pi + self.n_lambda

    def _B_d(self, blk, u_d):
        return self.jumps.apply(blk.k, blk.embed(u_d))

    def _B_dT(self, blk, lam):
        return self.jumps.apply_T(blk.k, lam)[blk.delta]

    def saddle_operator(self) -> LinearOperator:
        def mv(x):
            u, u_pi, lam = self.split(x)
            out = np.empty_like(x)
            jl = np.zeros(self.n_lambda)
            for blk, ud in zip(self.blocks, u):
                sl = slice(self.offsets[blk.k], self.offsets[blk.k + 1])
                out[sl] = blk.apply_A_dd(ud) + self._B_dT(blk, lam)
                jl += self._B_d(blk, ud)
            if self.n_pi:
                out[self.n_delta:self.n_delta + self.n_pi] = self.A_pi @ u_pi + self.B_pi.T @ lam
                jl += self.B_pi @ u_pi
            out[self.n_delta + self.n_pi:] = jl
            return out

        return LinearOperator(self.n_saddle, mv, symmetric=True)

    def saddle_rhs(self):
        parts = [b.local.f[b.delta] for b in self.blocks]
        return np.concatenate(parts + [self.f_pi, np.zeros(self.n_lambda)])

    def scaled_dirichlet(self) -> LinearOperator:
        """``B_Gamma D^{-1} S D^{-1} B_Gamma^T`` on the multiplier space."""
        J = self.jumps

        def mv(lam):
            out = np.zeros(self.n_lambda)
            for blk, Dinv, gpos in zip(self.blocks, self._Dinv, self._gpos):
                if J.lam[blk.k].size == 0:
                    continue
                x = np.zeros(blk.gamma_idx.size)
                x[gpos[J.dof[blk.k]]] = J.sign[blk.k] * lam[J.lam[blk.k]]
                y = self.schur_apply(blk, Dinv * x) * Dinv
                np.add.at(out, J.lam[blk.k], J.sign[blk.k] * y[gpos[J.dof[blk.k]]])
            return out

        return LinearOperator(self.n_lambda, mv, symmetric=True)

    def block_preconditioner(self) -> LinearOperator:
        msd = self.scaled_dirichlet()

        def mv(x):
            u, u_pi, lam = self.split(x)
            out = np.empty_like(x)
            for blk, ud in zip(self.blocks, u):
                out[self.offsets[blk.k]:self.offsets[blk.k + 1]] = self.local_delta_solve(blk, ud)
            out[self.n_delta:self.n_delta + self.n_pi] = self.solve_A_pi(u_pi)
            out[self.n_delta + self.n_pi:] = msd.matvec(lam)
            return out

        return LinearOperator(self.n_saddle, mv, symmetric=True)

    def dual_operator(self) -> LinearOperator:
        """``F = sum_k B_d A_dd^{-1} B_d^T + B_pi A_pi^{-1} B_pi^T``."""

        def mv(lam):
            out = np.zeros(self.n_lambda)
            for blk in self.blocks:
                if self.jumps.lam[blk.k].size == 0:
                    continue
                out += self._B_d(blk, self.exact_delta_solve(blk, self._B_dT(blk, lam)))
            if self.n_pi:
                out += self.B_pi @ self.solve_A_pi(self.B_pi.T @ lam)
            return out

        return LinearOperator(self.n_lambda, mv, symmetric=True)

    def dual_rhs(self):
        d = np.zeros(self.n_lambda)
        for blk in self.blocks:
            d += self._B_d(blk, self.exact_delta_solve(blk, blk.local.f[blk.delta]))
        if self.n_pi:
            d += self.B_pi @ self.solve_A_pi(self.f_pi)
        return d

    # -- solution --

    def reconstruct(self, u_d, u_pi):
        local, full = [], []
        for blk, ud in zip(self.blocks, u_d):
            u = blk.embed(ud)
            act = blk.con.active
            if act.any():
                u = u + blk.Psi[:, act] @ u_pi[blk.con.primal_global[act]]
            local.append(u)
            d = blk.local.dofs
            uf = np.zeros(d.n_full[0] * d.n_full[1])
            uf[d.full_index(np.arange(blk.n))] = u
            full.append(uf)
        return local, full

    def solve(self, tol: float = 1e-6, maxit: int = 5000) -> IetiSolution:
        t0 = time.perf_counter()
        self.apply_clock = Stopwatch()
        if self.n_lambda == 0 and self.n_pi == 0:
            # a single patch: nothing to tear
            u_d = []
            for blk in self.blocks:
                with self.apply_clock:
                    A_dd = blk.local.A[blk.delta][:, blk.delta]
                    u_d.append(factorize(sp.csc_matrix(A_dd)).solve(blk.local.f[blk.delta]))
            rep = SolveReport(iterations=0, residuals=[0.0], converged=True)
            u_pi, lam = np.zeros(0), np.zeros(0)
        elif self.variant in ("mfd", "mlu"):
            x, rep = pminres(self.saddle_operator(), self.block_preconditioner(),
                             self.saddle_rhs(), tol=tol, maxit=maxit, stop=self.stop)
            u_d, u_pi, lam = self.split(x)
        else:
            F = self.dual_operator()
            lam, rep = pcg(F, self.scaled_dirichlet(), self.dual_rhs(), tol=tol, maxit=maxit)
            u_pi = self.solve_A_pi(self.f_pi - self.B_pi.T @ lam) if self.n_pi else np.zeros(0)
            u_d = [self.exact_delta_solve(b, b.local.f[b.delta] - self._B_dT(b, lam))
                   for b in self.blocks]
        local, full = self.reconstruct(u_d, u_pi)
        self.timings.solve = time.perf_counter() - t0
        self.timings.apply = self.apply_clock.total
        self.timings.total = self.timings.psi + self.timings.setup + self.timings.solve
        return IetiSolution(full, local, u_pi, lam, rep, self.timings)


def solve(mp: MultiPatch, p: int, r: int, variant: str, tol: float = 1e-6, **kw):
    sys_ = IetiSystem(mp, p, r, variant=variant, **kw)
    return sys_, sys_.solve(tol=tol)


def solve_mfd(mp, p, r, **kw):
    return solve(mp, p, r, "mfd", **kw)


def solve_mlu(mp, p, r, **kw):
    return solve(mp, p, r, "mlu", **kw)


def solve_cglu(mp, p, r, **kw):
    return solve(mp, p, r, "cglu", **kw)


# --- consistency checks -------------------------------------------------------


class ConsistencyError(RuntimeError):
    pass


def interface_mismatch(mp: MultiPatch, spaces, coeffs, n_samples: int = 100):
    """Max |u_a - u_b| over sampled points of every interface."""
    from .geometry import side_params
    t = (np.arange(n_samples) + 0.5) / n_samples
    worst = 0.0
    for itf in mp.topology.interfaces:
        vals = []
        for k, s in ((itf.patch_a, itf.side_a), (itf.patch_b, itf.side_b)):
            sx, sy = spaces[k]
            tt = t[::-1] if (k == itf.patch_b and itf.reversed) else t
            xi, eta = side_params(s, tt)
            fx, vx, _ = sx.eval_many(xi)
            fy, vy, _ = sy.eval_many(eta)
            C = coeffs[k].reshape(sx.n, sy.n)
            ia = fx[:, None] + np.arange(sx.degree + 1)
            jb = fy[:, None] + np.arange(sy.degree + 1)
            Ce = C[ia[:, :, None], jb[:, None, :]]
            vals.append(np.einsum("mab,ma,mb->m", Ce, vx, vy))
        worst = max(worst, float(np.abs(vals[0] - vals[1]).max()))
    return worst


def reconstruct_and_check(system: IetiSystem, sol: IetiSolution, rel_tol: float = 1e-5):
    """Interface continuity and corner/primal consistency of a solution."""
    umax = max((float(np.abs(c).max()) for c in sol.coeffs), default=0.0)
    mis = interface_mismatch(system.mp, system.spaces, sol.coeffs)
    corner = 0.0
    for blk, u in zip(system.blocks, sol.local):
        if blk.c:
            g = blk.con.primal_global
            target = np.where(g >= 0, sol.u_pi[np.maximum(g, 0)] if sol.u_pi.size else 0.0, 0.0)
            corner = max(corner, float(np.abs(u[blk.con.primal] - target).max()))
    report = {"interface_mismatch": mis, "corner_mismatch": corner, "u_max": umax}
    if mis > rel_tol * max(umax, 1e-300) or corner > rel_tol * max(umax, 1e-300):
        raise ConsistencyError(f"solution is not continuous: {report}")
    return sol.coeffs, report
