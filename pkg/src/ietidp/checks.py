"""Invariant and oracle checks behind ``ieti verify``.

Every check returns a :class:`Check` record instead of raising, so a driver
can run the whole suite and report all failures at once.  The oracle for the
solvers is the conforming Galerkin system assembled over a global numbering
and solved with a sparse direct method.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import assemble_global, global_numbering
from .geometry import MultiPatch, get_domain
from .ieti import VARIANTS, IetiSystem, interface_mismatch
from .krylov import pminres
from .linalg import factorize

VERIFY_MAX_DOFS = 20_000
ORACLE_TOL = 1e-5
SOLVER_TOL = 1e-10

# (domain, p, r) configurations run by ``ieti verify`` without arguments
DEFAULT_SUITE = (
    ("square1x1", 2, 2),
    ("square2x2", 1, 1),
    ("square2x2", 3, 3),
    ("square4x4", 2, 2),
    ("lshape12", 2, 2),
    ("annulus32", 2, 2),
    ("footprint", 2, 1),
)


@dataclass
class Check:
    name: str
    passed: bool
    value: float = float("nan")
    tol: float = float("nan")
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name:<34} value={self.value:.3e} tol={self.tol:.1e} {self.detail}".rstrip()


@dataclass
class VerifyReport:
    domain: str
    p: int
    r: int
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def monolithic_solve(system: IetiSystem) -> list[np.ndarray]:
    """Direct solve of the conforming system; full-grid coefficients per patch."""
    dofs = [b.local.dofs for b in system.blocks]
    maps, n = global_numbering(system.mp, dofs)
    A, f = assemble_global([b.local for b in system.blocks], maps, n)
    u = factorize(sp.csc_matrix(A)).solve(f)
    out = []
    for b, g in zip(system.blocks, maps):
        d = b.local.dofs
        full = np.zeros(d.n_full[0] * d.n_full[1])
        full[d.full_index(np.arange(b.n))] = np.append(u, 0.0)[g]
        out.append(full)
    return out


def rel_inf(a: list[np.ndarray], b: list[np.ndarray]) -> float:
    num = max(float(np.abs(x - y).max()) for x, y in zip(a, b))
    den = max(float(np.abs(y).max()) for y in b)
    return num / den if den > 0 else num


def check_partition_of_unity(system, rng) -> Check:
    worst = 0.0
    for sx, sy in system.spaces:
        for s in (sx, sy):
            x = rng.uniform(0.0, 1.0, 64)
            _, N, _ = s.eval_many(x)
            worst = max(worst, float(np.abs(N.sum(axis=1) - 1.0).max()))
    return Check("partition of unity", worst <= 1e-12, worst, 1e-12)


def check_jump_rows(system) -> Check:
    """Each multiplier couples exactly two patches with opposite unit signs,
    and the jumps of a conforming vector vanish."""
    J = system.jumps
    count = np.zeros(J.n_lambda)
    total = np.zeros(J.n_lambda)
    owners = [set() for _ in range(J.n_lambda)]
    for k in range(len(system.blocks)):
        np.add.at(count, J.lam[k], 1.0)
        np.add.at(total, J.lam[k], J.sign[k])
        for l in J.lam[k]:
            owners[l].add(k)
    structure = bool(np.all(count == 2) and np.all(total == 0)
                     and all(len(o) == 2 for o in owners))
    dofs = [b.local.dofs for b in system.blocks]
    maps, n = global_numbering(system.mp, dofs)
    v = np.random.default_rng(1).standard_normal(n)
    jump = np.zeros(J.n_lambda)
    v = np.append(v, 0.0)  # index -1 (pinned corners) reads zero
    for k, g in enumerate(maps):
        jump += J.apply(k, v[g])
    err = float(np.abs(jump).max()) if J.n_lambda else 0.0
    ok = structure and err <= 1e-14
    return Check("jump operator rows", ok, err, 1e-14,
                 "" if structure else "row structure violated")


def check_psi(system, tol=1e-6) -> list[Check]:
    """``C Psi = I`` and ``A Psi`` vanishes away from the primal rows."""
    c_err = a_err = 0.0
    for b in system.blocks:
        if b.c == 0:
            continue
        CP = b.Psi[b.con.primal]
        c_err = max(c_err, float(np.abs(CP - np.eye(b.c)).max()))
        AP = b.local.A @ b.Psi
        mask = np.ones(b.n, bool)
        mask[b.con.primal] = False
        scale = np.abs(AP[b.con.primal]).max()
        a_err = max(a_err, float(np.abs(AP[mask]).max() / scale))
    return [Check("psi constraints C Psi = I", c_err <= tol, c_err, tol),
            Check("psi A-orthogonality", a_err <= tol, a_err, tol)]


def check_spd(op, n, name, rng, n_probe=8) -> Check:
    """Symmetry and positivity of an operator tested on random probes."""
    n_probe = min(n_probe, n)
    X = rng.standard_normal((n, n_probe))
    Y = np.stack([op.matvec(X[:, j]) for j in range(n_probe)], axis=1)
    G = X.T @ Y
    scale = np.abs(G).max()
    asym = float(np.abs(G - G.T).max() / scale)
    mineig = float(np.linalg.eigvalsh(0.5 * (G + G.T)).min() / scale)
    ok = asym <= 1e-8 and mineig > 0
    return Check(name, ok, asym, 1e-8, f"min_rayleigh={mineig:.2e}")


def check_minres_monotone(system, label="minres") -> Check:
    _, rep = pminres(system.saddle_operator(), system.block_preconditioner(),
                     system.saddle_rhs(), tol=1e-8, stop="prec")
    r = np.asarray(rep.prec_residuals)
    worst = float(np.max(np.diff(r) / r[:-1])) if r.size > 1 else 0.0
    return Check(f"{label}: residual monotone", worst <= 1e-10, max(worst, 0.0), 1e-10,
                 f"{rep.iterations} iterations")


def check_fd_dense(system, tol=1e-9, max_n=1500) -> Check:
    worst = 0.0
    tested = 0
    for b in system.blocks:
        if b.fd is None or b.po.n > max_n:
            continue
        dense = np.linalg.inv(b.po.dense_AM())
        fd = b.fd.apply(np.eye(b.po.n))
        worst = max(worst, float(np.abs(fd - dense).max() / np.abs(dense).max()))
        tested += 1
    return Check("fast diagonalization vs dense", worst <= tol, worst, tol,
                 f"{tested} patches")


def verify(domain: str | MultiPatch, p: int, r: int, variants=VARIANTS, seed: int = 0,
           max_dofs: int = VERIFY_MAX_DOFS) -> VerifyReport:
    t0 = time.perf_counter()
    mp = get_domain(domain) if isinstance(domain, str) else domain
    rng = np.random.default_rng(seed)
    rep = VerifyReport(mp.name, p, r)
    systems = {v: IetiSystem(mp, p, r, variant=v) for v in variants}
    first = next(iter(systems.values()))
    if first.n_dofs > max_dofs:
        raise ValueError(f"{first.n_dofs} dofs exceed the verify limit of {max_dofs}")
    rep.checks.append(check_partition_of_unity(first, rng))
    if first.n_lambda:
        rep.checks.append(check_jump_rows(first))
    oracle = monolithic_solve(first)
    sols = {}
    for v, system in systems.items():
        sol = system.solve(tol=SOLVER_TOL)
        sols[v] = sol.coeffs
        err = rel_inf(sol.coeffs, oracle)
        rep.checks.append(Check(f"{v}: matches direct solve", err <= ORACLE_TOL, err, ORACLE_TOL,
                                f"{sol.report.iterations} iterations"))
        umax = max(float(np.abs(c).max()) for c in sol.coeffs)
        mis = interface_mismatch(mp, system.spaces, sol.coeffs) / umax
        rep.checks.append(Check(f"{v}: interface continuity", mis <= ORACLE_TOL, mis, ORACLE_TOL))
        if system.n_pi:
            rep.checks += [Check(f"{v}: {c.name}", c.passed, c.value, c.tol, c.detail)
                           for c in check_psi(system)]
        if system.n_lambda:
            rep.checks.append(check_spd(system.scaled_dirichlet(), system.n_lambda,
                                        f"{v}: scaled Dirichlet SPD", rng))
            if v in ("mfd", "mlu"):
                rep.checks.append(check_spd(system.block_preconditioner(), system.n_saddle,
                                            f"{v}: block preconditioner SPD", rng))
                rep.checks.append(check_minres_monotone(system, v))
        if v == "mfd":
            rep.checks.append(check_fd_dense(system))
    names = list(sols)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            d = rel_inf(sols[a], sols[b])
            rep.checks.append(Check(f"agreement {a}/{b}", d <= ORACLE_TOL, d, ORACLE_TOL))
    rep.seconds = time.perf_counter() - t0
    return rep
