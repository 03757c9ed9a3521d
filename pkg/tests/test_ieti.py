import numpy as np
import pytest

from helpers import twisted_square
from ietidp import IetiSystem, get_domain, solve, unit_square_grid
from ietidp.checks import monolithic_solve, rel_inf
from ietidp.ieti import (VARIANTS, ConsistencyError, interface_mismatch,
                         reconstruct_and_check)
from ietidp.krylov import SolveReport


def skewed_rhs(x, y):
    # no symmetry of the unit square maps this to itself, so the dual rhs is nonzero
    return 1.0 + 3.0 * x + np.exp(y) * x * x


def oracle_error(system, tol=1e-10):
    sol = system.solve(tol=tol)
    return rel_inf(sol.coeffs, monolithic_solve(system)), sol


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("domain,p,r", [
    ("square2x2", 1, 2), ("square2x2", 3, 1), ("square4x4", 2, 2), ("square3x3", 2, 1),
    ("lshape12", 2, 1), ("annulus32", 1, 1),
])
def test_matches_monolithic(domain, p, r, variant):
    system = IetiSystem(get_domain(domain), p, r, rhs=skewed_rhs, variant=variant)
    err, sol = oracle_error(system)
    assert sol.report.converged
    assert err <= 1e-7


@pytest.mark.parametrize("turns", [(0, 1, 2, 3), (1, 1, 3, 2), (2, 0, 0, 2)])
@pytest.mark.parametrize("variant", VARIANTS)
def test_rotated_parameterizations(turns, variant):
    mp = twisted_square(turns)
    system = IetiSystem(mp, 2, 2, rhs=skewed_rhs, variant=variant)
    err, sol = oracle_error(system)
    assert err <= 1e-7
    umax = max(np.abs(c).max() for c in sol.coeffs)
    assert interface_mismatch(mp, system.spaces, sol.coeffs) <= 1e-7 * umax


def test_rotation_does_not_change_the_solution():
    ref = IetiSystem(unit_square_grid(2), 2, 2, rhs=skewed_rhs)
    tw = IetiSystem(twisted_square((0, 1, 2, 3)), 2, 2, rhs=skewed_rhs)
    assert (ref.n_dofs, ref.n_lambda, ref.n_pi) == (tw.n_dofs, tw.n_lambda, tw.n_pi)
    a, b = ref.solve(tol=1e-10), tw.solve(tol=1e-10)
    assert a.report.iterations > 1 and b.report.converged
    # the coefficient sets are permutations of each other
    x, y = np.sort(np.concatenate(a.coeffs)), np.sort(np.concatenate(b.coeffs))
    assert np.allclose(x, y, atol=1e-7 * np.abs(x).max())


@pytest.mark.parametrize("m", [1, 2, 3, 4])
@pytest.mark.parametrize("p,r", [(1, 1), (2, 2), (3, 1)])
def test_dof_count_of_square_grids(m, p, r):
    # C0 across patch interfaces: each patch has 2^r + p functions per direction
    n1 = m * (2**r + p - 1) + 1
    system = IetiSystem(unit_square_grid(m), p, r)
    assert system.n_dofs == (n1 - 2) ** 2
    assert system.n_pi == (m - 1) ** 2
    per_edge = 2**r + p - 2
    assert system.n_lambda == 2 * m * (m - 1) * per_edge


def test_single_patch_is_a_direct_solve():
    system = IetiSystem(unit_square_grid(1), 2, 3)
    sol = system.solve()
    assert system.n_lambda == 0 and sol.report.iterations == 0
    assert rel_inf(sol.coeffs, monolithic_solve(system)) < 1e-12


def test_symmetric_rhs_has_zero_dual_rhs():
    system = IetiSystem(unit_square_grid(2), 2, 2, variant="cglu")
    assert np.linalg.norm(system.dual_rhs()) < 1e-12 * np.linalg.norm(system.f_pi)


def test_cglu_condition_is_small_and_positive():
    system = IetiSystem(get_domain("square4x4"), 3, 3, rhs=skewed_rhs, variant="cglu")
    sol = system.solve(tol=1e-8)
    assert 1.0 <= sol.report.lambda_min * (1 + 1e-8)
    assert sol.report.cond_est < 10.0


def test_iteration_ordering_on_small_annulus():
    its = {}
    for v in VARIANTS:
        its[v] = IetiSystem(get_domain("annulus32"), 3, 2, variant=v).solve().report.iterations
    assert its["cglu"] < its["mlu"] < its["mfd"]


def test_shared_factors_give_identical_results():
    mp = get_domain("annulus32")
    plain = IetiSystem(mp, 2, 2, variant="cglu")
    shared = IetiSystem(mp, 2, 2, variant="cglu", share_factors=True)
    assert shared.factors.n_reused > 0
    assert shared.factors.n_factorizations < plain.factors.n_factorizations
    a, b = plain.solve(tol=1e-10), shared.solve(tol=1e-10)
    assert rel_inf(a.coeffs, b.coeffs) < 1e-8


def test_memory_budget():
    with pytest.raises(MemoryError):
        IetiSystem(get_domain("square4x4"), 3, 3, variant="mlu", memory_budget=1e3)


@pytest.mark.parametrize("kw", [{"variant": "lu"}, {"mlu_local": "dense"}, {"schur": "exact"}])
def test_bad_options(kw):
    with pytest.raises(ValueError):
        IetiSystem(unit_square_grid(2), 1, 1, **kw)


def test_mlu_projected_local_solver_agrees():
    mp = unit_square_grid(3)
    a = IetiSystem(mp, 2, 2, rhs=skewed_rhs, variant="mlu").solve(tol=1e-10)
    b = IetiSystem(mp, 2, 2, rhs=skewed_rhs, variant="mlu", mlu_local="projected").solve(tol=1e-10)
    assert rel_inf(a.coeffs, b.coeffs) < 1e-7


def test_threads_do_not_change_results():
    mp = get_domain("square4x4")
    a = IetiSystem(mp, 2, 2, rhs=skewed_rhs).solve(tol=1e-10)
    b = IetiSystem(mp, 2, 2, rhs=skewed_rhs, threads=3).solve(tol=1e-10)
    assert a.report.iterations == b.report.iterations
    assert rel_inf(a.coeffs, b.coeffs) < 1e-10


def test_reconstruct_and_check_flags_discontinuity():
    system, sol = solve(unit_square_grid(2), 2, 2, "mfd", tol=1e-10, rhs=skewed_rhs)
    coeffs, report = reconstruct_and_check(system, sol)
    assert report["interface_mismatch"] < 1e-7
    sol.coeffs[0] = sol.coeffs[0] + 1.0
    with pytest.raises(ConsistencyError):
        reconstruct_and_check(system, sol)


def test_report_defaults():
    rep = SolveReport()
    assert rep.iterations == 0 and not rep.converged
