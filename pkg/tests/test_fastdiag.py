import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ietidp.assembly import parameter_operator
from ietidp.fastdiag import build_fd, build_interior_fd, fd_apply
from ietidp.splines import make_space

SIDE_SETS = [set(), {0}, {0, 2}, {1, 3}, {0, 1, 2, 3}]


def operator(p, r, sides, extra=(0, 0)):
    spaces = (make_space(p, r, extra[0]), make_space(p, r, extra[1]))
    return parameter_operator(spaces, sides)


@pytest.mark.parametrize("p", [1, 2, 3])
@pytest.mark.parametrize("r", [1, 2])
@pytest.mark.parametrize("sides", SIDE_SETS, ids=lambda s: "D" + "".join(map(str, sorted(s))))
def test_fd_equals_dense_inverse(p, r, sides):
    po = operator(p, r, sides)
    fd = build_fd(po)
    dense = np.linalg.inv(po.dense_AM())
    got = fd_apply(fd, np.eye(po.n))
    assert np.abs(got - dense).max() <= 1e-9 * np.abs(dense).max()


def test_floating_patch_uses_diagonal_update():
    po = operator(3, 2, set())
    fd = build_fd(po)
    assert po.gamma == 1 and fd.woodbury is None
    # the correction touches exactly the constant mode
    assert np.count_nonzero(np.abs(fd.dtilde - (fd.dx[:, None] + fd.dy[None, :])) > 1e-12) == 1


def test_woodbury_fallback_is_exact():
    po = operator(2, 2, set())
    fd = build_fd(po)
    from ietidp import fastdiag
    D = fd.dx[:, None] + fd.dy[None, :]
    zero = np.abs(D) <= fastdiag.ZERO_EIG * D.max()
    dt, wood = fastdiag._woodbury_setup(D, fd.w, 1, zero)
    forced = fastdiag.FdSolver(fd.Ux, fd.dx, fd.Uy, fd.dy, 1, fd.w, dt, wood)
    dense = np.linalg.inv(po.dense_AM())
    assert np.allclose(fd_apply(forced, np.eye(po.n)), dense, atol=1e-9 * np.abs(dense).max())


@given(st.integers(1, 4), st.integers(0, 3), st.sampled_from(range(len(SIDE_SETS))),
       st.integers(0, 2**32 - 1))
@settings(max_examples=25)
def test_fd_solves_random_rhs(p, r, si, seed):
    po = operator(p, r, SIDE_SETS[si])
    fd = build_fd(po)
    b = np.random.default_rng(seed).standard_normal(po.n)
    x = fd.apply(b)
    res = po.dense_AM() @ x - b
    assert np.linalg.norm(res) <= 1e-8 * np.linalg.norm(b) * max(1.0, np.abs(po.dense_AM()).max())


def test_anisotropic_space():
    po = operator(2, 1, {2}, extra=(1, 0))
    assert po.shape[0] != po.shape[1]
    dense = np.linalg.inv(po.dense_AM())
    assert np.allclose(build_fd(po).apply(np.eye(po.n)), dense, atol=1e-10 * np.abs(dense).max())


def test_interior_fd():
    po = operator(3, 2, set())
    fi = build_interior_fd(po)
    inner = po.interior()
    dense = np.linalg.inv(inner.dense_A())
    assert fi.gamma == 0
    assert np.allclose(fi.apply(np.eye(inner.n)), dense, atol=1e-10 * np.abs(dense).max())


def test_shape_mismatch():
    fd = build_fd(operator(1, 1, set()))
    with pytest.raises(ValueError):
        fd.apply(np.ones(fd.shape[0] * fd.shape[1] + 1))
