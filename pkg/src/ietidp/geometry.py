"""Patch geometry maps, multi-patch domains, topology and dof classification.

Conventions used throughout the package:

* parameter coordinates ``(xi, eta)`` in (0, 1)^2;
* sides ``0: xi=0, 1: xi=1, 2: eta=0, 3: eta=1``; a side is parameterized by the
  free coordinate running from 0 to 1;
* corners are ``(a, b)`` with ``a, b`` in {0, 1} the (xi, eta) values;
* tensor coefficients are numbered ``i * n_eta + j`` (xi index major).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .splines import SplineSpace1D, make_space

SIDES = (0, 1, 2, 3)
CORNERS = ((0, 0), (1, 0), (0, 1), (1, 1))


class TopologyError(ValueError):
    pass


class GeometryError(ValueError):
    pass


def side_corners(side: int):
    """Start and end corner of a side (in its own parameter direction)."""
    return {
        0: ((0, 0), (0, 1)),
        1: ((1, 0), (1, 1)),
        2: ((0, 0), (1, 0)),
        3: ((0, 1), (1, 1)),
    }[side]


def corner_sides(corner) -> tuple[int, int]:
    a, b = corner
    return (0 if a == 0 else 1), (2 if b == 0 else 3)


def side_params(side: int, t):
    t = np.asarray(t, dtype=float)
    c = np.zeros_like(t) if side in (0, 2) else np.ones_like(t)
    return (c, t) if side in (0, 1) else (t, c)


class GeometryMap:
    """Map from the unit square onto one patch."""

    def eval(self, xi, eta) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, xi, eta) -> np.ndarray:
        """``J[..., i, j] = d x_i / d xi_j``."""
        raise NotImplementedError

    def det(self, xi, eta):
        J = self.jacobian(xi, eta)
        return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]

    def corner(self, c) -> np.ndarray:
        return self.eval(np.array(float(c[0])), np.array(float(c[1])))

    def diameter(self, n: int = 9) -> float:
        s = np.linspace(0.0, 1.0, n)
        pts = []
        for side in SIDES:
            pts.append(self.eval(*side_params(side, s)))
        P = np.concatenate(pts, axis=0)
        d = P[:, None, :] - P[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())


@dataclass(eq=False)
class BilinearMap(GeometryMap):
    """Bilinear interpolation of four corner points ordered as ``CORNERS``."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(4, 2)

    def eval(self, xi, eta):
        xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
        P = self.points
        w = [(1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta, xi * eta]
        return sum(wk[..., None] * P[k] for k, wk in enumerate(w))

    def jacobian(self, xi, eta):
        xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
        P = self.points
        dxi = (1 - eta)[..., None] * (P[1] - P[0]) + eta[..., None] * (P[3] - P[2])
        deta = (1 - xi)[..., None] * (P[2] - P[0]) + xi[..., None] * (P[3] - P[1])
        return np.stack([dxi, deta], axis=-1)


@dataclass(eq=False)
class AnnulusSectorMap(GeometryMap):
    """Exact polar map: radius affine in xi, angle affine in eta."""

    r_in: float
    r_out: float
    theta0: float
    theta1: float

    def eval(self, xi, eta):
        xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
        rho = self.r_in + (self.r_out - self.r_in) * xi
        phi = self.theta0 + (self.theta1 - self.theta0) * eta
        return np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=-1)

    def jacobian(self, xi, eta):
        xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
        dr, dphi = self.r_out - self.r_in, self.theta1 - self.theta0
        rho = self.r_in + dr * xi
        phi = self.theta0 + dphi * eta
        c, s = np.cos(phi), np.sin(phi)
        col_xi = np.stack([dr * c, dr * s], axis=-1)
        col_eta = np.stack([-rho * dphi * s, rho * dphi * c], axis=-1)
        return np.stack([col_xi, col_eta], axis=-1)


@dataclass(eq=False)
class Patch:
    geo: GeometryMap
    extra_inner: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Interface:
    patch_a: int
    side_a: int
    patch_b: int
    side_b: int
    reversed: bool


@dataclass(frozen=True)
class Vertex:
    point: tuple[float, float]
    corners: tuple[tuple[int, tuple[int, int]], ...]
    dirichlet: bool

    @property
    def multiplicity(self) -> int:
        return len(self.corners)


@dataclass(eq=False)
class Topology:
    interfaces: list[Interface]
    vertices: list[Vertex]
    dirichlet: frozenset  # of (patch, side)

    def neighbor(self, k: int, side: int):
        for itf in self.interfaces:
            if (itf.patch_a, itf.side_a) == (k, side):
                return itf
            if (itf.patch_b, itf.side_b) == (k, side):
                return itf
        return None


@dataclass(eq=False)
class MultiPatch:
    patches: list[Patch]
    name: str = ""
    topology: Topology = field(init=False)

    def __post_init__(self):
        self.topology = build_topology(self)
        # pure Dirichlet model problem: every unmatched side is Dirichlet
        self.dirichlet = self.topology.dirichlet

    @property
    def K(self) -> int:
        return len(self.patches)

    def spaces(self, p: int, r: int) -> list[tuple[SplineSpace1D, SplineSpace1D]]:
        return [
            (make_space(p, r, pt.extra_inner[0]), make_space(p, r, pt.extra_inner[1]))
            for pt in self.patches
        ]

    def diameter(self) -> float:
        P = np.array([pt.geo.corner(c) for pt in self.patches for c in CORNERS])
        d = P[:, None, :] - P[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    def dirichlet_sides(self, k: int) -> set[int]:
        return {s for (kk, s) in self.dirichlet if kk == k}


def build_topology(mp: MultiPatch, tol: float = 1e-8) -> Topology:
    """Detect matching sides and cluster coincident corners.

    Two sides match when their end points coincide (in either order) and
    their midpoints coincide, within ``tol * min(H_a, H_b)``.
    """
    patches = mp.patches
    H = [pt.geo.diameter() for pt in patches]
    ends = {}
    mids = {}
    for k, pt in enumerate(patches):
        for s in SIDES:
            c0, c1 = side_corners(s)
            ends[k, s] = (pt.geo.corner(c0), pt.geo.corner(c1))
            mids[k, s] = pt.geo.eval(*side_params(s, np.array(0.5)))

    interfaces = []
    matched: dict[tuple[int, int], tuple[int, int]] = {}
    keys = list(ends)
    E0 = np.array([ends[key][0] for key in keys])
    E1 = np.array([ends[key][1] for key in keys])
    Hs = np.array([H[k] for k, _ in keys])
    eps = tol * np.minimum(Hs[:, None], Hs[None, :])

    def dist(X, Y):
        return np.sqrt(((X[:, None, :] - Y[None, :, :]) ** 2).sum(-1))

    SAME = (dist(E0, E0) <= eps) & (dist(E1, E1) <= eps)
    FLIP = (dist(E0, E1) <= eps) & (dist(E1, E0) <= eps)
    owner = np.array([k for k, _ in keys])
    cand = (SAME | FLIP) & (owner[:, None] != owner[None, :])
    cand = np.triu(cand, 1)
    for ia, ib in zip(*np.nonzero(cand)):
        (ka, sa), (kb, sb) = keys[ia], keys[ib]
        same, flip = bool(SAME[ia, ib]), bool(FLIP[ia, ib])
        if np.linalg.norm(mids[ka, sa] - mids[kb, sb]) > eps[ia, ib]:
            raise TopologyError(
                f"sides ({ka},{sa}) and ({kb},{sb}) share end points but not geometry"
            )
        for key in ((ka, sa), (kb, sb)):
            if key in matched:
                raise TopologyError(f"side {key} matches more than one side")
        matched[ka, sa] = (kb, sb)
        matched[kb, sb] = (ka, sa)
        interfaces.append(Interface(ka, sa, kb, sb, bool(flip and not same)))

    dirichlet = frozenset(key for key in keys if key not in matched)
    _check_no_partial_overlap(mp, dirichlet, ends, H, tol)

    # cluster corners
    eps_v = tol * mp_diameter(patches)
    reps: list[np.ndarray] = []
    groups: list[list] = []
    for k, pt in enumerate(patches):
        for c in CORNERS:
            x = pt.geo.corner(c)
            for g, y in enumerate(reps):
                if np.linalg.norm(x - y) <= eps_v:
                    groups[g].append((k, c))
                    break
            else:
                reps.append(x)
                groups.append([(k, c)])
    vertices = []
    for y, g in zip(reps, groups):
        is_dir = any(
            any((k, s) in dirichlet for s in corner_sides(c)) for (k, c) in g
        )
        if len(g) > 8:
            raise TopologyError("more than 8 patches share a vertex")
        vertices.append(Vertex((float(y[0]), float(y[1])), tuple(g), is_dir))
    return Topology(interfaces, vertices, dirichlet)


def mp_diameter(patches) -> float:
    P = np.array([pt.geo.corner(c) for pt in patches for c in CORNERS])
    return float(np.ptp(P, axis=0).max())


def _check_no_partial_overlap(mp, dirichlet, ends, H, tol):
    """Reject T-junctions: an unmatched side may not contain another patch corner."""
    for ka, sa in dirichlet:
        a0, a1 = ends[ka, sa]
        L = np.linalg.norm(a1 - a0)
        for kb, sb in dirichlet:
            if kb == ka:
                continue
            for x in ends[kb, sb]:
                eps = tol * min(H[ka], H[kb])
                if np.linalg.norm(x - a0) <= eps or np.linalg.norm(x - a1) <= eps:
                    continue
                # only straight sides can be tested cheaply; curved sides are annulus arcs
                s = np.dot(x - a0, a1 - a0) / L**2
                d = np.linalg.norm(a0 + s * (a1 - a0) - x)
                if 0 < s < 1 and d <= eps and isinstance(mp.patches[ka].geo, BilinearMap):
                    raise TopologyError(f"partial overlap on side ({ka},{sa})")


# --- domain catalog ---------------------------------------------------------


def quarter_annulus(n_radial: int = 4, n_angular: int = 8, r_in: float = 1.0,
                    r_out: float = 2.0) -> MultiPatch:
    if r_in <= 0 or r_out <= 0 or r_in >= r_out:
        raise GeometryError("need 0 < r_in < r_out")
    if n_radial < 1 or n_angular < 1:
        raise GeometryError("need at least one patch per direction")
    rs = np.linspace(r_in, r_out, n_radial + 1)
    ts = np.linspace(0.0, 0.5 * np.pi, n_angular + 1)
    patches = [
        Patch(AnnulusSectorMap(rs[i], rs[i + 1], ts[j], ts[j + 1]))
        for i in range(n_radial)
        for j in range(n_angular)
    ]
    return MultiPatch(patches, name=f"annulus{n_radial * n_angular}")


def unit_square_grid(m: int) -> MultiPatch:
    if m < 1:
        raise GeometryError("m must be >= 1")
    x = np.linspace(0.0, 1.0, m + 1)
    patches = []
    for i in range(m):
        for j in range(m):
            pts = [(x[i], x[j]), (x[i + 1], x[j]), (x[i], x[j + 1]), (x[i + 1], x[j + 1])]
            patches.append(Patch(BilinearMap(np.array(pts))))
    return MultiPatch(patches, name=f"square{m}x{m}")


# Layouts on a coarse cell grid: rows listed top to bottom, '#' marks a patch.
# Column widths / row heights of 2 produce elongated patches that receive one
# extra inner knot in the long direction.
FOOTPRINT_LAYOUTS = {
    "lshape12": dict(
        rows=["##..",
              "##..",
              "####",
              "####"],
        widths=[1, 1, 1, 1],
        heights=[1, 1, 1, 1],
        warp=0.0,
    ),
    "footprint": dict(
        rows=["#.#.#.#.##",
              "#.#.#.#.##",
              "##########",
              "##########",
              ".########.",
              ".#######..",
              "..######..",
              "..######..",
              "..######..",
              "..#####...",
              "...####...",
              "...####..."],
        widths=[1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
        heights=[2, 1, 1, 1, 1, 2, 1, 1, 1, 1, 1, 1],
        warp=0.08,
    ),
}


def footprint_like(layout: str = "footprint") -> MultiPatch:
    """Non-convex multi-limb domain of bilinear patches from the built-in catalog."""
    try:
        layout_def = FOOTPRINT_LAYOUTS[layout]
    except KeyError:
        raise GeometryError(f"unknown layout {layout!r}") from None
    rows = layout_def["rows"][::-1]  # bottom row first
    xs = np.concatenate([[0.0], np.cumsum(layout_def["widths"])])
    ys = np.concatenate([[0.0], np.cumsum(layout_def["heights"][::-1])])
    scale = max(xs[-1], ys[-1])
    xs, ys = xs / scale, ys / scale
    warp = layout_def["warp"]

    def W(x, y):
        # smooth global warp; keeps edges straight since patches stay bilinear
        return (x + warp * np.sin(np.pi * y) * 0.5, y + warp * np.sin(np.pi * x) * 0.3)

    patches = []
    for j, row in enumerate(rows):
        for i, ch in enumerate(row):
            if ch != "#":
                continue
            pts = [W(xs[a], ys[b]) for (a, b) in ((i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1))]
            w, h = layout_def["widths"][i], layout_def["heights"][::-1][j]
            extra = (int(w > h), int(h > w))
            patches.append(Patch(BilinearMap(np.array(pts)), extra_inner=extra))
    return MultiPatch(patches, name=layout)


def get_domain(name: str) -> MultiPatch:
    catalog = {
        "annulus32": lambda: quarter_annulus(4, 8, 1.0, 2.0),
        "square1x1": lambda: unit_square_grid(1),
        "square2x2": lambda: unit_square_grid(2),
        "square3x3": lambda: unit_square_grid(3),
        "square4x4": lambda: unit_square_grid(4),
        "footprint": lambda: footprint_like("footprint"),
        "lshape12": lambda: footprint_like("lshape12"),
    }
    if name not in catalog:
        raise GeometryError(f"unknown domain {name!r}; choose from {sorted(catalog)}")
    return catalog[name]()


DOMAINS = ("annulus32", "square1x1", "square2x2", "square3x3", "square4x4", "footprint", "lshape12")


# --- dof classification -----------------------------------------------------


@dataclass(eq=False)
class PatchDofs:
    """Index sets of one patch.

    ``full`` indices refer to the untrimmed ``n_xi x n_eta`` grid, all others
    to the trimmed (Dirichlet-free) grid of shape ``shape``.
    """

    n_full: tuple[int, int]
    lo: tuple[int, int]          # number of dropped leading indices per direction
    shape: tuple[int, int]       # trimmed grid
    dirichlet_full: np.ndarray
    interior: np.ndarray
    gamma: np.ndarray
    primal: np.ndarray           # local constrained corner indices
    primal_global: np.ndarray    # their global primal ids, -1 for pinned corners
    primal_corners: list
    delta: np.ndarray

    @property
    def n(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def pinned(self) -> np.ndarray:
        """Local indices of corners held at zero although no side is trimmed."""
        return self.primal[self.primal_global < 0]

    def local_index(self, i, j):
        """Trimmed index of full-grid coefficient (i, j); -1 if Dirichlet."""
        i, j = np.asarray(i), np.asarray(j)
        ii, jj = i - self.lo[0], j - self.lo[1]
        ok = (ii >= 0) & (ii < self.shape[0]) & (jj >= 0) & (jj < self.shape[1])
        return np.where(ok, ii * self.shape[1] + jj, -1)

    def full_index(self, local):
        ii, jj = np.divmod(np.asarray(local), self.shape[1])
        return (ii + self.lo[0]) * self.n_full[1] + (jj + self.lo[1])

    def side_full(self, side: int):
        """Full-grid (i, j) of the coefficients on a side, ordered by its parameter."""
        n0, n1 = self.n_full
        if side in (0, 1):
            i = 0 if side == 0 else n0 - 1
            return np.full(n1, i), np.arange(n1)
        j = 0 if side == 2 else n1 - 1
        return np.arange(n0), np.full(n0, j)


@dataclass(eq=False)
class DofClassification:
    patches: list[PatchDofs]
    n_primal: int
    vertex_ids: list[int]  # global primal id -> vertex index


def classify_dofs(mp: MultiPatch, spaces) -> DofClassification:
    topo = mp.topology
    vertex_primal = {}
    vertex_ids = []
    for v_idx, v in enumerate(topo.vertices):
        if not v.dirichlet:
            vertex_primal[v_idx] = len(vertex_ids)
            vertex_ids.append(v_idx)
    corner_vertex = {}
    for v_idx, v in enumerate(topo.vertices):
        for kc in v.corners:
            corner_vertex[kc] = v_idx

    out = []
    for k, (sx, sy) in enumerate(spaces):
        n0, n1 = sx.n, sy.n
        dsides = mp.dirichlet_sides(k)
        lo = (int(0 in dsides), int(2 in dsides))
        hi = (n0 - int(1 in dsides), n1 - int(3 in dsides))
        shape = (hi[0] - lo[0], hi[1] - lo[1])
        if shape[0] < 1 or shape[1] < 1:
            raise GeometryError(f"patch {k} has no free coefficients")
        I, J = np.meshgrid(np.arange(n0), np.arange(n1), indexing="ij")
        I, J = I.ravel(), J.ravel()
        dmask = (I < lo[0]) | (I >= hi[0]) | (J < lo[1]) | (J >= hi[1])
        bmask = (I == 0) | (I == n0 - 1) | (J == 0) | (J == n1 - 1)
        free = ~dmask
        ii, jj = I[free] - lo[0], J[free] - lo[1]
        loc = ii * shape[1] + jj
        interior = np.sort(loc[~bmask[free]])
        gamma = np.sort(loc[bmask[free]])
        primal, pglob, pcorners = [], [], []
        for c in CORNERS:
            v_idx = corner_vertex[k, c]
            i = 0 if c[0] == 0 else n0 - 1
            j = 0 if c[1] == 0 else n1 - 1
            if dmask[i * n1 + j]:
                continue
            # A corner that touches the Dirichlet boundary only through a
            # vertex (re-entrant corners) survives the sidewise trimming; it
            # joins the constraints with global id -1 and is pinned to zero.
            primal.append((i - lo[0]) * shape[1] + (j - lo[1]))
            pglob.append(vertex_primal.get(v_idx, -1))
            pcorners.append(c)
        primal = np.array(primal, dtype=int)
        delta = np.setdiff1d(np.arange(shape[0] * shape[1]), primal)
        out.append(PatchDofs(
            n_full=(n0, n1), lo=lo, shape=shape,
            dirichlet_full=np.flatnonzero(dmask),
            interior=interior, gamma=gamma,
            primal=primal, primal_global=np.array(pglob, dtype=int),
            primal_corners=pcorners, delta=delta,
        ))
    return DofClassification(out, len(vertex_ids), vertex_ids)


def regularity_constant(mp: MultiPatch, n: int = 7) -> float:
    """max over sampled points of ||grad G|| ||grad G^{-1}|| (a C_G^2 proxy)."""
    s = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(s, s, indexing="ij")
    worst = 0.0
    for pt in mp.patches:
        J = pt.geo.jacobian(X, Y)
        nJ = np.linalg.norm(J, ord=2, axis=(-2, -1))
        nJi = np.linalg.norm(np.linalg.inv(J), ord=2, axis=(-2, -1))
        worst = max(worst, float((nJ * nJi).max()))
    return worst
