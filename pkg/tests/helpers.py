"""Domains used only by the tests."""
import numpy as np

from ietidp.geometry import CORNERS, BilinearMap, MultiPatch, Patch, unit_square_grid


def rotated(points, quarter_turns):
    """Corner points of the same bilinear patch with a rotated parameterization.

    One quarter turn maps parameter corner (a, b) to the old corner (b, 1 - a),
    which keeps the Jacobian determinant positive.
    """
    pts = {c: np.asarray(points)[i] for i, c in enumerate(CORNERS)}
    for _ in range(quarter_turns % 4):
        pts = {(a, b): pts[(b, 1 - a)] for (a, b) in CORNERS}
    return np.array([pts[c] for c in CORNERS])


def twisted_square(turns=(0, 1, 2, 3), m=2):
    """Unit square grid whose patches carry rotated parameterizations."""
    base = unit_square_grid(m)
    patches = [Patch(BilinearMap(rotated(pt.geo.points, t)))
               for pt, t in zip(base.patches, turns)]
    return MultiPatch(patches, name=f"twisted{m}x{m}")
