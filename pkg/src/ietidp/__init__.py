"""Inexact dual-primal tearing and interconnecting solvers for 2D Poisson
problems on multi-patch B-spline discretizations."""
from .geometry import DOMAINS, MultiPatch, get_domain, quarter_annulus, unit_square_grid
from .ieti import VARIANTS, IetiSystem, solve, solve_cglu, solve_mfd, solve_mlu

__version__ = "0.1.0"

__all__ = [
    "DOMAINS", "VARIANTS", "IetiSystem", "MultiPatch", "get_domain", "quarter_annulus",
    "unit_square_grid", "solve", "solve_mfd", "solve_mlu", "solve_cglu",
]
