"""macorner - Monge-Ampère Dirichlet problems on corner domains.

This package solves det D²u = f on truncated quadrants with a monotone
wide-stencil scheme, constructs the global solutions P̄_c and P̲_c by
shooting, measures their asymptotic exponents and boundary-Harnack
coefficients, and classifies the regularity of convex corners.

Main exports:
    solve_dirichlet: Newton solver for the discrete Dirichlet problem
    shoot_pbar, shoot_punder: Shooting constructions on the quadrant
    classify_vertex: Vertex regularity verdict
"""

from .classifier import classify_vertex
from .global_solutions import shoot_pbar, shoot_punder
from .solver import solve_dirichlet

__version__ = "0.1.0"
__all__ = ["classify_vertex", "shoot_pbar", "shoot_punder", "solve_dirichlet"]
