"""Pytest configuration and shared fixtures for macorner tests."""

import json

import numpy as np
import pytest

from macorner.model import (
    AngleConstants,
    DirichletProblem,
    Grid2D,
    QuadraticPolynomial,
    ScalarField,
    make_angle_constants,
)
from macorner.schema import SolverConfig, SolveReport
from macorner.types import GridShape

# ============================================================================
# Grid and Field Builders
# ============================================================================


def make_grid(
    R: float = 2.0, h: float = 0.125, shape: GridShape = GridShape.SQUARE
) -> Grid2D:
    """Create a quadrant grid."""
    return Grid2D(h=h, R=R, shape=shape)


def make_constants(c: float = 0.75) -> AngleConstants:
    """Create sector constants; c = 0.75 gives s = 1/2 and β⁻ = 3/2."""
    return make_angle_constants(c)


def sample_quadratic(
    p: QuadraticPolynomial, grid: Grid2D | None = None, **meta
) -> ScalarField:
    """Sample a quadratic on a grid with optional metadata."""
    grid = grid or make_grid()
    return ScalarField.from_function(grid, p, provenance="quadratic", **meta)


def sample_function(fn, grid: Grid2D | None = None, **meta) -> ScalarField:
    """Sample fn(x1, x2) on a grid."""
    grid = grid or make_grid()
    return ScalarField.from_function(grid, fn, provenance="test", **meta)


def radial_power(exponent: float, scale: float = 1.0):
    """x ↦ scale·|x|^exponent."""

    def fn(x1, x2):
        return scale * np.power(x1 * x1 + x2 * x2, 0.5 * exponent)

    return fn


def make_family_problem(
    c: float = 0.75, t: float = 0.0, R: float = 2.0, h: float = 0.125
) -> DirichletProblem:
    """Create member t of the shooting family."""
    return DirichletProblem.for_family(make_grid(R, h), make_constants(c), t)


def make_solve_report(**kwargs) -> SolveReport:
    """Create a converged SolveReport."""
    defaults = {
        "converged": True,
        "iterations": 0,
        "final_residual": 0.0,
        "tolerance": 1e-9,
    }
    defaults.update(kwargs)
    return SolveReport(**defaults)


def make_vertex_dict(**kwargs) -> dict:
    """Create a vertex record as it appears in a JSON input file."""
    record = {"label": "v0", "f0": 1.0, "p1": 1.0, "p2": 1.0}
    record.update(kwargs)
    return record


def write_vertex_file(path, records) -> None:
    """Write vertex records to a JSON file."""
    path.write_text(json.dumps(records))


# ============================================================================
# Pytest Fixtures
# ============================================================================


@pytest.fixture
def constants_075():
    """Sector constants at c = 3/4."""
    return make_constants(0.75)


@pytest.fixture
def small_grid():
    """Square grid R = 2, h = 1/8."""
    return make_grid()


@pytest.fixture
def analysis_grid():
    """Square grid R = 4, h = 1/16, wide enough for the default windows."""
    return make_grid(R=4.0, h=0.0625)


@pytest.fixture
def fast_solver_config():
    """Solver settings for small test grids."""
    return SolverConfig(newton_tol=1e-10, max_newton=40, continuation_steps=4)


@pytest.fixture
def vertex_file(tmp_path):
    """Single unit-band vertex record on disk."""
    path = tmp_path / "vertex.json"
    write_vertex_file(path, make_vertex_dict())
    return path


# ============================================================================
# Assertion Helpers
# ============================================================================


def assert_field_matches(
    field: ScalarField, p: QuadraticPolynomial, tol: float = 1e-10
) -> None:
    """Assert that a field equals a quadratic on every active node."""
    x1, x2 = field.grid.mesh
    active = field.grid.active_mask
    diff = np.abs(field.values[active] - p(x1[active], x2[active]))
    assert float(diff.max()) <= tol, f"max deviation {diff.max():.3e} > {tol}"
