"""Desk-scale acceptance runs.

Most of these solve full shooting problems and are marked slow; run them
with ``pytest -m slow``.
"""

import math

import numpy as np
import pytest

from macorner.asymptotics import (
    default_windows,
    deviation_exponent,
    harnack_coefficient,
    hessian_audit,
    hessian_field,
    u12_limits,
)
from macorner.classifier import classify_vertex, log_modulus_experiment
from macorner.global_solutions import shoot_pbar, shoot_punder
from macorner.harmonic import discrete_laplacian, polar, v0_polar
from macorner.model import (
    Q_HALF,
    DirichletProblem,
    make_angle_constants,
    make_pc,
    quadratic_rescale,
)
from macorner.schema import VertexData
from macorner.solver import random_comparison, solve_dirichlet
from macorner.types import OuterData, RegularityKind, Sign
from tests.conftest import assert_field_matches, make_family_problem, make_grid


@pytest.fixture(scope="module", params=[0.5, 0.75])
def shot_pair(request):
    """P̄_c and P̲_c on R = 8, h = 1/16."""
    constants_ = make_angle_constants(request.param)
    upper = shoot_pbar(constants_, R=8.0, h=0.0625)
    lower = shoot_punder(constants_, R=8.0, h=0.0625)
    return constants_, upper, lower


@pytest.fixture(scope="module")
def large_pbar():
    """P̄_c at c = 3/4 on R = 16, h = 1/64."""
    constants_ = make_angle_constants(0.75)
    return constants_, shoot_pbar(constants_, R=16.0, h=1.0 / 64.0)


class TestQuadraticExactness:
    """The scheme reproduces P_c^± and q exactly."""

    @pytest.mark.parametrize("c", [0.25, 0.5, 0.75])
    def test_family_endpoints(self, c):
        """Boundary data P_c^± return P_c^± on R = 4, h = 1/32."""
        constants_ = make_angle_constants(c)
        for t, sign in ((0.0, Sign.MINUS), (2.0 * constants_.s, Sign.PLUS)):
            problem = make_family_problem(c=c, t=t, R=4.0, h=1.0 / 32.0)
            u, _ = solve_dirichlet(problem)
            assert_field_matches(u, make_pc(constants_, sign), tol=1e-8)

    def test_unit_constant(self):
        """Boundary data q with f = 1 return q."""
        problem = DirichletProblem.build(make_grid(R=4.0, h=1.0 / 32.0), 1.0, Q_HALF)
        u, _ = solve_dirichlet(problem)
        assert_field_matches(u, Q_HALF, tol=1e-8)


@pytest.mark.slow
class TestShootingAcceptance:
    """Bracket values, normalization and the sandwich of the constructions."""

    def test_bracket_and_targets(self, shot_pair):
        """u(1,1) runs from 1 - s to 1 + s and is pinned at 1 and 0."""
        constants_, upper, lower = shot_pair
        s = constants_.s
        history = sorted(upper.bracket_history)
        assert history[0] == (0.0, pytest.approx(1.0 - s, abs=1e-8))
        assert history[-1][0] == pytest.approx(2.0 * s)
        assert history[-1][1] == pytest.approx(1.0 + s, abs=1e-8)
        assert upper.value_at_target == pytest.approx(1.0, abs=1e-6)
        assert lower.value_at_target == pytest.approx(0.0, abs=1e-6)
        assert lower.field.at_node((0.5, 0.5)) < 0

    def test_sandwich(self, shot_pair):
        """P̲_c <= P_c^- <= P̄_c <= P_c^+ away from the boundaries."""
        constants_, upper, lower = shot_pair
        grid = upper.field.grid
        x1, x2 = grid.mesh
        inner = grid.distance_to_boundary(np.stack([x1, x2], axis=-1)) > 4 * grid.h
        pc_minus = make_pc(constants_, Sign.MINUS)(x1, x2)[inner]
        pc_plus = make_pc(constants_, Sign.PLUS)(x1, x2)[inner]
        assert np.all(lower.field.values[inner] <= pc_minus + 1e-6)
        assert np.all(pc_minus <= upper.field.values[inner] + 1e-6)
        assert np.all(upper.field.values[inner] <= pc_plus + 1e-6)

    def test_punder_amplitude_negative(self, shot_pair):
        """The leading-mode amplitude of P̲_c is negative."""
        constants_, _, lower = shot_pair
        assert harnack_coefficient(lower.field, constants_).a < 0


@pytest.mark.slow
class TestLargePbar:
    """Hessian bounds, limits, exponents and the Harnack coefficient of P̄_c."""

    def test_hessian_bounds(self, large_pbar):
        """u₁₁, u₂₂ <= 1.02 and |u₁₂| <= 0.52 on valid nodes."""
        constants_, result = large_pbar
        audit = hessian_audit(hessian_field(result.field), constants_)
        assert audit.max_u11 <= 1.02
        assert audit.max_u22 <= 1.02
        assert audit.max_abs_u12 <= 0.52

    def test_determinant_band(self, large_pbar):
        """det D²u stays within 0.05 of c on valid nodes."""
        constants_, result = large_pbar
        det = hessian_field(result.field).det
        assert np.nanmin(det) >= constants_.c - 0.05
        assert np.nanmax(det) <= constants_.c + 0.05

    def test_u12_limits(self, large_pbar):
        """u₁₂ tends to +s at the vertex and -s at infinity."""
        _, result = large_pbar
        limits = u12_limits(hessian_field(result.field))
        assert 0.45 <= limits.near <= 0.55
        assert -0.55 <= limits.far <= -0.45

    def test_exponents(self, large_pbar):
        """Near-vertex slope above 2 and far slope around β⁻ = 3/2."""
        constants_, result = large_pbar
        windows = default_windows(result.field.grid)
        near = deviation_exponent(
            result.field, make_pc(constants_, Sign.PLUS), windows.near
        )
        far = deviation_exponent(
            result.field, make_pc(constants_, Sign.MINUS), windows.far
        )
        assert near.slope >= 2.05
        assert 1.35 <= far.slope <= 1.65

    def test_harnack_scaling(self, large_pbar):
        """a > 0, and halving the scale multiplies a by 2^{1/2}."""
        constants_, result = large_pbar
        coeff = harnack_coefficient(result.field, constants_)
        assert coeff.a > 0
        assert coeff.relative_spread <= 0.15

        base = harnack_coefficient(result.field, constants_, window=(2.0, 4.0))
        rescaled = quadratic_rescale(result.field, 0.5, target=result.field.grid)
        scaled = harnack_coefficient(rescaled, constants_, window=(4.0, 8.0))
        assert scaled.a == pytest.approx(math.sqrt(2.0) * base.a, rel=0.1)


@pytest.mark.slow
class TestClassificationAcceptance:
    """The vertex trichotomy on solved local problems."""

    @pytest.mark.parametrize(
        ("f0", "outer", "kind"),
        [
            (1.25, OuterData.PBAR, RegularityKind.CONICAL),
            (0.75, OuterData.PBAR, RegularityKind.C2ALPHA),
            (0.75, OuterData.PUNDER, RegularityKind.CONICAL),
            (1.0, OuterData.PBAR, RegularityKind.C2),
        ],
    )
    def test_trichotomy(self, f0, outer, kind):
        """Each branch yields its regularity class."""
        vertex = VertexData(label="v", f0=f0, p1=1.0, p2=1.0, outer=outer)
        assert classify_vertex(vertex).kind is kind

    def test_log_modulus(self):
        """At c = 1, u >= q and u₁₂·|log r| varies by at most a factor 2."""
        result = log_modulus_experiment(0.1)
        assert result.lower_margin >= -1e-6
        assert result.ratio is not None
        assert result.ratio <= 2.0


class TestHarmonicAcceptance:
    """Second-order consistency of the five-point Laplacian on v₀."""

    def test_v0_residual_order(self, constants_075):
        """The residual of v₀ drops by 4 when h halves."""

        def data(x1, x2):
            r, theta = polar(np.stack([x1, x2], axis=-1))
            return v0_polar(constants_075, r, theta)

        pts = np.array(
            [[math.cos(0.6), math.sin(0.6)], [math.cos(1.8), math.sin(1.8)]]
        )
        coarse = np.abs(discrete_laplacian(data, pts, 0.02))
        fine = np.abs(discrete_laplacian(data, pts, 0.01))
        order = np.log2(coarse / fine)
        assert np.all(order >= 1.9)
        assert np.all(fine / 0.01**2 < 1.0)


@pytest.mark.slow
class TestComparisonAcceptance:
    """Randomized ordered data give ordered solutions."""

    def test_random_pairs(self, fast_solver_config):
        """20 ordered pairs q + k·x₁x₂, k ∈ [-1/2, 1/2]."""
        grid = make_grid(R=1.0, h=0.0625)
        summary = random_comparison(grid, 1.0, 20, 0, fast_solver_config)
        assert summary.passed
