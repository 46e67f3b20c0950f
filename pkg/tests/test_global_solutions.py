"""Tests for the shooting family, P̄_c/P̲_c shooting and R-extrapolation."""

import numpy as np
import pytest

from macorner.asymptotics import ordering_check
from macorner.errors import ConsistencyError, DomainError, GridError
from macorner.global_solutions import (
    ShootingResult,
    check_lower_construction,
    extrapolate_R,
    shoot_pbar,
    shoot_punder,
    shooting_profile,
    solve_family_member,
)
from macorner.model import Q_HALF, QuadraticPolynomial, make_angle_constants, make_pc
from macorner.types import GridShape, OuterData, Sign
from tests.conftest import (
    assert_field_matches,
    make_grid,
    make_solve_report,
    sample_function,
    sample_quadratic,
)

_R = 4.0
_H = 0.125


def make_shooting_result(R: float, offset: float, h: float = _H) -> ShootingResult:
    """A fake truncation whose field is q + offset."""
    shifted = QuadraticPolynomial(1.0, 0.0, 1.0, d=offset)
    field = sample_quadratic(shifted, make_grid(R=R, h=h))
    return ShootingResult(
        t_star=0.5,
        field=field,
        target_value=1.0,
        R=R,
        h=h,
        report=make_solve_report(),
        c=0.75,
        kind=OuterData.PBAR,
    )


@pytest.fixture(scope="module")
def pbar_result():
    """P̄_c at c = 3/4 on the smallest admissible truncation."""
    return shoot_pbar(make_angle_constants(0.75), R=_R, h=_H)


class TestSolveFamilyMember:
    """Tests for single family members."""

    def test_endpoints_are_pc(self, constants_075):
        """t = 0 and t = 2s reproduce P_c^- and P_c^+."""
        lower = solve_family_member(constants_075, 0.0, R=_R, h=_H)
        upper = solve_family_member(constants_075, 1.0, R=_R, h=_H)
        assert_field_matches(lower, make_pc(constants_075, Sign.MINUS))
        assert_field_matches(upper, make_pc(constants_075, Sign.PLUS))

    @pytest.mark.parametrize("t", [-1.0, -1.5, 1.01])
    def test_t_out_of_range(self, constants_075, t):
        """Should raise DomainError outside (-1, 2s]."""
        with pytest.raises(DomainError):
            solve_family_member(constants_075, t, R=_R, h=_H)

    def test_unit_constant_rejected(self):
        """The family needs c < 1."""
        with pytest.raises(DomainError):
            solve_family_member(make_angle_constants(1.0), 0.0, R=_R, h=_H)

    def test_bad_grid(self, constants_075):
        """Should raise GridError when R/h is not an integer."""
        with pytest.raises(GridError):
            solve_family_member(constants_075, 0.5, R=4.1, h=_H)

    def test_sandwich_warning(self, constants_075, caplog, mocker):
        """A member leaving the P_c^± sandwich is reported in the log."""
        above = sample_quadratic(Q_HALF.plus_cross(5.0), make_grid(R=_R, h=_H))
        mocker.patch(
            "macorner.global_solutions.solve_dirichlet",
            return_value=(above, make_solve_report()),
        )
        solve_family_member(constants_075, 0.5, R=_R, h=_H)
        assert "sandwich" in caplog.text


class TestCheckLowerConstruction:
    """Tests for the P̲_c post-conditions."""

    def test_member_below_pc_minus(self, constants_075, caplog):
        """P_c^- - 0.9·x₁x₂ lies below P_c^- and is negative at (1/2, 1/2)."""
        member = make_pc(constants_075, Sign.MINUS).plus_cross(-0.9)
        u = sample_quadratic(member, make_grid(R=_R, h=_H))
        assert check_lower_construction(u, constants_075)
        assert "P̲_c" not in caplog.text

    def test_pc_minus_is_not_negative(self, constants_075, caplog):
        """P_c^- itself fails the strict sign at (1/2, 1/2)."""
        u = sample_quadratic(make_pc(constants_075, Sign.MINUS), make_grid(R=_R, h=_H))
        assert not check_lower_construction(u, constants_075)
        assert "u(1/2, 1/2)" in caplog.text
        assert "rises above" not in caplog.text

    def test_above_pc_minus(self, constants_075, caplog):
        """A member with t > 0 rises above P_c^-."""
        member = make_pc(constants_075, Sign.MINUS).plus_cross(0.1)
        u = sample_quadratic(member, make_grid(R=_R, h=_H))
        assert not check_lower_construction(u, constants_075)
        assert "rises above P_c^-" in caplog.text


class TestShootingProfile:
    """Tests for t ↦ u_t(1,1)."""

    def test_increasing(self, constants_075):
        """u_t(1,1) grows from 1 - s to 1 + s across [0, 2s]."""
        profile = shooting_profile(constants_075, [1.0, 0.0, 0.5], R=_R, h=_H)
        ts = [t for t, _ in profile]
        values = [v for _, v in profile]
        assert ts == [0.0, 0.5, 1.0]
        assert values[0] == pytest.approx(0.5)
        assert values[-1] == pytest.approx(1.5)
        assert values[0] < values[1] < values[2]

    def test_strictly_increasing_on_nine_points(self, constants_075):
        """u_t(1,1) increases strictly on 9 equally spaced t in [0, 2s]."""
        ts = np.linspace(0.0, 2.0 * constants_075.s, 9)
        values = [v for _, v in shooting_profile(constants_075, ts, R=_R, h=_H)]
        assert all(a < b for a, b in zip(values, values[1:], strict=False))


class TestShootPbar:
    """Tests for P̄_c shooting."""

    def test_hits_target(self, pbar_result):
        """u(1,1) should equal 1 to the shooting tolerance."""
        assert pbar_result.value_at_target == pytest.approx(1.0, abs=1e-6)
        assert 0.0 < pbar_result.t_star < 1.0
        assert pbar_result.kind is OuterData.PBAR

    def test_sandwiched_between_pc(self, pbar_result, constants_075):
        """P_c^- <= P̄_c <= P_c^+ at every node."""
        grid = pbar_result.field.grid
        lower = sample_quadratic(make_pc(constants_075, Sign.MINUS), grid)
        upper = sample_quadratic(make_pc(constants_075, Sign.PLUS), grid)
        assert ordering_check(lower, pbar_result.field)
        assert ordering_check(pbar_result.field, upper)

    def test_history_is_monotone(self, pbar_result):
        """u(1,1) increases with t along the recorded bisection."""
        history = sorted(pbar_result.bracket_history)
        values = [v for _, v in history]
        assert values == sorted(values)
        assert history[0] == (0.0, pytest.approx(0.5))

    def test_summary(self, pbar_result):
        """The summary carries c, t* and the solve report."""
        summary = pbar_result.summary()
        assert summary.kind == "pbar"
        assert summary.c == 0.75
        assert summary.t_star == pbar_result.t_star
        assert summary.report.converged
        assert pbar_result.field.meta.provenance == "shoot_pbar"

    def test_small_truncation_rejected(self, constants_075):
        """Should raise DomainError for R < 4."""
        with pytest.raises(DomainError):
            shoot_pbar(constants_075, R=2.0, h=_H)

    def test_non_monotone_history_is_inconsistent(self, constants_075, mocker):
        """A decreasing t ↦ u_t(1,1) raises ConsistencyError."""
        grid = make_grid(R=_R, h=_H)

        def fake_member(constants_, t, R, h, config, shape, init):
            # decreasing in t except at the endpoints
            value = {0.0: 0.5, 1.0: 1.5}.get(t, 2.0 - t)
            return sample_function(lambda x1, x2: value * Q_HALF(x1, x2), grid)

        mocker.patch(
            "macorner.global_solutions.solve_family_member", side_effect=fake_member
        )
        with pytest.raises(ConsistencyError):
            shoot_pbar(constants_075, R=_R, h=_H)


class TestShootPunder:
    """Tests for P̲_c shooting."""

    @pytest.mark.slow
    def test_hits_zero(self, constants_075):
        """u(1,1) should vanish with t* in (-1, 0)."""
        result = shoot_punder(constants_075, R=_R, h=_H)
        assert result.value_at_target == pytest.approx(0.0, abs=1e-6)
        assert -1.0 < result.t_star < 0.0
        assert result.field.meta.provenance == "shoot_punder"
        assert check_lower_construction(result.field, constants_075)

    def test_postconditions_checked(self, constants_075, caplog, mocker):
        """Members lifted by a constant leave P_c^- and stay positive at (1/2, 1/2)."""
        grid = make_grid(R=_R, h=_H)

        def fake_member(constants_, t, R, h, config, shape, init):
            lifted = make_pc(constants_, Sign.MINUS).plus_cross(t)
            return sample_function(lambda x1, x2: lifted(x1, x2) + 0.01, grid)

        mocker.patch(
            "macorner.global_solutions.solve_family_member", side_effect=fake_member
        )
        result = shoot_punder(constants_075, R=_R, h=_H)
        assert result.t_star == pytest.approx(-0.51, abs=1e-5)
        assert "rises above P_c^-" in caplog.text
        assert "u(1/2, 1/2)" in caplog.text

    def test_unit_constant_rejected(self):
        """Should raise DomainError at c = 1."""
        with pytest.raises(DomainError):
            shoot_punder(make_angle_constants(1.0), R=_R, h=_H)


class TestExtrapolateR:
    """Tests for truncation convergence reports."""

    def test_geometric_decay(self):
        """Differences 0.05, 0.025, 0.0125 decay with ratio 1/2."""
        results = [
            make_shooting_result(R, offset)
            for R, offset in ((4.0, 0.1), (6.0, 0.05), (8.0, 0.025), (10.0, 0.0125))
        ]
        report = extrapolate_R(results, region_radius=2.0)
        assert report.R_values == [4.0, 6.0, 8.0, 10.0]
        assert report.differences == pytest.approx([0.05, 0.025, 0.0125])
        assert report.monotone
        assert report.decay_ratio == pytest.approx(0.5)

    def test_doubling_truncations(self):
        """R = 8, 16, 32 give differences that halve on B_4."""
        results = [
            make_shooting_result(R, offset)
            for R, offset in ((8.0, 0.04), (16.0, 0.02), (32.0, 0.01))
        ]
        report = extrapolate_R(results)
        assert report.R_values == [8.0, 16.0, 32.0]
        assert report.differences == pytest.approx([0.02, 0.01])
        assert report.monotone
        assert report.decay_ratio == pytest.approx(0.5)

    def test_non_monotone(self):
        """Growing differences are reported as non-monotone."""
        results = [
            make_shooting_result(R, offset)
            for R, offset in ((4.0, 0.0), (6.0, 0.01), (8.0, 0.1))
        ]
        assert not extrapolate_R(results).monotone

    def test_single_result_rejected(self):
        """Should raise GridError with fewer than two truncations."""
        with pytest.raises(GridError):
            extrapolate_R([make_shooting_result(4.0, 0.0)])

    def test_mixed_spacing_rejected(self):
        """Should raise GridError when h differs."""
        results = [make_shooting_result(4.0, 0.0), make_shooting_result(6.0, 0.0, 0.25)]
        with pytest.raises(GridError):
            extrapolate_R(results)

    def test_decreasing_R_rejected(self):
        """Should raise GridError when R decreases."""
        results = [make_shooting_result(6.0, 0.0), make_shooting_result(4.0, 0.0)]
        with pytest.raises(GridError):
            extrapolate_R(results)

    def test_quarter_disc_grids(self):
        """Quarter-disc truncations share nodes near the vertex."""
        results = [make_shooting_result(R, 0.0) for R in (4.0, 6.0)]
        for res in results:
            grid = make_grid(R=res.R, h=_H, shape=GridShape.QUARTER_DISC)
            res.field = sample_quadratic(Q_HALF, grid)
        report = extrapolate_R(results)
        assert report.differences == [0.0]
