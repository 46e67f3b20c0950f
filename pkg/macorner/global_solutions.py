"""Global solutions on the quadrant built by shooting on a one-parameter family.

Member t solves det D²u = c on the truncated quadrant with data
P_c^- + t·x₁x₂, which equals q on both axes. The map t ↦ u_t(1,1) is
increasing by comparison, so bisection pins u(1,1) = 1 (P̄_c, t in [0, 2s])
or u(1,1) = 0 (P̲_c, t in (-1, 0)).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import constants
from .errors import BracketError, ConsistencyError, DomainError, GridError
from .model import (
    AngleConstants,
    DirichletProblem,
    Grid2D,
    ScalarField,
    make_pc,
)
from .numerics import BisectionStep, bisect
from .schema import (
    ConvergenceReport,
    ShootingConfig,
    ShootingSummary,
    SolverConfig,
    SolveReport,
)
from .solver import solve_dirichlet
from .types import GridShape, OuterData, Sign

logger = logging.getLogger(__name__)


def _check_family_range(constants_: AngleConstants, t: float) -> None:
    if not 0 < constants_.c < 1:
        raise DomainError(f"the shooting family needs 0 < c < 1, got c={constants_.c}")
    upper = 2.0 * constants_.s
    if not -1 < t <= upper + 1e-12:
        raise DomainError(f"t must lie in (-1, {upper:.6g}], got t={t}")


def solve_family_member(
    constants_: AngleConstants,
    t: float,
    R: float = constants.DEFAULT_CONSTRUCTION_R,
    h: float = constants.DEFAULT_CONSTRUCTION_H,
    config: SolverConfig | None = None,
    shape: GridShape = GridShape.SQUARE,
    init: ScalarField | None = None,
) -> ScalarField:
    """Solve det D²u = c with data P_c^- + t·x₁x₂ on the truncated quadrant.

    For t in [0, 2s] the result is checked against P_c^- <= u <= P_c^+ and a
    warning is logged when the sandwich fails.

    Raises:
        DomainError: If c is outside (0, 1) or t outside (-1, 2s]
        GridError: If (R, h, shape) do not describe a valid grid
        NonConvergenceError: If the solve fails
    """
    _check_family_range(constants_, t)
    grid = Grid2D(h=h, R=R, shape=shape)
    problem = DirichletProblem.for_family(grid, constants_, t)
    u, _ = solve_dirichlet(problem, config, init=init)

    if 0 <= t <= 2.0 * constants_.s + 1e-12:
        active = grid.active_mask
        x1, x2 = grid.mesh
        lower = make_pc(constants_, Sign.MINUS)(x1, x2)
        upper = make_pc(constants_, Sign.PLUS)(x1, x2)
        vals = u.values
        tol = constants.ORDERING_TOL
        below = float(np.max((lower - vals)[active]))
        above = float(np.max((vals - upper)[active]))
        if below > tol or above > tol:
            logger.warning(
                "Family member t=%.6g leaves the P_c^± sandwich by %.3e",
                t,
                max(below, above),
            )
    return u


def check_lower_construction(
    u: ScalarField, constants_: AngleConstants, tol: float = constants.ORDERING_TOL
) -> bool:
    """Whether u <= P_c^- + tol at every active node and u(1/2, 1/2) < 0.

    Each failed condition is logged as a warning.
    """
    grid = u.grid
    active = grid.active_mask
    x1, x2 = grid.mesh
    lower = make_pc(constants_, Sign.MINUS)(x1, x2)
    excess = float(np.max((u.values - lower)[active]))
    centre = float(u(np.asarray(constants.PUNDER_SIGN_POINT)))
    ok = True
    if excess > tol:
        logger.warning("P̲_c candidate rises above P_c^- by %.3e", excess)
        ok = False
    if centre >= 0:
        logger.warning("P̲_c candidate has u(1/2, 1/2) = %.3e >= 0", centre)
        ok = False
    return ok


def shooting_profile(
    constants_: AngleConstants,
    ts,
    R: float = constants.DEFAULT_CONSTRUCTION_R,
    h: float = constants.DEFAULT_CONSTRUCTION_H,
    config: SolverConfig | None = None,
) -> list[tuple[float, float]]:
    """(t, u_t(1,1)) on an increasing t-grid, each solve warm-started."""
    out = []
    previous = None
    for t in sorted(float(t) for t in ts):
        u = solve_family_member(constants_, t, R, h, config, init=previous)
        out.append((t, u.at_node(constants.NORMALIZATION_POINT)))
        previous = u
    return out


# ============================================================================
# Shooting
# ============================================================================


@dataclass
class ShootingResult:
    """Truncated approximation of P̄_c or P̲_c."""

    t_star: float
    field: ScalarField
    target_value: float
    R: float
    h: float
    report: SolveReport
    c: float
    kind: OuterData
    bracket_history: list[tuple[float, float]] = field(default_factory=list)

    @property
    def value_at_target(self) -> float:
        return self.field.at_node(constants.NORMALIZATION_POINT)

    def summary(self) -> ShootingSummary:
        return ShootingSummary(
            kind=self.kind.value,
            c=self.c,
            t_star=self.t_star,
            target=self.target_value,
            R=self.R,
            h=self.h,
            value_at_target=self.value_at_target,
            bracket_history=self.bracket_history,
            report=self.report,
        )


class _Shooter:
    """Bisection driver that caches every solved member by t."""

    def __init__(
        self,
        constants_: AngleConstants,
        R: float,
        h: float,
        config: SolverConfig | None,
        shape: GridShape,
        warm_start: bool,
    ):
        if R < 4:
            raise DomainError(f"shooting needs R >= 4, got R={R}")
        grid = Grid2D(h=h, R=R, shape=shape)
        if not grid.has_node(constants.NORMALIZATION_POINT):
            raise GridError("(1, 1) must be a node of the shooting grid")
        self.constants = constants_
        self.R = R
        self.h = h
        self.config = config
        self.shape = shape
        self.warm_start = warm_start
        self.solved: dict[float, ScalarField] = {}

    def field_at(self, t: float) -> ScalarField:
        if t in self.solved:
            return self.solved[t]
        init = None
        if self.warm_start and self.solved:
            nearest = min(self.solved, key=lambda s: abs(s - t))
            init = self.solved[nearest]
        u = solve_family_member(
            self.constants, t, self.R, self.h, self.config, self.shape, init
        )
        self.solved[t] = u
        return u

    def shoot(
        self, lo: float, hi: float, target: float, shooting: ShootingConfig
    ) -> tuple[float, list[BisectionStep]]:
        history: list[BisectionStep] = []

        def miss(t: float) -> float:
            return self.field_at(t).at_node(constants.NORMALIZATION_POINT) - target

        try:
            t_star = bisect(
                miss,
                lo,
                hi,
                tol_x=shooting.bracket_floor,
                tol_f=shooting.target_tol,
                history=history,
            )
        except BracketError as e:
            raise ConsistencyError(
                f"t -> u_t(1,1) does not bracket {target} on [{lo}, {hi}]",
                evidence={"history": [tuple(step) for step in history]},
            ) from e

        ordered = sorted(history)
        values = [step.value for step in ordered]
        if any(b < a for a, b in zip(values, values[1:], strict=False)):
            raise ConsistencyError(
                "t -> u_t(1,1) is not increasing along the bisection",
                evidence={"history": [tuple(step) for step in ordered]},
            )
        return t_star, history


def _shoot(
    kind: OuterData,
    constants_: AngleConstants,
    R: float,
    h: float,
    config: SolverConfig | None,
    shooting: ShootingConfig | None,
    shape: GridShape,
) -> ShootingResult:
    _check_family_range(constants_, 0.0)
    shooting = shooting or ShootingConfig()
    if kind is OuterData.PBAR:
        lo, hi, target = 0.0, 2.0 * constants_.s, constants.PBAR_TARGET
        shooter = _Shooter(constants_, R, h, config, shape, warm_start=False)
    else:
        lo, hi, target = shooting.punder_lower, 0.0, constants.PUNDER_TARGET
        shooter = _Shooter(constants_, R, h, config, shape, warm_start=True)
        # solve t = 0 first so the far endpoint can warm-start from it
        shooter.field_at(hi)

    t_star, history = shooter.shoot(lo, hi, target, shooting)
    u = shooter.field_at(t_star)
    value = u.at_node(constants.NORMALIZATION_POINT)
    if abs(value - target) > shooting.target_tol:
        logger.warning(
            "Bracket floor reached: u(1,1)=%.10g misses %s by %.3e",
            value,
            target,
            abs(value - target),
        )
    if kind is OuterData.PUNDER:
        check_lower_construction(u, constants_)
    u = u.with_meta(provenance=f"shoot_{kind.value}")
    logger.info(
        "Shooting %s at c=%s R=%s h=%s: t*=%.10g after %d solves",
        kind.value,
        constants_.c,
        R,
        h,
        t_star,
        len(history),
    )
    return ShootingResult(
        t_star=t_star,
        field=u,
        target_value=target,
        R=R,
        h=h,
        report=u.report,
        c=constants_.c,
        kind=kind,
        bracket_history=[(step.t, step.value + target) for step in history],
    )


def shoot_pbar(
    constants_: AngleConstants,
    R: float = constants.DEFAULT_CONSTRUCTION_R,
    h: float = constants.DEFAULT_CONSTRUCTION_H,
    config: SolverConfig | None = None,
    shooting: ShootingConfig | None = None,
    shape: GridShape = GridShape.SQUARE,
) -> ShootingResult:
    """Bisect t in [0, 2s] so that u_t(1,1) = 1.

    Raises:
        DomainError: If c is outside (0, 1) or R < 4
        GridError: If (1, 1) is not a grid node
        ConsistencyError: If the bracket fails or t -> u_t(1,1) is not monotone
    """
    return _shoot(OuterData.PBAR, constants_, R, h, config, shooting, shape)


def shoot_punder(
    constants_: AngleConstants,
    R: float = constants.DEFAULT_CONSTRUCTION_R,
    h: float = constants.DEFAULT_CONSTRUCTION_H,
    config: SolverConfig | None = None,
    shooting: ShootingConfig | None = None,
    shape: GridShape = GridShape.SQUARE,
) -> ShootingResult:
    """Bisect t in (-1, 0) so that u_t(1,1) = 0, warm-starting every member.

    Raises:
        DomainError: If c is outside (0, 1) or R < 4
        GridError: If (1, 1) is not a grid node
        ConsistencyError: If the bracket fails or t -> u_t(1,1) is not monotone
    """
    return _shoot(OuterData.PUNDER, constants_, R, h, config, shooting, shape)


# ============================================================================
# Truncation Convergence
# ============================================================================


def _common_difference(a: ScalarField, b: ScalarField, region_radius: float) -> float:
    n1 = min(a.grid.n1, b.grid.n1)
    n2 = min(a.grid.n2, b.grid.n2)
    va = a.values[:n1, :n2]
    vb = b.values[:n1, :n2]
    radius = a.grid.radius[:n1, :n2]
    mask = (
        a.grid.active_mask[:n1, :n2]
        & b.grid.active_mask[:n1, :n2]
        & (radius <= region_radius + 1e-12)
    )
    if not mask.any():
        raise GridError("the truncations share no nodes in the comparison region")
    return float(np.max(np.abs(va[mask] - vb[mask])))


def extrapolate_R(
    results: list[ShootingResult], region_radius: float = 4.0
) -> ConvergenceReport:
    """Nodewise differences on B_region ∩ Q between consecutive truncations.

    The decay ratio is the geometric mean of consecutive difference ratios.

    Raises:
        GridError: If fewer than two results are given, the spacings differ,
            or R decreases along the list
    """
    if len(results) < 2:
        raise GridError("extrapolation needs at least two truncations")
    h = results[0].field.grid.h
    for res in results:
        grid = res.field.grid
        if not math.isclose(grid.h, h) or grid.shape is GridShape.SECTOR_ANNULUS:
            raise GridError("truncations must share the spacing h on quadrant grids")
    R_values = [res.field.grid.R for res in results]
    if any(b < a for a, b in zip(R_values, R_values[1:], strict=False)):
        raise GridError("truncations must be given at increasing R")

    differences = [
        _common_difference(a.field, b.field, region_radius)
        for a, b in zip(results, results[1:], strict=False)
    ]
    monotone = all(b <= a for a, b in zip(differences, differences[1:], strict=False))
    decay_ratio = None
    if len(differences) >= 2 and all(d > 0 for d in differences):
        decay_ratio = (differences[-1] / differences[0]) ** (
            1.0 / (len(differences) - 1)
        )
    if not monotone:
        logger.warning("Truncation differences do not decrease: %s", differences)
    logger.info("Extrapolation over R=%s: differences %s", R_values, differences)
    return ConvergenceReport(
        R_values=R_values,
        differences=differences,
        decay_ratio=decay_ratio,
        monotone=monotone,
        region_radius=region_radius,
    )
