"""Pydantic models for configuration, input records and JSON reports."""

import math
from collections.abc import Callable
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import constants
from .types import (
    ConicalVerdict,
    GridShape,
    LinearMethod,
    OuterData,
    RegularityKind,
)


def _validate_positive(v: Any, name: str) -> Any:
    """Raise if v is provided and not strictly positive."""
    if v is not None and v <= 0:
        raise ValueError(f"{name} must be positive")
    return v


def _validate_window(v: tuple[float, float] | None, name: str):
    """Raise unless v is None or an increasing pair of positive radii."""
    if v is None:
        return v
    lo, hi = v
    if lo <= 0 or hi <= lo:
        raise ValueError(f"{name} must satisfy 0 < r_min < r_max")
    return v


class _Report(BaseModel):
    """Base for JSON reports: aliases on output, names or aliases on input."""

    model_config = ConfigDict(populate_by_name=True)

    def to_json_dict(self) -> dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)


# ============================================================================
# Solver Configuration and Report
# ============================================================================


class SolverConfig(BaseModel):
    """Newton, line-search and fallback settings for the Monge-Ampère solver."""

    newton_tol: float = Field(
        constants.DEFAULT_NEWTON_TOL,
        description="Residual tolerance relative to max(1, ||f||_inf)",
    )
    max_newton: int = Field(constants.DEFAULT_MAX_NEWTON, description="Newton cap")
    damping: float = Field(
        constants.DEFAULT_DAMPING, description="Backtracking factor in (0, 1)"
    )
    armijo: float = Field(constants.DEFAULT_ARMIJO, description="Armijo constant")
    continuation_steps: int = Field(
        constants.DEFAULT_CONTINUATION_STEPS,
        description="Parameter steps from t = 0 for family problems",
    )
    convexity_penalty_weight: float = Field(
        constants.DEFAULT_PENALTY_WEIGHT,
        description="Weight of the linear penalty on negative second differences",
    )
    linear_method: LinearMethod = Field(
        LinearMethod.DIRECT, description="Inner linear solver"
    )
    linear_tol: float = Field(
        constants.DEFAULT_LINEAR_TOL, description="Relative inner-solve tolerance"
    )
    gauss_seidel_sweeps: int = Field(
        constants.GAUSS_SEIDEL_SWEEPS, description="Fallback sweeps when Newton stalls"
    )

    @field_validator(
        "newton_tol",
        "max_newton",
        "armijo",
        "continuation_steps",
        "convexity_penalty_weight",
        "linear_tol",
        "gauss_seidel_sweeps",
    )
    @classmethod
    def validate_positive(cls, v, info):
        return _validate_positive(v, info.field_name)

    @field_validator("damping")
    @classmethod
    def validate_damping(cls, v: float) -> float:
        """Ensure the backtracking factor lies strictly inside (0, 1)."""
        if not 0 < v < 1:
            raise ValueError("damping must lie in (0, 1)")
        return v


class ShootingConfig(BaseModel):
    """Bisection settings for the normalized family members."""

    target_tol: float = Field(
        constants.SHOOT_TARGET_TOL, description="Tolerance on u(1,1) - target"
    )
    bracket_floor: float = Field(
        constants.SHOOT_BRACKET_FLOOR, description="Smallest bracket width in t"
    )
    punder_lower: float = Field(
        constants.PUNDER_T_LOWER, description="Lower end of the P-under bracket"
    )

    @field_validator("target_tol", "bracket_floor")
    @classmethod
    def validate_positive(cls, v, info):
        return _validate_positive(v, info.field_name)

    @field_validator("punder_lower")
    @classmethod
    def validate_lower(cls, v: float) -> float:
        """The family is defined for t > -1 only."""
        if not -1 < v < 0:
            raise ValueError("punder_lower must lie in (-1, 0)")
        return v


class ContinuationStep(_Report):
    """One warm-started solve along a parameter path."""

    t: float
    iterations: int
    residual: float


class SolveReport(_Report):
    """Outcome of a Dirichlet solve."""

    converged: bool
    iterations: int = 0
    final_residual: float = Field(math.inf, alias="residual")
    continuation: list[ContinuationStep] = Field(default_factory=list)
    convexity_violation: float = 0.0
    fallback_sweeps: int = 0
    tolerance: float = Field(
        constants.DEFAULT_NEWTON_TOL, description="Absolute residual target used"
    )

    @model_validator(mode="after")
    def validate_converged(self) -> "SolveReport":
        """A converged report must meet its own tolerance."""
        if self.converged and self.final_residual > self.tolerance:
            raise ValueError("converged report must satisfy residual <= tolerance")
        return self


class ComparisonTrial(_Report):
    k_lo: float
    k_hi: float
    ordered: bool


class ComparisonSummary(_Report):
    """Solutions for random ordered data pairs q + k·x₁x₂ on one grid."""

    c: float
    seed: int
    spread: float
    trials: list[ComparisonTrial]
    passed: bool


# ============================================================================
# Field Metadata
# ============================================================================


class FieldMeta(BaseModel):
    """Provenance record of a ScalarField, also its sidecar JSON."""

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    c: float | None = None
    t: float | None = None
    h: float
    R: float
    shape: GridShape = GridShape.SQUARE
    provenance: str = "sampled"
    lam: float | None = Field(None, alias="lambda")
    report_id: str | None = None
    x1_min: float = 0.0
    sector_alpha: float | None = None
    inner_radius: float | None = None

    @field_validator("h", "R")
    @classmethod
    def validate_positive(cls, v, info):
        return _validate_positive(v, info.field_name)


# ============================================================================
# Fit and Analysis Reports
# ============================================================================


class FitResult(_Report):
    """Least-squares line through (log r, log y) on a radius window."""

    slope: float | None
    intercept: float | None
    r_min: float = Field(alias="rmin")
    r_max: float = Field(alias="rmax")
    residual: float = 0.0
    point_count: int = Field(0, alias="n")
    excluded_count: int = 0
    degenerate: bool = False

    @model_validator(mode="after")
    def validate_window(self) -> "FitResult":
        """Windows are increasing; valid fits carry at least three points."""
        if not self.r_min < self.r_max:
            raise ValueError("r_min must be smaller than r_max")
        if not self.degenerate and self.point_count < constants.FIT_MIN_POINTS:
            raise ValueError("a fit needs at least 3 points")
        return self


class AuditViolation(_Report):
    entry: str
    x1: float
    x2: float
    value: float


class HessianAudit(_Report):
    """Bounds of a discrete Hessian against the quadrant estimates."""

    max_u11: float
    max_u22: float
    max_abs_u12: float
    min_eigenvalue: float
    det_min: float
    det_max: float
    s: float
    tol_h: float
    passed: bool
    violations: list[AuditViolation] = Field(default_factory=list)


class U12Limits(_Report):
    near: float
    far: float
    near_window: tuple[float, float]
    far_window: tuple[float, float]
    near_profile: list[tuple[float, float]] = Field(default_factory=list)
    far_profile: list[tuple[float, float]] = Field(default_factory=list)


class HarnackCoefficient(_Report):
    """Amplitude of the leading sector mode in u∘A - q."""

    a: float
    radii: list[float]
    a_r: list[float]
    window: tuple[float, float]
    residual: float = Field(description="Spread max(a_r) - min(a_r)")

    @property
    def relative_spread(self) -> float:
        if self.a == 0:
            return math.inf if self.residual > 0 else 0.0
        return self.residual / abs(self.a)


class ConicalTrend(_Report):
    verdict: ConicalVerdict
    radii: list[float]
    min_eigenvalues: list[float]
    slope: float | None
    monotone: bool
    threshold: float


class HessianLimit(_Report):
    """Entrywise distance of D²u from D²P_c^- on far arcs."""

    deviation: float
    radii: list[float]
    per_radius: list[float]
    decreasing: bool


class ConvergenceReport(_Report):
    """Nodewise differences between consecutive truncations."""

    R_values: list[float]
    differences: list[float]
    decay_ratio: float | None
    monotone: bool
    region_radius: float


class ShootingSummary(_Report):
    kind: str
    c: float
    t_star: float
    target: float
    R: float
    h: float
    value_at_target: float
    bracket_history: list[tuple[float, float]]
    report: SolveReport


class DecayStep(_Report):
    rho: float
    max_on_unit_arc: float
    residual: float


class SubsolutionMargin(_Report):
    margin: float
    strict: bool
    note: str | None = None
    nodes: int = 0


class RegularityVerdict(_Report):
    """Vertex classification with the evidence behind it."""

    kind: RegularityKind
    alpha_measured: float | None = Field(None, alias="alpha")
    c_eff: float
    evidence: dict[str, Any] = Field(default_factory=dict)
    notes: list[str] = Field(default_factory=list)
    label: str | None = None

    @model_validator(mode="after")
    def validate_alpha(self) -> "RegularityVerdict":
        """C2alpha must carry a positive measured exponent."""
        if self.kind == RegularityKind.C2ALPHA and not (
            self.alpha_measured is not None and self.alpha_measured > 0
        ):
            raise ValueError("C2alpha verdict requires alpha_measured > 0")
        return self


class LogModulusResult(_Report):
    epsilon: float
    samples: list[tuple[float, float]]
    fit: FitResult | None
    ratio: float | None
    lower_margin: float
    two_radius_ratio: float | None = None
    degenerate: bool = False
    passed: bool = False


# ============================================================================
# Input Records
# ============================================================================


class VertexData(BaseModel):
    """Local data at a convex corner, in quadrant coordinates.

    ``p1`` and ``p2`` are the second derivatives of the boundary data along
    the two edges at the vertex. ``corner_matrix`` is an optional linear map
    taking the quadrant onto the actual corner; when present it rescales the
    effective constant by its squared determinant.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    label: str | None = Field(None, description="Identifier echoed in the verdict")
    f0: float = Field(..., description="Right-hand side at the vertex")
    p1: float = Field(..., description="Second derivative of the data along x1")
    p2: float = Field(..., description="Second derivative of the data along x2")
    corner_matrix: list[list[float]] | None = Field(
        None, description="2x2 linear map from the quadrant to the corner"
    )
    outer: OuterData = Field(
        OuterData.PBAR, description="Outer truncation data when no sampler is given"
    )
    outer_cross: float | None = Field(
        None,
        description="Coefficient k of the outer data q + k*x1*x2 (normalized frame)",
    )
    rhs: Callable[..., Any] | None = Field(None, exclude=True)
    boundary: Callable[..., Any] | None = Field(None, exclude=True)
    subsolution: Any | None = Field(None, exclude=True)

    @field_validator("f0", "p1", "p2")
    @classmethod
    def validate_positive(cls, v, info):
        return _validate_positive(v, info.field_name)

    @field_validator("corner_matrix")
    @classmethod
    def validate_corner_matrix(cls, v):
        """Ensure the corner map is a nonsingular 2x2 matrix."""
        if v is None:
            return v
        if len(v) != 2 or any(len(row) != 2 for row in v):
            raise ValueError("corner_matrix must be 2x2")
        det = v[0][0] * v[1][1] - v[0][1] * v[1][0]
        if det == 0:
            raise ValueError("corner_matrix must be nonsingular")
        return v


# ============================================================================
# Run Configuration
# ============================================================================


class WindowConfig(BaseModel):
    near: tuple[float, float] | None = None
    far: tuple[float, float] | None = None

    @field_validator("near", "far")
    @classmethod
    def validate_window(cls, v, info):
        return _validate_window(v, info.field_name)


class ConicalConfig(BaseModel):
    eigen_fraction: float = Field(
        constants.CONICAL_EIGEN_FRACTION,
        description="Regular when min eigenvalue stays above this times sqrt(c)",
    )
    slope: float = Field(
        constants.CONICAL_SLOPE, description="Minimum log-log slope for conical"
    )
    ladder_points: int = Field(6, description="Radii in the default ladder")

    @field_validator("eigen_fraction", "slope")
    @classmethod
    def validate_positive(cls, v, info):
        return _validate_positive(v, info.field_name)

    @field_validator("ladder_points")
    @classmethod
    def validate_ladder(cls, v: int) -> int:
        if v < constants.CONICAL_MIN_RADII:
            raise ValueError("ladder_points must be at least 4")
        return v


class ClassifierConfig(BaseModel):
    """Grid, solver and analysis settings for the vertex pipeline."""

    R: float = Field(constants.DEFAULT_CONSTRUCTION_R, description="Truncation")
    h: float = Field(constants.DEFAULT_CONSTRUCTION_H, description="Grid spacing")
    shape: GridShape = GridShape.SQUARE
    solver: SolverConfig = Field(default_factory=SolverConfig)
    windows: WindowConfig = Field(default_factory=WindowConfig)
    conical: ConicalConfig = Field(default_factory=ConicalConfig)
    unit_band: float = Field(constants.C_EFF_UNIT_BAND, description="|c_eff-1| band")
    supercritical_cross: float = Field(
        constants.SUPERCRITICAL_CROSS,
        description="Outer x1*x2 coefficient used when c_eff > 1",
    )

    @field_validator("R", "h", "unit_band")
    @classmethod
    def validate_positive(cls, v, info):
        return _validate_positive(v, info.field_name)


class RunConfig(BaseModel):
    """Flat configuration of one CLI invocation."""

    command: str
    c: float = 0.75
    t: float = 0.0
    R: float = constants.DEFAULT_CONSTRUCTION_R
    h: float = constants.DEFAULT_CONSTRUCTION_H
    shape: GridShape = GridShape.SQUARE
    near_window: tuple[float, float] | None = None
    far_window: tuple[float, float] | None = None
    newton_tol: float = constants.DEFAULT_NEWTON_TOL
    max_newton: int = constants.DEFAULT_MAX_NEWTON
    continuation_steps: int = constants.DEFAULT_CONTINUATION_STEPS
    out: Path = Path("out")
    seed: int = 0
    threads: int = constants.DEFAULT_THREADS
    pairs: int = constants.COMPARISON_PAIRS
    rho: list[float] = Field(default_factory=lambda: list(constants.DECAY_LADDER))
    beta: float = constants.DECAY_BETA
    epsilon: float = 0.1
    c_values: list[float] = Field(default_factory=lambda: [0.5, 0.75])
    analyses: list[str] = Field(default_factory=list)

    @field_validator(
        "c", "R", "h", "newton_tol", "max_newton", "threads", "beta", "pairs"
    )
    @classmethod
    def validate_positive(cls, v, info):
        return _validate_positive(v, info.field_name)

    @field_validator("near_window", "far_window")
    @classmethod
    def validate_window(cls, v, info):
        return _validate_window(v, info.field_name)

    @field_validator("rho")
    @classmethod
    def validate_rho(cls, v: list[float]) -> list[float]:
        """Inner radii of sector annuli lie in (0, 1)."""
        for rho in v:
            if not 0 < rho < 1:
                raise ValueError("rho must lie in (0, 1)")
        return v

    @field_validator("c_values")
    @classmethod
    def validate_c_values(cls, v: list[float]) -> list[float]:
        for c in v:
            if c <= 0:
                raise ValueError("c_values must be positive")
        return v

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            newton_tol=self.newton_tol,
            max_newton=self.max_newton,
            continuation_steps=self.continuation_steps,
        )

    def window_config(self) -> WindowConfig:
        return WindowConfig(near=self.near_window, far=self.far_window)


class Manifest(BaseModel):
    """Index of every artifact a command wrote."""

    command: str
    version: str
    config_hash: str
    artifacts: list[str]
