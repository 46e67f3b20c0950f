"""Measurements predicted by the classification of global solutions.

All analyses read an immutable ScalarField or the HessianField derived from
it. Arc statistics of Hessian entries bin the valid nodes with
|r_node - r| < h/2; statistics of the field itself go through
:func:`macorner.numerics.radial_profile`.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from . import constants
from .errors import (
    DomainError,
    ExtentError,
    GridError,
    InsufficientDataError,
)
from .model import (
    Q_HALF,
    AngleConstants,
    Grid2D,
    QuadraticPolynomial,
    ScalarField,
    make_affine,
    make_angle_constants,
    make_pc,
)
from .numerics import fit_loglog_slope, radial_profile
from .schema import (
    AuditViolation,
    ConicalConfig,
    ConicalTrend,
    FitResult,
    HarnackCoefficient,
    HessianAudit,
    HessianLimit,
    U12Limits,
    WindowConfig,
)
from .types import ALL_ANALYSES, ConicalVerdict, GridShape, Sign

logger = logging.getLogger(__name__)


# ============================================================================
# Hessian Field
# ============================================================================


@dataclass(frozen=True, eq=False)
class HessianField:
    """Central-difference Hessian with a validity mask.

    Entries are NaN off the valid nodes, which are interior nodes at least
    2h from every boundary of the domain.
    """

    grid: Grid2D
    u11: np.ndarray
    u12: np.ndarray
    u22: np.ndarray
    valid: np.ndarray

    @cached_property
    def eigenvalues(self) -> tuple[np.ndarray, np.ndarray]:
        """(λ_min, λ_max) per node."""
        mean = 0.5 * (self.u11 + self.u22)
        radius = np.hypot(0.5 * (self.u11 - self.u22), self.u12)
        return mean - radius, mean + radius

    @property
    def min_eigenvalue(self) -> np.ndarray:
        return self.eigenvalues[0]

    @cached_property
    def det(self) -> np.ndarray:
        return self.u11 * self.u22 - self.u12 * self.u12

    def arc_nodes(self, r: float) -> np.ndarray:
        """Valid nodes within h/2 of the circle of radius r."""
        near = np.abs(self.grid.radius - r) < 0.5 * self.grid.h
        return self.valid & near

    def arc_mean(self, values: np.ndarray, r: float) -> float:
        """Average of a per-node array over the valid nodes of one arc.

        Raises:
            ExtentError: If no valid node lies on the arc
        """
        sel = self.arc_nodes(r)
        if not sel.any():
            raise ExtentError(f"no valid Hessian nodes on the arc r={r:.6g}")
        return float(np.mean(values[sel]))

    def max_valid_radius(self) -> float:
        if not self.valid.any():
            return 0.0
        return float(np.max(self.grid.radius[self.valid]))


def hessian_field(u: ScalarField) -> HessianField:
    """Central differences; u₁₂ uses the four-corner cross difference."""
    grid = u.grid
    h2 = grid.h * grid.h
    p = np.pad(np.asarray(u.values, dtype=float), 1, constant_values=np.nan)
    c = p[1:-1, 1:-1]
    u11 = (p[2:, 1:-1] - 2.0 * c + p[:-2, 1:-1]) / h2
    u22 = (p[1:-1, 2:] - 2.0 * c + p[1:-1, :-2]) / h2
    u12 = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4.0 * h2)

    x1, x2 = grid.mesh
    band = constants.HESSIAN_VALID_BAND * grid.h - 1e-12
    far = grid.distance_to_boundary(np.stack([x1, x2], axis=-1)) >= band
    valid = (
        grid.interior_mask
        & far
        & np.isfinite(u11)
        & np.isfinite(u22)
        & np.isfinite(u12)
    )
    for arr in (u11, u12, u22):
        arr[~valid] = np.nan
    return HessianField(grid=grid, u11=u11, u12=u12, u22=u22, valid=valid)


def hessian_audit(
    H: HessianField,
    constants_: AngleConstants,
    tol_h: float = constants.HESSIAN_TOL,
) -> HessianAudit:
    """Check u₁₁ <= 1, u₂₂ <= 1 and |u₁₂| <= s over the valid nodes."""
    if not H.valid.any():
        raise ExtentError("the Hessian field has no valid nodes")
    x1, x2 = H.grid.mesh
    s = constants_.s
    checks = [
        ("u11", H.u11, 1.0),
        ("u22", H.u22, 1.0),
        ("u12", np.abs(H.u12), s),
    ]
    violations = []
    for name, values, bound in checks:
        worst = np.nanargmax(np.where(H.valid, values, -np.inf))
        idx = np.unravel_index(worst, values.shape)
        if values[idx] > bound + tol_h:
            violations.append(
                AuditViolation(
                    entry=name,
                    x1=float(x1[idx]),
                    x2=float(x2[idx]),
                    value=float(values[idx]),
                )
            )
    audit = HessianAudit(
        max_u11=float(np.nanmax(H.u11)),
        max_u22=float(np.nanmax(H.u22)),
        max_abs_u12=float(np.nanmax(np.abs(H.u12))),
        min_eigenvalue=float(np.nanmin(H.min_eigenvalue)),
        det_min=float(np.nanmin(H.det)),
        det_max=float(np.nanmax(H.det)),
        s=s,
        tol_h=tol_h,
        passed=not violations,
        violations=violations,
    )
    if violations:
        for v in violations:
            logger.warning(
                "Hessian audit: %s=%.4g at (%.4g, %.4g)", v.entry, v.value, v.x1, v.x2
            )
    return audit


# ============================================================================
# Windows and Arc Statistics
# ============================================================================


def default_windows(grid: Grid2D) -> WindowConfig:
    """Near [8h, max(R/40, 32h)] and far [R/3, 2R/3]."""
    h, R = grid.h, grid.R
    near = (
        constants.NEAR_WINDOW_MIN_H * h,
        max(R * constants.NEAR_WINDOW_FRACTION, constants.NEAR_WINDOW_FLOOR_H * h),
    )
    lo, hi = constants.FAR_WINDOW
    return WindowConfig(near=near, far=(lo * R, hi * R))


def _window_radii(window: tuple[float, float], n: int) -> np.ndarray:
    lo, hi = window
    if not 0 < lo < hi:
        raise DomainError("window must satisfy 0 < r_min < r_max")
    return np.geomspace(lo, hi, n)


def _arc_profile(
    H: HessianField, values: np.ndarray, window: tuple[float, float], n: int
) -> list[tuple[float, float]]:
    if window[1] > H.max_valid_radius() + 0.5 * H.grid.h:
        raise ExtentError(f"window {window} leaves the Hessian validity mask")
    return [(float(r), H.arc_mean(values, r)) for r in _window_radii(window, n)]


def u12_limits(
    H: HessianField,
    near_window: tuple[float, float] | None = None,
    far_window: tuple[float, float] | None = None,
    n_arcs: int = constants.DEFAULT_WINDOW_POINTS,
) -> U12Limits:
    """Median over arcs of the arc-averaged u₁₂ in each window.

    Raises:
        DomainError: If fewer than 3 arcs are requested or the near window
            starts below 8h
        ExtentError: If an arc has no valid node
    """
    if n_arcs < constants.MIN_ARCS_PER_WINDOW:
        raise DomainError("each window needs at least 3 arcs")
    defaults = default_windows(H.grid)
    near_window = near_window or defaults.near
    far_window = far_window or defaults.far
    if near_window[0] < constants.NEAR_WINDOW_MIN_H * H.grid.h - 1e-12:
        raise DomainError("the near window must start at 8h or beyond")
    near = _arc_profile(H, H.u12, near_window, n_arcs)
    far = _arc_profile(H, H.u12, far_window, n_arcs)
    limits = U12Limits(
        near=float(np.median([v for _, v in near])),
        far=float(np.median([v for _, v in far])),
        near_window=near_window,
        far_window=far_window,
        near_profile=near,
        far_profile=far,
    )
    logger.info("u12 limits: near %.4g, far %.4g", limits.near, limits.far)
    return limits


def hessian_limit_at_infinity(
    H: HessianField,
    constants_: AngleConstants,
    far_window: tuple[float, float] | None = None,
    n_arcs: int = 4,
) -> HessianLimit:
    """Entrywise max of |D²u - D²P_c^-| on far arcs."""
    far_window = far_window or default_windows(H.grid).far
    if far_window[1] > H.max_valid_radius() + 0.5 * H.grid.h:
        raise ExtentError(f"window {far_window} leaves the Hessian validity mask")
    s = constants_.s
    deviation = np.fmax(
        np.fmax(np.abs(H.u11 - 1.0), np.abs(H.u22 - 1.0)), np.abs(H.u12 + s)
    )
    radii = _window_radii(far_window, n_arcs)
    per_radius = []
    for r in radii:
        sel = H.arc_nodes(r)
        if not sel.any():
            raise ExtentError(f"no valid Hessian nodes on the arc r={r:.6g}")
        per_radius.append(float(np.max(deviation[sel])))
    decreasing = all(b <= a for a, b in zip(per_radius, per_radius[1:], strict=False))
    return HessianLimit(
        deviation=max(per_radius),
        radii=[float(r) for r in radii],
        per_radius=per_radius,
        decreasing=decreasing,
    )


# ============================================================================
# Exponents and Coefficients
# ============================================================================


def deviation_exponent(
    u: ScalarField,
    reference: QuadraticPolynomial,
    window: tuple[float, float],
    n_radii: int = constants.DEFAULT_WINDOW_POINTS,
) -> FitResult:
    """Log-log slope of sup over arcs of |u - reference| across the window.

    Profiles that sit entirely in the round-off band of the field return a
    degenerate FitResult without a slope.

    Raises:
        InsufficientDataError: If fewer than 3 usable radii remain
    """
    radii = _window_radii(window, n_radii)
    profile = radial_profile(u, reference, radii, margin=2.0 * u.grid.h)
    floor = constants.DEGENERACY_EPS_FACTOR * np.finfo(float).eps * max(
        1.0, u.max_abs()
    )
    values = [v for _, v in profile]
    if all(v <= floor for v in values):
        logger.debug("Deviation profile below %.3e on %s: degenerate", floor, window)
        return FitResult(
            slope=None,
            intercept=None,
            r_min=window[0],
            r_max=window[1],
            point_count=len(profile),
            degenerate=True,
        )
    cleaned = [(r, v if v > floor else 0.0) for r, v in profile]
    fit = fit_loglog_slope(cleaned, window)
    logger.debug("Deviation slope %.4g on window %s", fit.slope, window)
    return fit


def harnack_reach(grid: Grid2D, constants_: AngleConstants) -> float:
    """Largest r whose sector arc maps into the grid under A_c^-.

    Square grids bound the image in the max-norm, other shapes in the
    Euclidean norm.
    """
    amap = make_affine(constants_, Sign.MINUS)
    theta = np.linspace(0.0, constants_.alpha_minus, constants.HARNACK_THETA_SAMPLES)
    images = amap.apply(np.stack([np.cos(theta), np.sin(theta)], axis=-1))
    order = np.inf if grid.shape is GridShape.SQUARE else 2
    return grid.R / float(np.max(np.linalg.norm(images, ord=order, axis=-1)))


def harnack_window(grid: Grid2D, constants_: AngleConstants) -> tuple[float, float]:
    """The far window, shrunk by a common factor until its arcs map into the grid."""
    lo, hi = default_windows(grid).far
    reach = harnack_reach(grid, constants_)
    if hi <= reach:
        return lo, hi
    factor = reach / hi
    logger.debug("Harnack window clipped by %.3g to stay inside R=%s", factor, grid.R)
    return lo * factor, reach


def harnack_coefficient(
    u: ScalarField,
    constants_: AngleConstants,
    window: tuple[float, float] | None = None,
    n_radii: int = constants.DEFAULT_WINDOW_POINTS,
) -> HarnackCoefficient:
    """Amplitude a of the leading mode in u∘A_c^- - q on sector arcs.

    a(r) projects w(r, ·) on sin(β⁻θ) with Simpson's rule; the projection
    norm is α⁻/2 because β⁻α⁻ = π.

    The default window is :func:`harnack_window`.

    Raises:
        ExtentError: If an arc maps outside the grid of u
    """
    window = window or harnack_window(u.grid, constants_)
    amap = make_affine(constants_, Sign.MINUS)
    alpha, beta = constants_.alpha_minus, constants_.beta_minus
    theta = np.linspace(0.0, alpha, constants.HARNACK_THETA_SAMPLES)
    mode = np.sin(beta * theta)
    radii = _window_radii(window, n_radii)
    a_r = []
    for r in radii:
        z = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        w = u(amap.apply(z)) - Q_HALF(z[:, 0], z[:, 1])
        projection = integrate.simpson(w * mode, x=theta)
        a_r.append(float(projection / (r**beta * alpha / 2.0)))
    result = HarnackCoefficient(
        a=float(np.mean(a_r)),
        radii=[float(r) for r in radii],
        a_r=a_r,
        window=window,
        residual=float(max(a_r) - min(a_r)),
    )
    logger.info(
        "Harnack coefficient a=%.6g (spread %.3g) on %s",
        result.a,
        result.residual,
        window,
    )
    return result


# ============================================================================
# Conical Indicator and Ordering
# ============================================================================


def default_ladder(grid: Grid2D, points: int) -> np.ndarray:
    """Geometric radii from R/4 down to 8h."""
    return np.geomspace(grid.R / 4.0, constants.NEAR_WINDOW_MIN_H * grid.h, points)


def conical_indicator(
    H: HessianField,
    c: float | AngleConstants,
    radii=None,
    config: ConicalConfig | None = None,
) -> ConicalTrend:
    """Trend of the arc-averaged minimum eigenvalue along a decreasing ladder.

    Conical when λ_min decreases strictly toward the vertex with a log-log
    slope of at least ``config.slope``; regular when λ_min stays above
    ``config.eigen_fraction``·√c; indeterminate otherwise.

    Raises:
        InsufficientDataError: If the ladder has fewer than 4 radii
        DomainError: If the ladder is not decreasing or dips below 8h
    """
    config = config or ConicalConfig()
    c_value = c.c if isinstance(c, AngleConstants) else float(c)
    grid = H.grid
    ladder = (
        default_ladder(grid, config.ladder_points)
        if radii is None
        else np.asarray(radii, dtype=float)
    )
    if ladder.size < constants.CONICAL_MIN_RADII:
        raise InsufficientDataError("the conical ladder needs at least 4 radii")
    if np.any(np.diff(ladder) >= 0):
        raise DomainError("ladder radii must decrease")
    if ladder[-1] < constants.NEAR_WINDOW_MIN_H * grid.h - 1e-12:
        raise DomainError("ladder radii must be at least 8h")

    eigen = [H.arc_mean(H.min_eigenvalue, r) for r in ladder]
    monotone = all(b < a for a, b in zip(eigen, eigen[1:], strict=False))
    slope = None
    try:
        points = list(zip(ladder.tolist(), eigen, strict=True))
        slope = fit_loglog_slope(points, (float(ladder[-1]), float(ladder[0]))).slope
    except InsufficientDataError:
        logger.debug("Minimum eigenvalue is nonpositive along the ladder")

    threshold = config.eigen_fraction * np.sqrt(c_value)
    if monotone and slope is not None and slope >= config.slope:
        verdict = ConicalVerdict.CONICAL
    elif min(eigen) >= threshold:
        verdict = ConicalVerdict.REGULAR
    else:
        verdict = ConicalVerdict.INDETERMINATE
    logger.info(
        "Conical indicator: %s (min eigenvalue %.4g -> %.4g, slope %s)",
        verdict.value,
        eigen[0],
        eigen[-1],
        "n/a" if slope is None else f"{slope:.3g}",
    )
    return ConicalTrend(
        verdict=verdict,
        radii=ladder.tolist(),
        min_eigenvalues=eigen,
        slope=slope,
        monotone=monotone,
        threshold=float(threshold),
    )


def ordering_check(
    u1: ScalarField, u2: ScalarField, tol: float = constants.ORDERING_TOL
) -> bool:
    """Whether u1 <= u2 + tol at every active node.

    Raises:
        GridError: If the fields live on different grids
    """
    if u1.grid != u2.grid:
        raise GridError("ordering check needs identical grids")
    active = u1.grid.active_mask
    gap = float(np.max(u1.values[active] - u2.values[active]))
    logger.debug("Ordering gap max(u1 - u2) = %.3e", gap)
    return gap <= tol


# ============================================================================
# Analysis Bundle
# ============================================================================


def run_analyses(
    u: ScalarField,
    c: float | None = None,
    analyses=ALL_ANALYSES,
    windows: WindowConfig | None = None,
    conical: ConicalConfig | None = None,
) -> dict:
    """Run the named analyses on one field and collect JSON-ready results.

    ``alpha`` fits the deviation from P_c^+ on the near window and reports
    slope - 2; ``beta`` fits the deviation from P_c^- on the far window.

    Raises:
        DomainError: If c is neither given nor recorded in the field metadata
    """
    c = c if c is not None else u.meta.c
    if c is None:
        raise DomainError("the field carries no c; pass it explicitly")
    constants_ = make_angle_constants(c)
    defaults = default_windows(u.grid)
    windows = windows or WindowConfig()
    near = windows.near or defaults.near
    far = windows.far or defaults.far

    needs_hessian = {"u12-limits", "conical", "hessian-audit"} & set(analyses)
    H = hessian_field(u) if needs_hessian else None
    report: dict = {"c": c, "near_window": list(near), "far_window": list(far)}
    for name in analyses:
        if name == "u12-limits":
            report[name] = u12_limits(H, near, far).to_json_dict()
        elif name == "alpha":
            fit = deviation_exponent(u, make_pc(constants_, Sign.PLUS), near)
            entry = fit.to_json_dict()
            entry["alpha"] = None if fit.slope is None else fit.slope - 2.0
            report[name] = entry
        elif name == "beta":
            fit = deviation_exponent(u, make_pc(constants_, Sign.MINUS), far)
            entry = fit.to_json_dict()
            entry["beta_expected"] = constants_.beta_minus
            report[name] = entry
        elif name == "coeff-a":
            coeff = harnack_coefficient(u, constants_, windows.far)
            report[name] = coeff.to_json_dict()
        elif name == "conical":
            trend = conical_indicator(H, constants_, config=conical)
            report[name] = trend.to_json_dict()
        elif name == "hessian-audit":
            report[name] = hessian_audit(H, constants_).to_json_dict()
        else:
            raise DomainError(f"unknown analysis: {name}")
    return report
