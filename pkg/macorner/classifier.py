"""Vertex regularity pipeline.

A convex corner is reduced to the quadrant with both edge second
derivatives equal to 1, which leaves a single effective constant c_eff. The
local problem is then solved on a truncated quadrant and the Hessian
evidence decides between C^{2,α}, C² and a conical singularity.
"""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import constants
from .asymptotics import (
    conical_indicator,
    default_windows,
    deviation_exponent,
    hessian_field,
    u12_limits,
)
from .errors import (
    ConsistencyError,
    ConvexityError,
    DomainError,
    ExtentError,
    InsufficientDataError,
)
from .global_solutions import shoot_pbar, shoot_punder, solve_family_member
from .model import (
    Q_HALF,
    AffineMap,
    DirichletProblem,
    Grid2D,
    QuadraticPolynomial,
    ScalarField,
    make_angle_constants,
    make_pc,
    quadratic_rescale,
)
from .numerics import fit_loglog_slope
from .schema import (
    ClassifierConfig,
    LogModulusResult,
    RegularityVerdict,
    SolverConfig,
    SubsolutionMargin,
    VertexData,
)
from .solver import solve_dirichlet
from .types import ConicalVerdict, GridShape, OuterData, RegularityKind, Sign

logger = logging.getLogger(__name__)


def normalize_vertex(data: VertexData) -> tuple[float, AffineMap]:
    """Return c_eff and the map from normalized to original coordinates.

    The map is x ↦ C·diag(1/√p1, 1/√p2)·x with C the corner matrix (identity
    when absent); u∘map then has unit edge second derivatives and
    det D²(u∘map) = c_eff at the vertex.

    Raises:
        DomainError: If f0, p1 or p2 is not positive
    """
    if data.f0 <= 0 or data.p1 <= 0 or data.p2 <= 0:
        raise DomainError("f0, p1 and p2 must be positive")
    scaling = AffineMap.from_matrix(
        [[1.0 / math.sqrt(data.p1), 0.0], [0.0, 1.0 / math.sqrt(data.p2)]]
    )
    if data.corner_matrix is None:
        return data.f0 / (data.p1 * data.p2), scaling
    corner = AffineMap.from_matrix(data.corner_matrix)
    c_eff = data.f0 * corner.det**2 / (data.p1 * data.p2)
    return c_eff, corner.compose(scaling)


def _sample(fn: float | Callable, x1, x2) -> np.ndarray:
    if callable(fn):
        return np.broadcast_to(np.asarray(fn(x1, x2), dtype=float), np.shape(x1))
    return np.full(np.shape(x1), float(fn))


def check_strict_subsolution(
    sub: ScalarField | QuadraticPolynomial,
    f: float | Callable,
    grid: Grid2D | None = None,
    tol: float = constants.SUBSOLUTION_TOL,
) -> SubsolutionMargin:
    """Margin min(det D²sub - f) over the audited nodes.

    Quadratics are audited on ``grid`` (default: the unit square at h = 1/16);
    fields on the valid nodes of their discrete Hessian.

    Raises:
        ConvexityError: If the subsolution has a negative Hessian eigenvalue
    """
    if isinstance(sub, QuadraticPolynomial):
        if sub.min_eigenvalue < -constants.CONVEXITY_TOL:
            raise ConvexityError(
                f"subsolution is not convex (min eigenvalue {sub.min_eigenvalue:.6g})"
            )
        grid = grid or Grid2D(h=1.0 / 16.0, R=1.0)
        x1, x2 = grid.mesh
        mask = grid.active_mask
        det = np.full(int(mask.sum()), sub.det)
    else:
        H = hessian_field(sub)
        lam = H.min_eigenvalue[H.valid]
        if lam.size and float(lam.min()) < -constants.CONVEXITY_TOL:
            raise ConvexityError(
                f"subsolution is not convex (min eigenvalue {float(lam.min()):.6g})"
            )
        x1, x2 = sub.grid.mesh
        mask = H.valid
        det = H.det[mask]
    if not mask.any():
        raise InsufficientDataError("no nodes to audit the subsolution on")

    margin = float(np.min(det - _sample(f, x1[mask], x2[mask])))
    note = None
    if abs(margin) <= tol:
        note = "det D²sub = f at some node: only C² regularity follows"
    elif margin < 0:
        note = "not a subsolution"
    return SubsolutionMargin(
        margin=margin, strict=margin > tol, note=note, nodes=int(mask.sum())
    )


# ============================================================================
# Local Solve
# ============================================================================


def _in_unit_band(c_eff: float, config: ClassifierConfig) -> bool:
    return abs(c_eff - 1.0) <= config.unit_band


def _local_solution(
    data: VertexData, c_eff: float, amap: AffineMap, config: ClassifierConfig
) -> ScalarField:
    """Solve det D²u = f on the normalized truncated quadrant."""
    grid = Grid2D(h=config.h, R=config.R, shape=config.shape)

    if data.rhs is not None or data.boundary is not None:
        jac = amap.det**2

        def rhs(x1, x2):
            if data.rhs is None:
                return c_eff
            y = amap.apply(np.stack([x1, x2], axis=-1))
            return jac * np.asarray(data.rhs(y[..., 0], y[..., 1]))

        def boundary(x1, x2):
            if data.boundary is None:
                return Q_HALF(x1, x2)
            y = amap.apply(np.stack([x1, x2], axis=-1))
            return data.boundary(y[..., 0], y[..., 1])

        problem = DirichletProblem.build(grid, rhs, boundary)
        u, _ = solve_dirichlet(problem, config.solver)
        return u

    if c_eff < 1 and not _in_unit_band(c_eff, config):
        constants_ = make_angle_constants(c_eff)
        if data.outer_cross is not None:
            # q + k·x₁x₂ = P_c^- + (k + s)·x₁x₂
            t = data.outer_cross + constants_.s
            if -1 < t <= 2.0 * constants_.s:
                return solve_family_member(
                    constants_, t, config.R, config.h, config.solver, config.shape
                )
            cross = data.outer_cross
        elif data.outer is OuterData.PBAR:
            return shoot_pbar(
                constants_, config.R, config.h, config.solver, shape=config.shape
            ).field
        elif data.outer is OuterData.PUNDER:
            return shoot_punder(
                constants_, config.R, config.h, config.solver, shape=config.shape
            ).field
        else:
            cross = 0.0
    elif c_eff > 1 and not _in_unit_band(c_eff, config):
        # with the default k = -1, u <= (x1 - x2)²/2 so u < 0 on the diagonal
        cross = (
            data.outer_cross
            if data.outer_cross is not None
            else config.supercritical_cross
        )
    else:
        cross = data.outer_cross or 0.0

    problem = DirichletProblem.build(grid, c_eff, Q_HALF.plus_cross(cross))
    u, _ = solve_dirichlet(problem, config.solver)
    return u


# ============================================================================
# Classification
# ============================================================================


def classify_vertex(
    data: VertexData, config: ClassifierConfig | None = None
) -> RegularityVerdict:
    """Normalize, solve locally and classify the vertex.

    Raises:
        ConsistencyError: If c_eff > 1 and the Hessian stays regular
        NonConvergenceError: If the local solve fails
    """
    config = config or ClassifierConfig()
    c_eff, amap = normalize_vertex(data)
    logger.info("Classifying vertex %s: c_eff=%.6g", data.label or "-", c_eff)

    evidence: dict = {}
    notes: list[str] = []
    if data.subsolution is not None:
        margin = check_strict_subsolution(data.subsolution, data.rhs or data.f0)
        evidence["subsolution"] = margin.to_json_dict()
        if margin.note:
            notes.append(margin.note)

    u = _local_solution(data, c_eff, amap, config)
    H = hessian_field(u)
    trend = conical_indicator(H, c_eff, config=config.conical)
    evidence["conical"] = trend.to_json_dict()

    if c_eff > 1 and not _in_unit_band(c_eff, config):
        if trend.verdict is ConicalVerdict.REGULAR:
            raise ConsistencyError(
                f"c_eff={c_eff:.6g} > 1 but the Hessian stays regular",
                evidence=evidence,
            )
        return RegularityVerdict(
            kind=RegularityKind.CONICAL,
            c_eff=c_eff,
            evidence=evidence,
            notes=notes,
            label=data.label,
        )

    if _in_unit_band(c_eff, config):
        notes.append(
            "c_eff = 1: C^{2,α} fails in general; see the log-modulus experiment"
        )
        return RegularityVerdict(
            kind=RegularityKind.C2,
            c_eff=c_eff,
            evidence=evidence,
            notes=notes,
            label=data.label,
        )

    alpha = _tangent_evidence(u, H, c_eff, config, evidence, notes)
    if trend.verdict is not ConicalVerdict.REGULAR:
        kind = RegularityKind.CONICAL
        alpha = None
    elif alpha is not None and alpha > 0:
        kind = RegularityKind.C2ALPHA
    else:
        logger.warning("Hölder exponent unresolved at vertex %s", data.label or "-")
        notes.append("regular Hessian but the Hölder exponent is unresolved")
        kind = RegularityKind.C2
        alpha = None
    return RegularityVerdict(
        kind=kind,
        alpha_measured=alpha,
        c_eff=c_eff,
        evidence=evidence,
        notes=notes,
        label=data.label,
    )


def _tangent_evidence(u, H, c_eff, config, evidence, notes) -> float | None:
    """Attach u₁₂ limits and near-vertex fits; return the measured α."""
    constants_ = make_angle_constants(c_eff)
    defaults = default_windows(u.grid)
    near = config.windows.near or defaults.near
    far = config.windows.far or defaults.far
    try:
        evidence["u12_limits"] = u12_limits(H, near, far).to_json_dict()
    except (ExtentError, DomainError) as e:
        notes.append(f"u12 limits unavailable: {e}")

    fits = {}
    for sign in (Sign.PLUS, Sign.MINUS):
        key = f"deviation_{'plus' if sign is Sign.PLUS else 'minus'}"
        try:
            fit = deviation_exponent(u, make_pc(constants_, sign), near)
        except (InsufficientDataError, ExtentError) as e:
            notes.append(f"{key} unavailable: {e}")
            continue
        fits[sign] = fit
        evidence[key] = fit.to_json_dict()
    if not fits:
        return None

    # the tangent quadratic is the one u deviates from fastest
    def order(item):
        fit = item[1]
        return math.inf if fit.degenerate else fit.slope

    sign, fit = max(fits.items(), key=order)
    evidence["tangent"] = "P_c^+" if sign is Sign.PLUS else "P_c^-"
    if fit.degenerate:
        return None
    return fit.slope - 2.0


def classify_polygon(
    vertices: list[VertexData],
    config: ClassifierConfig | None = None,
    threads: int = constants.DEFAULT_THREADS,
) -> list[RegularityVerdict]:
    """Classify each vertex; verdicts come back in input order."""
    config = config or ClassifierConfig()
    if threads <= 1 or len(vertices) <= 1:
        return [classify_vertex(v, config) for v in vertices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda v: classify_vertex(v, config), vertices))


# ============================================================================
# Log-Modulus Experiment
# ============================================================================


def _ladder_level(r: float, zoom: float) -> int:
    """Smallest zoom level k with r·zoom^{-k} >= zoom/2."""
    k = math.log(zoom / (2.0 * r)) / math.log(1.0 / zoom)
    return max(0, math.ceil(k - 1e-9))


def log_modulus_experiment(
    epsilon: float,
    h: float = constants.DEFAULT_ASYMPTOTICS_H,
    levels: int = constants.LOG_MODULUS_LEVELS,
    zoom: float = constants.LOG_MODULUS_ZOOM,
    config: SolverConfig | None = None,
    window: tuple[float, float] = constants.LOG_MODULUS_WINDOW,
    n_radii: int = constants.DEFAULT_WINDOW_POINTS,
) -> LogModulusResult:
    """u₁₂(r)·|log r| for det D²u = 1 on B₁ ∩ Q with data q + ε·x₁x₂.

    Level 0 solves on the unit quarter disc. Level k solves the rescaled
    problem on the same grid with boundary data taken from level k-1
    through :func:`quadratic_rescale`, so it resolves radii zoom^k times
    smaller. Each sample radius is read from the level that places it in
    [zoom/2, 1/2).

    Raises:
        DomainError: If zoom is outside (0, 1) or epsilon is negative
        InsufficientDataError: If the ladder does not reach the window
    """
    if not 0 < zoom < 1:
        raise DomainError("zoom must lie in (0, 1)")
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")
    grid = Grid2D(h=h, R=1.0, shape=GridShape.QUARTER_DISC)
    x1, x2 = grid.mesh
    active = grid.active_mask
    q_vals = Q_HALF(x1, x2)

    radii = np.geomspace(window[0], window[1], n_radii)
    needed = max(_ladder_level(float(r), zoom) for r in [*radii, 0.5])
    if needed > levels:
        raise InsufficientDataError(
            f"the window needs {needed} zoom levels, only {levels} allowed"
        )

    problem = DirichletProblem.build(grid, 1.0, Q_HALF.plus_cross(epsilon))
    u, _ = solve_dirichlet(problem, config)
    fields = [u]
    for _ in range(needed):
        data = quadratic_rescale(fields[-1], zoom, target=grid)
        problem = DirichletProblem.build(grid, 1.0, data)
        v, _ = solve_dirichlet(problem, config, init=data)
        fields.append(v)
    lower_margin = min(float(np.min((f.values - q_vals)[active])) for f in fields)
    hessians = [hessian_field(f) for f in fields]

    def u12_at(r: float) -> float:
        k = _ladder_level(r, zoom)
        try:
            return hessians[k].arc_mean(hessians[k].u12, r / zoom**k)
        except ExtentError as e:
            raise InsufficientDataError(f"radius {r} is under-resolved: {e}") from e

    samples = [(float(r), u12_at(float(r)) * abs(math.log(r))) for r in radii]
    values = np.array([v for _, v in samples])
    floor = constants.DEGENERACY_EPS_FACTOR * np.finfo(float).eps
    degenerate = bool(np.all(np.abs(values) <= floor * 1e2))

    fit = ratio = two_radius = None
    if not degenerate and np.all(values > 0):
        fit = fit_loglog_slope(samples, window)
        ratio = float(values.max() / values.min())
        u_far, u_near = u12_at(0.5), u12_at(0.1)
        if u_far > 0:
            two_radius = (u_near * abs(math.log(0.1))) / (u_far * abs(math.log(0.5)))
    passed = (
        lower_margin >= -constants.ORDERING_TOL
        and ratio is not None
        and ratio <= constants.LOG_MODULUS_MAX_RATIO
    )
    logger.info(
        "Log-modulus eps=%s: ratio %s, lower margin %.3e",
        epsilon,
        "n/a" if ratio is None else f"{ratio:.3g}",
        lower_margin,
    )
    return LogModulusResult(
        epsilon=epsilon,
        samples=samples,
        fit=fit,
        ratio=ratio,
        lower_margin=lower_margin,
        two_radius_ratio=two_radius,
        degenerate=degenerate,
        passed=passed,
    )
