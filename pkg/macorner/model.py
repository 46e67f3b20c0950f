"""Domain types shared by every module.

Grids are uniform Cartesian lattices. The square and quarter-disc shapes
cover [0, R]²; the sector-annulus shape covers the bounding box of an
annulus inside a plane sector and is used by the harmonic solver. Fields
store one value per lattice node with NaN on exterior nodes.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy import interpolate, ndimage

from . import constants
from .errors import DomainError, ExtentError, GridError
from .schema import FieldMeta, SolveReport
from .types import GridShape, NodeKind, Sign

logger = logging.getLogger(__name__)

_GEOM_TOL = 1e-12


# ============================================================================
# Sector Constants
# ============================================================================


@dataclass(frozen=True)
class AngleConstants:
    """Constants derived from the right-hand side c of det D²u = c."""

    c: float
    s: float
    alpha_minus: float
    alpha_plus: float
    beta_minus: float
    beta_plus: float

    def alpha(self, sign: Sign = Sign.MINUS) -> float:
        return self.alpha_plus if sign is Sign.PLUS else self.alpha_minus

    def beta(self, sign: Sign = Sign.MINUS) -> float:
        return self.beta_plus if sign is Sign.PLUS else self.beta_minus


def make_angle_constants(c: float) -> AngleConstants:
    """Build the sector constants for 0 < c <= 1.

    Raises:
        DomainError: If c <= 0 or c > 1
    """
    if not 0 < c <= 1:
        raise DomainError(f"sector constants need 0 < c <= 1, got c={c}")
    s = math.sqrt(1.0 - c)
    alpha_minus = math.acos(-s)
    alpha_plus = math.acos(s)
    return AngleConstants(
        c=c,
        s=s,
        alpha_minus=alpha_minus,
        alpha_plus=alpha_plus,
        beta_minus=math.pi / alpha_minus,
        beta_plus=math.pi / alpha_plus,
    )


# ============================================================================
# Quadratic Polynomials and Affine Maps
# ============================================================================


@dataclass(frozen=True)
class QuadraticPolynomial:
    """½xᵀHx + b·x + d with H stored as its three entries."""

    h11: float
    h12: float
    h22: float
    b1: float = 0.0
    b2: float = 0.0
    d: float = 0.0

    @property
    def hessian(self) -> np.ndarray:
        return np.array([[self.h11, self.h12], [self.h12, self.h22]])

    @property
    def det(self) -> float:
        return self.h11 * self.h22 - self.h12 * self.h12

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.hessian)[0])

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return (
            0.5 * (self.h11 * x1 * x1 + 2.0 * self.h12 * x1 * x2 + self.h22 * x2 * x2)
            + self.b1 * x1
            + self.b2 * x2
            + self.d
        )

    def plus_cross(self, t: float) -> "QuadraticPolynomial":
        """Return self + t·x₁x₂."""
        return replace(self, h12=self.h12 + t)

    def compose(self, amap: "AffineMap") -> "QuadraticPolynomial":
        """Return the quadratic x ↦ self(amap(x))."""
        m = np.asarray(amap.M)
        shift = np.asarray(amap.shift)
        hess = m.T @ self.hessian @ m
        lin = m.T @ (self.hessian @ shift + np.array([self.b1, self.b2]))
        const = float(self(shift[0], shift[1]))
        return QuadraticPolynomial(
            h11=float(hess[0, 0]),
            h12=float(0.5 * (hess[0, 1] + hess[1, 0])),
            h22=float(hess[1, 1]),
            b1=float(lin[0]),
            b2=float(lin[1]),
            d=const,
        )

    def sample(self, grid: "Grid2D", provenance: str = "quadratic") -> "ScalarField":
        return ScalarField.from_function(grid, self, provenance=provenance)


Q_HALF = QuadraticPolynomial(1.0, 0.0, 1.0)
"""q(x) = |x|²/2."""


def make_pc(constants_: AngleConstants, sign: Sign) -> QuadraticPolynomial:
    """P_c^± = ½|x|² ± s·x₁x₂."""
    return QuadraticPolynomial(1.0, sign.factor * constants_.s, 1.0)


def family_quadratic(constants_: AngleConstants, t: float) -> QuadraticPolynomial:
    """P_c^- + t·x₁x₂, the outer data of the shooting family."""
    return make_pc(constants_, Sign.MINUS).plus_cross(t)


def eval_quadratic(p: QuadraticPolynomial, x) -> float:
    """Evaluate p at a single 2-point."""
    return float(p(x[0], x[1]))


@dataclass(frozen=True)
class AffineMap:
    """x ↦ Mx + shift."""

    M: tuple[tuple[float, float], tuple[float, float]]
    shift: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.det == 0:
            raise DomainError("affine map must have a nonsingular matrix")

    @classmethod
    def from_matrix(cls, m, shift=(0.0, 0.0)) -> "AffineMap":
        m = np.asarray(m, dtype=float)
        return cls(
            M=((float(m[0, 0]), float(m[0, 1])), (float(m[1, 0]), float(m[1, 1]))),
            shift=(float(shift[0]), float(shift[1])),
        )

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.M, dtype=float)

    @property
    def det(self) -> float:
        (a, b), (c, d) = self.M
        return a * d - b * c

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix.T + np.asarray(self.shift)

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.matrix)
        return AffineMap.from_matrix(inv, -inv @ np.asarray(self.shift))

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """Return self ∘ inner."""
        m = self.matrix @ inner.matrix
        return AffineMap.from_matrix(
            m, self.matrix @ np.asarray(inner.shift) + np.asarray(self.shift)
        )

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(M=((1.0, 0.0), (0.0, 1.0)))


def make_affine(constants_: AngleConstants, sign: Sign) -> AffineMap:
    """A_c^± = [[1, ∓s/√c], [0, 1/√c]], so that P_c^± ∘ A_c^± = q.

    At c = 1 both maps are the identity.

    Raises:
        DomainError: If c > 1
    """
    if constants_.c > 1:
        raise DomainError("A_c^± is defined only for c <= 1")
    root = math.sqrt(constants_.c)
    return AffineMap(
        M=((1.0, -sign.factor * constants_.s / root), (0.0, 1.0 / root)),
    )


# ============================================================================
# Grids
# ============================================================================


def _is_integer(x: float) -> bool:
    return abs(x - round(x)) <= constants.GRID_RATIO_TOL * max(1.0, abs(x))


@dataclass(frozen=True)
class Grid2D:
    """Uniform lattice with a per-node classification.

    Node (i, j) sits at (x1_min + i·h, j·h). For the square and quarter-disc
    shapes x1_min = 0 and both R/h and 1/h must be integers, so (1, 1) is a
    node. The sector-annulus shape holds the annulus inner_radius <= |x| <= R
    inside the sector 0 <= θ <= sector_alpha.
    """

    h: float
    R: float
    shape: GridShape = GridShape.SQUARE
    x1_min: float = 0.0
    sector_alpha: float | None = None
    inner_radius: float | None = None

    def __post_init__(self):
        if self.h <= 0 or self.R <= 0:
            raise GridError("h and R must be positive")
        if not _is_integer(1.0 / self.h):
            raise GridError(f"1/h must be an integer, got h={self.h}")
        if self.shape is GridShape.SECTOR_ANNULUS:
            if self.sector_alpha is None or self.inner_radius is None:
                raise GridError("sector grids need sector_alpha and inner_radius")
            if not 0 < self.sector_alpha < math.pi:
                raise GridError("sector_alpha must lie in (0, π)")
            if not 0 < self.inner_radius < self.R:
                raise GridError("inner_radius must lie in (0, R)")
            if not _is_integer(self.x1_min / self.h):
                raise GridError("x1_min must be a multiple of h")
        else:
            if not _is_integer(self.R / self.h):
                raise GridError(f"R/h must be an integer, got R={self.R}, h={self.h}")
            if self.x1_min != 0.0:
                raise GridError("quadrant grids start at x1 = 0")

    @classmethod
    def sector(cls, h: float, R: float, alpha: float, inner_radius: float):
        """Lattice covering the sector annulus, snapped outward to h."""
        left = min(0.0, R * math.cos(alpha))
        x1_min = -h * math.ceil(-left / h - constants.GRID_RATIO_TOL)
        return cls(
            h=h,
            R=R,
            shape=GridShape.SECTOR_ANNULUS,
            x1_min=x1_min if x1_min != 0 else 0.0,
            sector_alpha=alpha,
            inner_radius=inner_radius,
        )

    @classmethod
    def from_meta(cls, meta: FieldMeta) -> "Grid2D":
        return cls(
            h=meta.h,
            R=meta.R,
            shape=meta.shape,
            x1_min=meta.x1_min,
            sector_alpha=meta.sector_alpha,
            inner_radius=meta.inner_radius,
        )

    @cached_property
    def n1(self) -> int:
        return int(math.ceil((self.R - self.x1_min) / self.h - 1e-9)) + 1

    @cached_property
    def n2(self) -> int:
        return int(math.ceil(self.R / self.h - 1e-9)) + 1

    @property
    def dims(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    @cached_property
    def x1(self) -> np.ndarray:
        return self.x1_min + self.h * np.arange(self.n1)

    @cached_property
    def x2(self) -> np.ndarray:
        return self.h * np.arange(self.n2)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def contains(self, points, tol: float | None = None) -> np.ndarray:
        """Whether points lie in the closed continuous domain."""
        pts = np.asarray(points, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        eps = (tol if tol is not None else 1e-9) * max(1.0, self.R)
        if self.shape is GridShape.SQUARE:
            return (x1 >= -eps) & (x2 >= -eps) & (x1 <= self.R + eps) & (
                x2 <= self.R + eps
            )
        r = np.hypot(x1, x2)
        if self.shape is GridShape.QUARTER_DISC:
            return (x1 >= -eps) & (x2 >= -eps) & (r <= self.R + eps)
        theta = np.arctan2(np.maximum(x2, 0.0), x1)
        slack = eps / np.maximum(r, 1.0)
        angular = (x2 >= -eps) & (theta <= self.sector_alpha + slack)
        return angular & (r >= self.inner_radius - eps) & (r <= self.R + eps)

    def distance_to_boundary(self, points) -> np.ndarray:
        """Euclidean distance from points inside the domain to its boundary."""
        pts = np.asarray(points, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        if self.shape is GridShape.SQUARE:
            return np.minimum.reduce([x1, x2, self.R - x1, self.R - x2])
        r = np.hypot(x1, x2)
        if self.shape is GridShape.QUARTER_DISC:
            return np.minimum.reduce([x1, x2, self.R - r])
        return np.minimum.reduce(
            [x2, self._edge_distance(x1, x2), r - self.inner_radius, self.R - r]
        )

    def distance_to_masked_boundary(self, points) -> np.ndarray:
        """Distance to boundary parts that do not lie on lattice lines.

        Off-lattice boundaries are where exterior nodes are filled by
        extension before spline fitting.
        """
        pts = np.asarray(points, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        if self.shape is GridShape.SQUARE:
            return np.full(np.shape(x1), np.inf)
        r = np.hypot(x1, x2)
        if self.shape is GridShape.QUARTER_DISC:
            return self.R - r
        parts = [r - self.inner_radius, self.R - r]
        if abs(self.sector_alpha - math.pi / 2) > _GEOM_TOL:
            parts.append(self._edge_distance(x1, x2))
        return np.minimum.reduce(parts)

    def _edge_distance(self, x1, x2):
        # distance to the ray θ = sector_alpha
        ca, sa = math.cos(self.sector_alpha), math.sin(self.sector_alpha)
        along = x1 * ca + x2 * sa
        perp = np.abs(-x1 * sa + x2 * ca)
        return np.where(along >= 0, perp, np.hypot(x1, x2))

    @cached_property
    def kinds(self) -> np.ndarray:
        """NodeKind per node; the kinds partition the index set."""
        x1, x2 = self.mesh
        pts = np.stack([x1, x2], axis=-1)
        inside = self.contains(pts, tol=_GEOM_TOL)
        kinds = np.full(self.dims, NodeKind.INTERIOR, dtype=np.int8)
        kinds[~inside] = NodeKind.EXTERIOR

        padded = np.pad(inside, 1, constant_values=False)
        near_outside = np.zeros(self.dims, dtype=bool)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                near_outside |= ~padded[
                    1 + di : 1 + di + self.n1, 1 + dj : 1 + dj + self.n2
                ]
        boundary = inside & near_outside
        kinds[boundary] = NodeKind.OUTER_BOUNDARY

        if self.shape is GridShape.SECTOR_ANNULUS:
            edge = boundary & (
                (x2 <= _GEOM_TOL)
                | (self._edge_distance(x1, x2) <= math.sqrt(2.0) * self.h)
            )
            radial = boundary & (
                (np.hypot(x1, x2) - self.inner_radius <= math.sqrt(2.0) * self.h)
                | (self.R - np.hypot(x1, x2) <= math.sqrt(2.0) * self.h)
            )
            kinds[edge & ~radial] = NodeKind.AXIS_BOUNDARY
        else:
            axis = inside & ((np.abs(x1) <= _GEOM_TOL) | (np.abs(x2) <= _GEOM_TOL))
            kinds[axis] = NodeKind.AXIS_BOUNDARY
        return kinds

    @cached_property
    def interior_mask(self) -> np.ndarray:
        return self.kinds == NodeKind.INTERIOR

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        return (self.kinds == NodeKind.AXIS_BOUNDARY) | (
            self.kinds == NodeKind.OUTER_BOUNDARY
        )

    @cached_property
    def active_mask(self) -> np.ndarray:
        return self.kinds != NodeKind.EXTERIOR

    @cached_property
    def radius(self) -> np.ndarray:
        x1, x2 = self.mesh
        return np.hypot(x1, x2)

    def node_index(self, point) -> tuple[int, int] | None:
        """Lattice index of a point that sits on a node, else None."""
        fi = (point[0] - self.x1_min) / self.h
        fj = point[1] / self.h
        if not (_is_integer(fi) and _is_integer(fj)):
            return None
        i, j = int(round(fi)), int(round(fj))
        if 0 <= i < self.n1 and 0 <= j < self.n2:
            return i, j
        return None

    def has_node(self, point) -> bool:
        idx = self.node_index(point)
        return idx is not None and bool(self.active_mask[idx])


# ============================================================================
# Scalar Fields
# ============================================================================


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node values on a grid with a provenance record.

    Values at exterior nodes are NaN. Derived fields (operator outputs) are
    ``partial`` and may be NaN on boundary nodes as well.
    """

    grid: Grid2D
    values: np.ndarray
    meta: FieldMeta
    report: SolveReport | None = None
    partial: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.dims:
            raise GridError(
                f"values shape {values.shape} does not match grid {self.grid.dims}"
            )
        values[~self.grid.active_mask] = np.nan
        required = self.grid.interior_mask if self.partial else self.grid.active_mask
        if not np.all(np.isfinite(values[required])):
            raise DomainError("field values must be finite on active nodes")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(
        cls,
        grid: Grid2D,
        fn: Callable,
        provenance: str = "sampled",
        **meta,
    ) -> "ScalarField":
        x1, x2 = grid.mesh
        values = np.full(grid.dims, np.nan)
        mask = grid.active_mask
        values[mask] = np.broadcast_to(fn(x1[mask], x2[mask]), x1[mask].shape)
        return cls(grid, values, make_meta(grid, provenance=provenance, **meta))

    def with_meta(self, **updates) -> "ScalarField":
        return replace(self, meta=self.meta.model_copy(update=updates))

    def at_node(self, point) -> float:
        """Value at a lattice node."""
        idx = self.grid.node_index(point)
        if idx is None or not self.grid.active_mask[idx]:
            raise ExtentError(f"{tuple(point)} is not an active node")
        return float(self.values[idx])

    @cached_property
    def _filled(self) -> np.ndarray:
        vals = self.values
        missing = ~np.isfinite(vals)
        if not missing.any():
            return vals
        # nearest-value extension of the active region
        _, (ii, jj) = ndimage.distance_transform_edt(missing, return_indices=True)
        return vals[ii, jj]

    @cached_property
    def _spline(self) -> interpolate.RectBivariateSpline:
        return interpolate.RectBivariateSpline(
            self.grid.x1, self.grid.x2, self._filled, kx=3, ky=3
        )

    @cached_property
    def _linear(self) -> interpolate.RegularGridInterpolator:
        return interpolate.RegularGridInterpolator(
            (self.grid.x1, self.grid.x2), self._filled, method="linear"
        )

    def __call__(self, points, method: str = "auto") -> np.ndarray:
        """Evaluate off-node.

        Bicubic away from masked boundaries, bilinear within 2h of them.

        Raises:
            ExtentError: If any point lies outside the grid's domain
        """
        pts = np.asarray(points, dtype=float)
        if not np.all(self.grid.contains(pts)):
            raise ExtentError("evaluation points lie outside the field's domain")
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, 2)
        lo = np.array([self.grid.x1[0], self.grid.x2[0]])
        hi = np.array([self.grid.x1[-1], self.grid.x2[-1]])
        flat = np.clip(flat, lo, hi)
        if method == "linear":
            return self._linear(flat).reshape(shape)
        cubic = self._spline.ev(flat[:, 0], flat[:, 1])
        if method == "cubic":
            return cubic.reshape(shape)
        band = constants.INTERP_BOUNDARY_BAND * self.grid.h
        near = self.grid.distance_to_masked_boundary(flat) < band
        if near.any():
            cubic[near] = self._linear(flat[near])
        return cubic.reshape(shape)

    def max_abs(self) -> float:
        return float(np.nanmax(np.abs(self.values)))


def make_meta(grid: Grid2D, provenance: str = "sampled", **extra) -> FieldMeta:
    return FieldMeta(
        h=grid.h,
        R=grid.R,
        shape=grid.shape,
        x1_min=grid.x1_min,
        sector_alpha=grid.sector_alpha,
        inner_radius=grid.inner_radius,
        provenance=provenance,
        **extra,
    )


# ============================================================================
# Dirichlet Problems
# ============================================================================


@dataclass(frozen=True)
class FamilyTag:
    """Marks a problem as member t of the shooting family for c."""

    constants: AngleConstants
    t: float


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """det D²u = f in the domain, u = φ on boundary nodes.

    ``rhs`` and ``boundary`` hold node samples; use :meth:`build` to create a
    problem from functions of position.
    """

    grid: Grid2D
    rhs: np.ndarray
    boundary: np.ndarray
    family: FamilyTag | None = None

    def __post_init__(self):
        if self.rhs.shape != self.grid.dims or self.boundary.shape != self.grid.dims:
            raise GridError("problem arrays must match the grid")
        active = self.grid.active_mask
        if not np.all(np.isfinite(self.rhs[active])) or np.any(self.rhs[active] <= 0):
            raise DomainError("rhs must be positive at every non-exterior node")
        if not np.all(np.isfinite(self.boundary[self.grid.boundary_mask])):
            raise DomainError("boundary data must be finite")

    @classmethod
    def build(
        cls,
        grid: Grid2D,
        rhs: float | Callable,
        boundary: Callable | ScalarField,
        family: FamilyTag | None = None,
    ) -> "DirichletProblem":
        x1, x2 = grid.mesh
        active = grid.active_mask
        rhs_values = np.full(grid.dims, np.nan)
        if callable(rhs):
            rhs_values[active] = np.broadcast_to(
                rhs(x1[active], x2[active]), x1[active].shape
            )
        else:
            rhs_values[active] = float(rhs)
        bmask = grid.boundary_mask
        boundary_values = np.full(grid.dims, np.nan)
        if isinstance(boundary, ScalarField):
            if boundary.grid != grid:
                raise GridError("boundary field lives on a different grid")
            boundary_values[bmask] = boundary.values[bmask]
        else:
            boundary_values[bmask] = np.broadcast_to(
                boundary(x1[bmask], x2[bmask]), x1[bmask].shape
            )
        return cls(grid, rhs_values, boundary_values, family)

    @classmethod
    def for_family(
        cls, grid: Grid2D, constants_: AngleConstants, t: float
    ) -> "DirichletProblem":
        """rhs c, data P_c^- + t·x₁x₂ (which is q on the axes)."""
        return cls.build(
            grid,
            constants_.c,
            family_quadratic(constants_, t),
            family=FamilyTag(constants_, t),
        )

    @property
    def rhs_max(self) -> float:
        return float(np.nanmax(self.rhs))


# ============================================================================
# Rescaling
# ============================================================================


def quadratic_rescale(
    u: ScalarField, lam: float, target: Grid2D | None = None
) -> ScalarField:
    """Return x ↦ λ⁻²·u(λx) sampled on the target grid.

    The default target keeps the spacing and shape and takes the largest
    extent R_t on the h-lattice with λ·R_t <= R.

    Raises:
        DomainError: If lam <= 0
        ExtentError: If λ·x leaves the source domain for a target node
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    src = u.grid
    if src.shape is GridShape.SECTOR_ANNULUS:
        raise GridError("rescaling is defined on quadrant grids only")
    if target is None:
        n = math.floor(src.R / (lam * src.h) + constants.GRID_RATIO_TOL)
        if n < 1:
            raise ExtentError("rescaled grid would be empty")
        target = Grid2D(h=src.h, R=n * src.h, shape=src.shape)
    x1, x2 = target.mesh
    mask = target.active_mask
    pts = lam * np.stack([x1[mask], x2[mask]], axis=-1)
    values = np.full(target.dims, np.nan)
    values[mask] = u(pts) / (lam * lam)
    prior = u.meta.lam if u.meta.lam is not None else 1.0
    meta = make_meta(
        target,
        provenance=f"rescale({u.meta.provenance})",
        c=u.meta.c,
        t=u.meta.t,
        lam=prior * lam,
    )
    logger.debug("Rescaled field by lambda=%s onto R=%s", lam, target.R)
    return ScalarField(target, values, meta)

