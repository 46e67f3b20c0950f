"""Shared numerical kernels: sparse solves, bisection, log-log fits, profiles."""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from . import constants
from .errors import (
    BracketError,
    ConvergenceError,
    DomainError,
    ExtentError,
    InsufficientDataError,
    SingularityError,
)
from .model import Grid2D, QuadraticPolynomial, ScalarField
from .schema import FitResult
from .types import GridShape, LinearMethod, Statistic

logger = logging.getLogger(__name__)


# ============================================================================
# Sparse Linear Systems
# ============================================================================


@dataclass
class SparseSystem:
    """Square system assembled from (row, col, value) triples.

    Duplicate entries are summed when the matrix is finalized.
    """

    n: int
    rows: list[np.ndarray] = field(default_factory=list)
    cols: list[np.ndarray] = field(default_factory=list)
    vals: list[np.ndarray] = field(default_factory=list)
    rhs: np.ndarray | None = None

    def add(self, rows, cols, vals) -> None:
        rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        cols = np.atleast_1d(np.asarray(cols, dtype=np.int64))
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape)
        if rows.size and (
            min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= self.n
        ):
            raise DomainError("sparse entry index out of range")
        self.rows.append(rows)
        self.cols.append(cols)
        self.vals.append(np.array(vals))

    def matrix(self) -> sparse.csr_matrix:
        if not self.rows:
            return sparse.csr_matrix((self.n, self.n))
        coo = sparse.coo_matrix(
            (
                np.concatenate(self.vals),
                (np.concatenate(self.rows), np.concatenate(self.cols)),
            ),
            shape=(self.n, self.n),
        )
        csr = coo.tocsr()
        csr.sum_duplicates()
        return csr

    @classmethod
    def from_matrix(cls, matrix, rhs) -> "SparseSystem":
        coo = sparse.coo_matrix(matrix)
        if coo.shape[0] != coo.shape[1]:
            raise DomainError("system matrix must be square")
        system = cls(n=coo.shape[0], rhs=np.asarray(rhs, dtype=float))
        system.add(coo.row, coo.col, coo.data)
        return system


def solve_linear(
    system: SparseSystem,
    tol: float = constants.DEFAULT_LINEAR_TOL,
    method: LinearMethod = LinearMethod.DIRECT,
    maxiter: int = constants.DEFAULT_GMRES_MAXITER,
) -> np.ndarray:
    """Solve Ax = b to relative residual tol.

    Raises:
        SingularityError: If A has an empty row or column or a singular factor
        ConvergenceError: If GMRES reaches maxiter; carries the final residual
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    a = system.matrix()
    a.eliminate_zeros()
    b = np.asarray(system.rhs, dtype=float)
    if b.shape != (system.n,):
        raise DomainError("right-hand side does not match the system dimension")
    if np.any(a.getnnz(axis=1) == 0) or np.any(a.getnnz(axis=0) == 0):
        raise SingularityError("matrix has an empty row or column")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(system.n)

    try:
        if method is LinearMethod.DIRECT:
            lu = splinalg.splu(a.tocsc())
            x = lu.solve(b)
            # iterative refinement against round-off on ill-conditioned rows
            for _ in range(2):
                r = b - a @ x
                if np.linalg.norm(r) <= tol * bnorm:
                    break
                x = x + lu.solve(r)
        else:
            ilu = splinalg.spilu(a.tocsc())
            precond = splinalg.LinearOperator(a.shape, ilu.solve)
            x, info = splinalg.gmres(a, b, rtol=tol, maxiter=maxiter, M=precond)
            if info > 0:
                residual = float(np.linalg.norm(b - a @ x) / bnorm)
                raise ConvergenceError(
                    f"GMRES did not converge in {maxiter} iterations", residual
                )
            if info < 0:
                raise SingularityError("GMRES breakdown")
    except RuntimeError as e:
        if isinstance(e, ConvergenceError | SingularityError):
            raise
        raise SingularityError(f"singular factorization: {e}") from e

    if not np.all(np.isfinite(x)):
        raise SingularityError("linear solve produced non-finite values")
    return x


def laplacian_system(
    grid: Grid2D, boundary: np.ndarray, source: np.ndarray | None = None
) -> tuple[SparseSystem, np.ndarray]:
    """Five-point system for Δu = source with u = boundary on boundary nodes.

    Returns the system in the interior unknowns and the node -> unknown map
    (-1 off the interior).
    """
    interior = grid.interior_mask
    index = np.full(grid.dims, -1, dtype=np.int64)
    index[interior] = np.arange(int(interior.sum()))
    n = int(interior.sum())
    system = SparseSystem(n=n)
    h2 = grid.h * grid.h
    ii, jj = np.nonzero(interior)
    rows = index[ii, jj]
    system.add(rows, rows, -4.0 / h2)
    rhs = np.zeros(n) if source is None else source[ii, jj].astype(float).copy()
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni, nj = ii + di, jj + dj
        nbr = index[ni, nj]
        unknown = nbr >= 0
        system.add(rows[unknown], nbr[unknown], 1.0 / h2)
        known = ~unknown
        rhs[known] -= boundary[ni[known], nj[known]] / h2
    system.rhs = rhs
    return system, index


# ============================================================================
# Root Finding
# ============================================================================


class BisectionStep(NamedTuple):
    t: float
    value: float


def bisect(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    tol_x: float,
    tol_f: float,
    history: list[BisectionStep] | None = None,
) -> float:
    """Bisection on a sign change of fn.

    Returns t with |fn(t)| <= tol_f, or the midpoint once the bracket is
    narrower than tol_x. Every evaluation is appended to ``history``.

    Raises:
        BracketError: If fn(lo) and fn(hi) have the same strict sign
    """
    if hi <= lo:
        raise BracketError(f"empty bracket [{lo}, {hi}]")
    history = history if history is not None else []
    f_lo = fn(lo)
    history.append(BisectionStep(lo, f_lo))
    if abs(f_lo) <= tol_f:
        return lo
    f_hi = fn(hi)
    history.append(BisectionStep(hi, f_hi))
    if abs(f_hi) <= tol_f:
        return hi
    if f_lo * f_hi > 0:
        raise BracketError(
            f"fn({lo})={f_lo:.6g} and fn({hi})={f_hi:.6g} have the same sign"
        )

    while hi - lo > tol_x:
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        history.append(BisectionStep(mid, f_mid))
        logger.debug("bisect: t=%.10g f=%.3e width=%.3e", mid, f_mid, hi - lo)
        if abs(f_mid) <= tol_f:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ============================================================================
# Fits and Profiles
# ============================================================================


def fit_loglog_slope(
    points: list[tuple[float, float]], window: tuple[float, float]
) -> FitResult:
    """Least-squares slope of log y against log r inside the window.

    Samples with y <= 0 inside the window are excluded and counted.

    Raises:
        InsufficientDataError: If fewer than 3 usable samples remain
    """
    r_min, r_max = window
    if not 0 < r_min < r_max:
        raise DomainError("window must satisfy 0 < r_min < r_max")
    arr = np.asarray(points, dtype=float).reshape(-1, 2)
    r, y = arr[:, 0], arr[:, 1]
    in_window = (r >= r_min) & (r <= r_max) & (r > 0)
    usable = in_window & np.isfinite(y) & (y > 0)
    excluded = int(in_window.sum() - usable.sum())
    if excluded and not usable.any():
        raise InsufficientDataError("all samples in the window are nonpositive")
    count = int(usable.sum())
    if count < constants.FIT_MIN_POINTS:
        raise InsufficientDataError(
            f"need {constants.FIT_MIN_POINTS} samples in window, got {count}"
        )
    lr, ly = np.log(r[usable]), np.log(y[usable])
    slope, intercept = np.polyfit(lr, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lr + intercept)) ** 2)))
    return FitResult(
        slope=float(slope),
        intercept=float(intercept),
        r_min=r_min,
        r_max=r_max,
        residual=residual,
        point_count=count,
        excluded_count=excluded,
    )


def arc_sample_count(r: float, h: float) -> int:
    return max(constants.ARC_MIN_SAMPLES, math.ceil(math.pi * r / (2.0 * h)))


def arc_points(r: float, h: float, margin: float = 0.0) -> np.ndarray:
    """Points on {|x| = r} in the closed quadrant, at least margin off the axes."""
    lo = math.asin(min(1.0, margin / r)) if margin > 0 else 0.0
    hi = math.pi / 2 - lo
    if hi < lo:
        raise ExtentError(f"arc r={r} has no points {margin} away from the axes")
    theta = np.linspace(lo, hi, arc_sample_count(r, h))
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def radial_profile(
    field_: ScalarField,
    reference: QuadraticPolynomial,
    radii,
    statistic: Statistic = Statistic.SUP_ABS,
    margin: float = 0.0,
) -> list[tuple[float, float]]:
    """Statistic of |field - reference| on quadrant arcs of each radius.

    Raises:
        ExtentError: If a radius is below 4h or leaves the grid
    """
    grid = field_.grid
    if grid.shape is GridShape.SECTOR_ANNULUS:
        raise ExtentError("radial profiles are taken on quadrant grids")
    out = []
    for r in radii:
        r = float(r)
        if r < constants.RADIAL_MIN_H * grid.h - 1e-12 or r > grid.R + 1e-12:
            raise ExtentError(f"radius {r} outside [{4 * grid.h}, {grid.R}]")
        pts = arc_points(r, grid.h, margin)
        diff = np.abs(field_(pts) - reference(pts[:, 0], pts[:, 1]))
        value = diff.max() if statistic is Statistic.SUP_ABS else diff.mean()
        out.append((r, float(value)))
    return out
