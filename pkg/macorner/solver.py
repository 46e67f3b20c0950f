"""Monotone wide-stencil discretization of det D²u and its Newton solver.

At each interior node the operator is

    MA_h[u] = min over pairs (e, e⊥) of [Δ_e u]⁺[Δ_e⊥ u]⁺ + p([Δ_e u]⁻ + [Δ_e⊥ u]⁻)

with Δ_e u = (u(x + he) - 2u(x) + u(x - he)) / (h²|e|²). A pair is used at a
node only when all four of its neighbours are non-exterior lattice nodes, so
wide pairs drop out near axes and outer boundaries; the axis and diagonal
pairs are always available at interior nodes.
"""

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from . import constants
from .errors import (
    DomainError,
    GridError,
    NonConvergenceError,
    NumericalError,
    StencilSupportError,
)
from .model import (
    Q_HALF,
    DirichletProblem,
    FamilyTag,
    Grid2D,
    ScalarField,
    family_quadratic,
    make_meta,
)
from .numerics import SparseSystem, laplacian_system, solve_linear
from .schema import (
    ComparisonSummary,
    ComparisonTrial,
    ContinuationStep,
    SolverConfig,
    SolveReport,
)

logger = logging.getLogger(__name__)

Direction = tuple[int, int]
Pair = tuple[Direction, Direction]

DEFAULT_PAIRS: tuple[Pair, ...] = (
    ((1, 0), (0, 1)),
    ((1, 1), (1, -1)),
    ((2, 1), (-1, 2)),
    ((1, 2), (-2, 1)),
)


@dataclass(frozen=True)
class Stencil:
    """Ordered list of orthogonal integer direction pairs.

    Argmin ties are broken by this order.
    """

    pairs: tuple[Pair, ...] = DEFAULT_PAIRS

    def __post_init__(self):
        has_diagonal = False
        for e, f in self.pairs:
            if e == (0, 0) or f == (0, 0):
                raise DomainError("stencil directions must be nonzero")
            if e[0] * f[0] + e[1] * f[1] != 0:
                raise DomainError(f"stencil pair {e}, {f} is not orthogonal")
            if {_canonical(e), _canonical(f)} == {(1, 1), (1, -1)}:
                has_diagonal = True
        if not has_diagonal:
            raise DomainError("stencil must contain the diagonal pair (1,1), (1,-1)")

    @property
    def reach(self) -> int:
        return max(abs(c) for pair in self.pairs for d in pair for c in d)


def _canonical(d: Direction) -> Direction:
    return d if (d[0], d[1]) > (-d[0], -d[1]) else (-d[0], -d[1])


DEFAULT_STENCIL = Stencil()


def _shift(padded: np.ndarray, pad: int, d: Direction, dims) -> np.ndarray:
    """View of padded[i + d0, j + d1] over the original index range."""
    return padded[pad + d[0] : pad + d[0] + dims[0], pad + d[1] : pad + d[1] + dims[1]]


class _Scheme:
    """Geometry-dependent part of the discretization on one grid."""

    def __init__(self, grid: Grid2D, stencil: Stencil, penalty: float):
        self.grid = grid
        self.stencil = stencil
        self.penalty = penalty
        self.pad = stencil.reach
        self.h2 = grid.h * grid.h
        self.interior = grid.interior_mask
        self.index = np.full(grid.dims, -1, dtype=np.int64)
        self.index[self.interior] = np.arange(int(self.interior.sum()))
        self.n = int(self.interior.sum())

        active = np.pad(grid.active_mask, self.pad, constant_values=False)
        self.available = []
        for e, f in stencil.pairs:
            ok = self.interior.copy()
            for d in (e, f):
                ok &= _shift(active, self.pad, d, grid.dims)
                ok &= _shift(active, self.pad, (-d[0], -d[1]), grid.dims)
            self.available.append(ok)
        if self.n and not np.all(np.logical_or.reduce(self.available)[self.interior]):
            raise StencilSupportError("interior node without a usable stencil pair")

    def second_difference(self, values: np.ndarray, d: Direction) -> np.ndarray:
        padded = np.pad(values, self.pad, constant_values=np.nan)
        plus = _shift(padded, self.pad, d, values.shape)
        minus = _shift(padded, self.pad, (-d[0], -d[1]), values.shape)
        return (plus - 2.0 * values + minus) / (self.h2 * (d[0] ** 2 + d[1] ** 2))

    def pair_terms(self, values: np.ndarray):
        """Per-pair (Δ_e, Δ_e⊥, term) with +inf where a pair is unusable."""
        out = []
        p = self.penalty
        for (e, f), ok in zip(self.stencil.pairs, self.available, strict=True):
            a = self.second_difference(values, e)
            b = self.second_difference(values, f)
            term = np.maximum(a, 0) * np.maximum(b, 0) + p * (
                np.minimum(a, 0) + np.minimum(b, 0)
            )
            term = np.where(ok & np.isfinite(term), term, np.inf)
            out.append((a, b, term))
        return out

    def operator(self, values: np.ndarray):
        """MA_h on interior nodes and the index of the active pair."""
        terms = self.pair_terms(values)
        stacked = np.stack([t for _, _, t in terms])
        active = np.argmin(stacked, axis=0)
        ma = np.take_along_axis(stacked, active[None], axis=0)[0]
        return ma, active, terms

    def residual(self, values: np.ndarray, rhs: np.ndarray):
        ma, active, terms = self.operator(values)
        res = ma[self.interior] - rhs[self.interior]
        return res, active, terms

    def jacobian(self, active: np.ndarray, terms) -> SparseSystem:
        """Linearization of the active pair at each interior node."""
        system = SparseSystem(n=self.n)
        p = self.penalty
        for k, (e, f) in enumerate(self.stencil.pairs):
            ii, jj = np.nonzero(self.interior & (active == k))
            if ii.size == 0:
                continue
            a = terms[k][0][ii, jj]
            b = terms[k][1][ii, jj]
            wa = np.where(a > 0, np.maximum(b, 0), p)
            wb = np.where(b > 0, np.maximum(a, 0), p)
            ce = wa / (self.h2 * (e[0] ** 2 + e[1] ** 2))
            cf = wb / (self.h2 * (f[0] ** 2 + f[1] ** 2))
            rows = self.index[ii, jj]
            system.add(rows, rows, -2.0 * (ce + cf))
            for d, coef in ((e, ce), (f, cf)):
                for sgn in (1, -1):
                    nbr = self.index[ii + sgn * d[0], jj + sgn * d[1]]
                    unknown = nbr >= 0
                    system.add(rows[unknown], nbr[unknown], coef[unknown])
        return system

    def convexity_violation(self, values: np.ndarray) -> float:
        worst = 0.0
        for (a, b, _), ok in zip(self.pair_terms(values), self.available, strict=True):
            if ok.any():
                worst = min(worst, float(np.min(a[ok])), float(np.min(b[ok])))
        return worst

    def local_update(self, values: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """Center value solving min over pairs of the local equation = f.

        Each pair term decreases in the center value; the pair root solves
        αβ(m_e - u)(m_f - u) = f with both factors positive.
        """
        padded = np.pad(values, self.pad, constant_values=np.nan)
        best = np.full(values.shape, np.inf)
        for (e, f), ok in zip(self.stencil.pairs, self.available, strict=True):
            me = 0.5 * (
                _shift(padded, self.pad, e, values.shape)
                + _shift(padded, self.pad, (-e[0], -e[1]), values.shape)
            )
            mf = 0.5 * (
                _shift(padded, self.pad, f, values.shape)
                + _shift(padded, self.pad, (-f[0], -f[1]), values.shape)
            )
            alpha = 2.0 / (self.h2 * (e[0] ** 2 + e[1] ** 2))
            beta = 2.0 / (self.h2 * (f[0] ** 2 + f[1] ** 2))
            d = me - mf
            with np.errstate(invalid="ignore"):
                x = 0.5 * (d + np.sqrt(d * d + 4.0 * rhs / (alpha * beta)))
            root = np.where(ok, me - x, np.inf)
            best = np.fmin(best, root)
        return best


# ============================================================================
# Operator
# ============================================================================


def ma_operator(
    u: ScalarField,
    stencil: Stencil = DEFAULT_STENCIL,
    penalty: float = constants.DEFAULT_PENALTY_WEIGHT,
) -> ScalarField:
    """Apply MA_h at interior nodes; other nodes are NaN.

    Raises:
        StencilSupportError: If an interior node has no pair with finite
            neighbour values
    """
    scheme = _Scheme(u.grid, stencil, penalty)
    ma, _, _ = scheme.operator(np.asarray(u.values))
    if not np.all(np.isfinite(ma[scheme.interior])):
        raise StencilSupportError("missing neighbour values at interior nodes")
    values = np.full(u.grid.dims, np.nan)
    values[scheme.interior] = ma[scheme.interior]
    meta = make_meta(u.grid, provenance=f"ma_operator({u.meta.provenance})")
    return ScalarField(u.grid, values, meta, partial=True)


# ============================================================================
# Newton, Gauss-Seidel and Continuation
# ============================================================================


@dataclass
class _NewtonOutcome:
    values: np.ndarray
    converged: bool
    iterations: int
    residual: float


def _newton(
    scheme: _Scheme,
    values: np.ndarray,
    rhs: np.ndarray,
    config: SolverConfig,
    tol_abs: float,
) -> _NewtonOutcome:
    values = values.copy()
    res, active, terms = scheme.residual(values, rhs)
    norm = float(np.max(np.abs(res))) if res.size else 0.0
    for it in range(config.max_newton + 1):
        if norm <= tol_abs:
            return _NewtonOutcome(values, True, it, norm)
        if it == config.max_newton:
            break
        system = scheme.jacobian(active, terms)
        system.rhs = -res
        try:
            delta = solve_linear(
                system, tol=config.linear_tol, method=config.linear_method
            )
        except NumericalError as e:
            logger.debug("Newton linear solve failed at iteration %d: %s", it, e)
            return _NewtonOutcome(values, False, it, norm)

        phi0 = float(res @ res)
        step = 1.0
        for _ in range(constants.MAX_LINE_SEARCH_HALVINGS):
            trial = values.copy()
            trial[scheme.interior] += step * delta
            t_res, t_active, t_terms = scheme.residual(trial, rhs)
            if np.all(np.isfinite(t_res)) and float(t_res @ t_res) <= (
                1.0 - 2.0 * config.armijo * step
            ) * phi0:
                break
            step *= config.damping
        else:
            logger.debug("Line search failed at iteration %d (residual %.3e)", it, norm)
            return _NewtonOutcome(values, False, it, norm)

        values, res, active, terms = trial, t_res, t_active, t_terms
        norm = float(np.max(np.abs(res)))
        logger.debug(
            "Newton %d: residual=%.3e step=%.3g pairs=%s",
            it + 1,
            norm,
            step,
            np.bincount(active[scheme.interior], minlength=len(scheme.available)),
        )
    return _NewtonOutcome(values, False, config.max_newton, norm)


def _gauss_seidel(
    scheme: _Scheme, values: np.ndarray, rhs: np.ndarray, sweeps: int
) -> np.ndarray:
    """Pointwise nonlinear Gauss-Seidel in colour classes (i + 3j) mod 6."""
    values = values.copy()
    ii, jj = np.indices(values.shape)
    colors = (ii + 3 * jj) % constants.GAUSS_SEIDEL_COLORS
    classes = [
        scheme.interior & (colors == k) for k in range(constants.GAUSS_SEIDEL_COLORS)
    ]
    for _ in range(sweeps):
        for sel in classes:
            update = scheme.local_update(values, rhs)
            values[sel] = update[sel]
    return values


def _poisson_predictor(problem: DirichletProblem) -> np.ndarray:
    """Δu = 2√f with the Dirichlet data; exact for q when f ≡ 1."""
    grid = problem.grid
    boundary = np.where(grid.boundary_mask, problem.boundary, 0.0)
    source = 2.0 * np.sqrt(np.where(grid.active_mask, problem.rhs, 1.0))
    system, index = laplacian_system(grid, boundary, source)
    values = np.array(problem.boundary, dtype=float)
    if system.n:
        values[grid.interior_mask] = solve_linear(system)[index[grid.interior_mask]]
    return values


def _with_boundary(values: np.ndarray, problem: DirichletProblem) -> np.ndarray:
    out = np.array(values, dtype=float)
    bmask = problem.grid.boundary_mask
    out[bmask] = problem.boundary[bmask]
    out[~problem.grid.active_mask] = np.nan
    return out


class _Solve:
    """One call of solve_dirichlet; accumulates the report fields."""

    def __init__(self, problem: DirichletProblem, config: SolverConfig, stencil):
        self.problem = problem
        self.config = config
        self.scheme = _Scheme(problem.grid, stencil, config.convexity_penalty_weight)
        self.tol_abs = config.newton_tol * max(1.0, problem.rhs_max)
        self.iterations = 0
        self.sweeps = 0
        self.trace: list[ContinuationStep] = []

    def newton_with_fallback(
        self, problem: DirichletProblem, values: np.ndarray
    ) -> _NewtonOutcome:
        values = _with_boundary(values, problem)
        outcome = _newton(self.scheme, values, problem.rhs, self.config, self.tol_abs)
        self.iterations += outcome.iterations
        if outcome.converged:
            return outcome
        logger.warning(
            "Newton stalled at residual %.3e; running %d Gauss-Seidel sweeps",
            outcome.residual,
            self.config.gauss_seidel_sweeps,
        )
        smoothed = _gauss_seidel(
            self.scheme, outcome.values, problem.rhs, self.config.gauss_seidel_sweeps
        )
        self.sweeps += self.config.gauss_seidel_sweeps
        outcome = _newton(self.scheme, smoothed, problem.rhs, self.config, self.tol_abs)
        self.iterations += outcome.iterations
        return outcome

    def continuation(self, family: FamilyTag) -> _NewtonOutcome:
        """Walk t from 0 to the target, warm-starting every member."""
        grid = self.problem.grid
        constants_ = family.constants
        values = family_quadratic(constants_, 0.0)(*grid.mesh)
        steps = self.config.continuation_steps
        outcome = None
        for k in range(1, steps + 1):
            t_k = family.t * k / steps
            member = DirichletProblem.for_family(grid, constants_, t_k)
            outcome = self.newton_with_fallback(member, values)
            self.trace.append(
                ContinuationStep(
                    t=t_k, iterations=outcome.iterations, residual=outcome.residual
                )
            )
            logger.debug("Continuation t=%.6g residual=%.3e", t_k, outcome.residual)
            if not outcome.converged:
                return outcome
            values = outcome.values
        return outcome

    def report(self, outcome: _NewtonOutcome) -> SolveReport:
        return SolveReport(
            converged=outcome.converged,
            iterations=self.iterations,
            final_residual=outcome.residual,
            continuation=self.trace,
            convexity_violation=self.scheme.convexity_violation(outcome.values),
            fallback_sweeps=self.sweeps,
            tolerance=self.tol_abs,
        )


def solve_dirichlet(
    problem: DirichletProblem,
    config: SolverConfig | None = None,
    init: ScalarField | None = None,
    stencil: Stencil = DEFAULT_STENCIL,
) -> tuple[ScalarField, SolveReport]:
    """Solve det D²u = f with u = φ on boundary nodes.

    Initialization: ``init`` when given; the quadratic P_c^- + t·x₁x₂ for
    family members with t >= 0; continuation from t = 0 for t < 0; the
    Poisson predictor otherwise.

    Raises:
        NonConvergenceError: If Newton, Gauss-Seidel and continuation all
            fail; the report is attached
    """
    config = config or SolverConfig()
    grid = problem.grid
    run = _Solve(problem, config, stencil)
    family = problem.family

    outcome = None
    if init is not None:
        if init.grid != grid:
            raise GridError("initial field lives on a different grid")
        start = np.asarray(init.values)
    elif family is not None and family.t >= 0:
        start = family_quadratic(family.constants, family.t)(*grid.mesh)
    elif family is not None:
        outcome = run.continuation(family)
        start = outcome.values
    else:
        start = _poisson_predictor(problem)

    if outcome is None or outcome.converged:
        outcome = run.newton_with_fallback(problem, start)
    if not outcome.converged and family is not None and not run.trace:
        logger.warning("Falling back to continuation from t=0 to t=%.6g", family.t)
        outcome = run.continuation(family)

    report = run.report(outcome)
    if not outcome.converged:
        raise NonConvergenceError(
            f"Monge-Ampère solve did not converge (residual {outcome.residual:.3e})",
            report,
        )
    logger.info(
        "Solved on R=%s h=%s: %d Newton iterations, residual %.3e",
        grid.R,
        grid.h,
        report.iterations,
        report.final_residual,
    )
    report_id = hashlib.sha256(report.model_dump_json().encode()).hexdigest()[:12]
    meta = make_meta(
        grid,
        provenance="solve_dirichlet",
        c=family.constants.c if family else None,
        t=family.t if family else None,
        report_id=report_id,
    )
    return ScalarField(grid, outcome.values, meta, report=report), report


def comparison_check(
    problem_lo: DirichletProblem,
    problem_hi: DirichletProblem,
    config: SolverConfig | None = None,
) -> bool:
    """Solve both problems and test u_lo <= u_hi + 10·newton_tol nodewise.

    Raises:
        GridError: If the grids differ
        DomainError: If the right-hand sides differ or the data are not ordered
    """
    config = config or SolverConfig()
    if problem_lo.grid != problem_hi.grid:
        raise GridError("comparison needs identical grids")
    active = problem_lo.grid.active_mask
    if not np.allclose(problem_lo.rhs[active], problem_hi.rhs[active]):
        raise DomainError("comparison needs identical right-hand sides")
    bmask = problem_lo.grid.boundary_mask
    if np.any(problem_lo.boundary[bmask] > problem_hi.boundary[bmask]):
        raise DomainError("boundary data are not ordered")
    u_lo, _ = solve_dirichlet(problem_lo, config)
    u_hi, _ = solve_dirichlet(problem_hi, config)
    slack = constants.COMPARISON_SLACK_FACTOR * config.newton_tol
    ordered = bool(np.all(u_lo.values[active] <= u_hi.values[active] + slack))
    if not ordered:
        gap = float(np.max(u_lo.values[active] - u_hi.values[active]))
        logger.warning("Comparison failed: max(u_lo - u_hi) = %.3e", gap)
    return ordered



def random_comparison(
    grid: Grid2D,
    c: float = 1.0,
    pairs: int = constants.COMPARISON_PAIRS,
    seed: int = 0,
    config: SolverConfig | None = None,
    spread: float = constants.COMPARISON_SPREAD,
) -> ComparisonSummary:
    """Run :func:`comparison_check` on random ordered data q + k·x₁x₂.

    Each pair draws two k from [-spread, spread] with
    ``numpy.random.default_rng(seed)`` and gives the smaller one to the lower
    problem, so the data are ordered on the whole boundary.

    Raises:
        DomainError: If pairs or spread is not positive
    """
    if pairs <= 0 or spread <= 0:
        raise DomainError("pairs and spread must be positive")
    rng = np.random.default_rng(seed)
    trials = []
    for _ in range(pairs):
        k_lo, k_hi = (float(k) for k in np.sort(rng.uniform(-spread, spread, size=2)))
        lo = DirichletProblem.build(grid, c, Q_HALF.plus_cross(k_lo))
        hi = DirichletProblem.build(grid, c, Q_HALF.plus_cross(k_hi))
        ordered = comparison_check(lo, hi, config)
        trials.append(ComparisonTrial(k_lo=k_lo, k_hi=k_hi, ordered=ordered))
    passed = all(trial.ordered for trial in trials)
    logger.info(
        "Comparison on %d random pairs (seed %d): %s",
        pairs,
        seed,
        "passed" if passed else "FAILED",
    )
    return ComparisonSummary(
        c=c, seed=seed, spread=spread, trials=trials, passed=passed
    )
