"""Harmonic machinery in the transformed sectors Q_c^±.

The sector of opening α has boundary-vanishing harmonic modes
r^{kβ} sin(kβθ) with β = π/α. This module evaluates the leading mode v₀,
builds the supersolution v₁ = A r^β (sin(β⁻θ) + δθ(α⁻ - θ)), maps sectors
to the half-plane, and solves the Laplace equation on sector annuli.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from . import constants
from .errors import ConstructionError, DomainError
from .model import AngleConstants, Grid2D, ScalarField, make_meta
from .numerics import laplacian_system, solve_linear
from .schema import DecayStep
from .types import MapDirection, Sign

logger = logging.getLogger(__name__)

_ANGLE_TOL = 1e-12


def polar(points) -> tuple[np.ndarray, np.ndarray]:
    """(r, θ) with θ ∈ [0, π] for points in the closed upper half-plane."""
    pts = np.asarray(points, dtype=float)
    x1, x2 = pts[..., 0], pts[..., 1]
    r = np.hypot(x1, x2)
    theta = np.arctan2(x2, x1)
    # the negative real axis may carry a -0.0 or round-off below zero
    near_axis = (theta < 0) & (x2 > -_ANGLE_TOL * np.maximum(r, 1.0))
    theta = np.where(near_axis, np.where(x1 < 0, math.pi, 0.0), theta)
    return r, theta


def _check_sector(theta, alpha: float) -> None:
    slack = 10 * _ANGLE_TOL
    if np.any(theta < -slack) or np.any(theta > alpha + slack):
        raise DomainError(f"point outside the sector of opening {alpha:.6g}")


def v0_polar(constants_: AngleConstants, r, theta, sign: Sign = Sign.MINUS):
    """r^β sin(βθ) with β = β_c^±."""
    beta = constants_.beta(sign)
    return np.power(r, beta) * np.sin(beta * np.asarray(theta))


def v0(constants_: AngleConstants, point, sign: Sign = Sign.MINUS):
    """Leading harmonic mode of the sector at Cartesian point(s).

    Raises:
        DomainError: If a point lies outside the closed sector
    """
    r, theta = polar(point)
    _check_sector(theta, constants_.alpha(sign))
    theta = np.clip(theta, 0.0, constants_.alpha(sign))
    value = v0_polar(constants_, r, theta, sign)
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class SectorMode:
    """A r^degree (sin(β⁻θ) + δθ(α⁻ - θ)) on the sector of opening α⁻.

    ``profile_margin`` is the largest value of β²φ + φ'' on the θ-grid used
    for the search and ``supersolution_margin`` the largest value of
    A(β²φ + φ'') + 1; both are negative for a valid supersolution.
    """

    constants: AngleConstants
    degree: float
    delta: float = 0.0
    amplitude: float = 1.0
    profile_margin: float | None = None
    supersolution_margin: float | None = None

    def theta_profile(self, theta):
        alpha = self.constants.alpha_minus
        beta_m = self.constants.beta_minus
        theta = np.asarray(theta, dtype=float)
        return self.amplitude * (
            np.sin(beta_m * theta) + self.delta * theta * (alpha - theta)
        )

    def laplacian_profile(self, theta):
        """β²φ + φ'' times the amplitude, so Δ(mode) = r^{β-2} times this."""
        alpha = self.constants.alpha_minus
        beta_m = self.constants.beta_minus
        beta = self.degree
        theta = np.asarray(theta, dtype=float)
        bump = self.delta * (beta * beta * theta * (alpha - theta) - 2.0)
        value = (beta * beta - beta_m * beta_m) * np.sin(beta_m * theta) + bump
        return self.amplitude * value

    def __call__(self, points):
        r, theta = polar(points)
        _check_sector(theta, self.constants.alpha_minus)
        return np.power(r, self.degree) * self.theta_profile(
            np.clip(theta, 0.0, self.constants.alpha_minus)
        )


def make_v0_mode(constants_: AngleConstants) -> SectorMode:
    return SectorMode(constants=constants_, degree=constants_.beta_minus)


def make_v1(constants_: AngleConstants, beta: float) -> SectorMode:
    """Supersolution r^β-mode with Δv₁ <= -r^{β-2} in Q_c^-.

    δ is halved from 0.5 until β²φ + φ'' < 0 on the θ-grid, then the
    amplitude A >= 1 is chosen with a factor-two safety margin.

    Raises:
        DomainError: If beta is outside [0, β_c^-)
        ConstructionError: If 20 halvings of δ do not produce a negative profile
    """
    if not 0 <= beta < constants_.beta_minus:
        raise DomainError(
            f"beta must lie in [0, {constants_.beta_minus:.6g}), got {beta}"
        )
    theta = np.linspace(0.0, constants_.alpha_minus, constants.V1_THETA_SAMPLES)
    delta = constants.V1_DELTA_START
    for _ in range(constants.V1_MAX_HALVINGS):
        trial = SectorMode(constants=constants_, degree=beta, delta=delta)
        margin = float(np.max(trial.laplacian_profile(theta)))
        if margin < 0:
            break
        delta *= 0.5
    else:
        raise ConstructionError(
            f"no delta found for beta={beta} "
            f"after {constants.V1_MAX_HALVINGS} halvings"
        )
    amplitude = max(1.0, -2.0 / margin)
    mode = SectorMode(
        constants=constants_,
        degree=beta,
        delta=delta,
        amplitude=amplitude,
        profile_margin=margin,
        supersolution_margin=amplitude * margin + 1.0,
    )
    logger.debug(
        "v1 for beta=%s: delta=%s amplitude=%.4g margin=%.3e",
        beta,
        delta,
        amplitude,
        mode.supersolution_margin,
    )
    return mode


def conformal_power(
    constants_: AngleConstants,
    point,
    direction: MapDirection,
    sign: Sign = Sign.MINUS,
) -> np.ndarray:
    """(r, θ) ↦ (r^β, βθ) from Q_c^± to the upper half-plane, or back.

    Raises:
        DomainError: If a point lies outside the source domain
    """
    beta = constants_.beta(sign)
    r, theta = polar(point)
    if direction is MapDirection.TO_HALF_PLANE:
        _check_sector(theta, constants_.alpha(sign))
        theta = np.clip(theta, 0.0, constants_.alpha(sign))
        r_out, theta_out = np.power(r, beta), beta * theta
    else:
        pts = np.asarray(point, dtype=float)
        if np.any(pts[..., 1] < -_ANGLE_TOL * np.maximum(r, 1.0)):
            raise DomainError("point outside the closed upper half-plane")
        theta = np.clip(theta, 0.0, math.pi)
        r_out, theta_out = np.power(r, 1.0 / beta), theta / beta
    return np.stack([r_out * np.cos(theta_out), r_out * np.sin(theta_out)], axis=-1)


def solve_laplace_sector(
    constants_: AngleConstants,
    rho: float,
    data: Callable,
    h: float,
    sign: Sign = Sign.MINUS,
) -> ScalarField:
    """Five-point Laplace solve on (B_{1/ρ} ∖ B_ρ) ∩ Q_c^±.

    ``data`` is a function of position evaluated at every boundary node of the
    masked lattice.

    Raises:
        DomainError: If rho is outside (0, 1)
    """
    if not 0 < rho < 1:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    grid = Grid2D.sector(
        h=h, R=1.0 / rho, alpha=constants_.alpha(sign), inner_radius=rho
    )
    x1, x2 = grid.mesh
    bmask = grid.boundary_mask
    boundary = np.zeros(grid.dims)
    boundary[bmask] = np.broadcast_to(data(x1[bmask], x2[bmask]), x1[bmask].shape)

    system, index = laplacian_system(grid, boundary)
    values = np.where(grid.active_mask, boundary, np.nan)
    interior = grid.interior_mask
    if system.n:
        solution = solve_linear(system)
        values[interior] = solution[index[interior]]
        residual = system.matrix() @ solution - system.rhs
        scale = max(1.0, float(np.max(np.abs(system.rhs))))
        logger.debug(
            "Sector Laplace solve rho=%s h=%s: %d unknowns, residual %.3e",
            rho,
            h,
            system.n,
            float(np.max(np.abs(residual))) / scale,
        )
    meta = make_meta(grid, provenance="solve_laplace_sector", c=constants_.c)
    return ScalarField(grid, values, meta)


def discrete_laplacian(fn: Callable, points, h: float) -> np.ndarray:
    """Five-point Laplacian of a function of position at given points."""
    pts = np.asarray(points, dtype=float)
    x1, x2 = pts[..., 0], pts[..., 1]
    center = fn(x1, x2)
    total = fn(x1 + h, x2) + fn(x1 - h, x2) + fn(x1, x2 + h) + fn(x1, x2 - h)
    return (total - 4.0 * center) / (h * h)


# ============================================================================
# Decay across a ρ-ladder
# ============================================================================


def envelope_data(constants_: AngleConstants, beta: float, rho: float) -> Callable:
    """Two lowest sector modes at the largest amplitudes with |w| <= |x|^β.

    Mode k has degree kβ⁻; on ρ <= r <= 1/ρ the amplitudes ½ρ^{β-β⁻} and
    ½ρ^{2β⁻-β} keep each mode below ½r^β when β⁻ < β < 2β⁻.
    """
    beta_m = constants_.beta_minus
    if not beta_m < beta < 2.0 * beta_m:
        raise DomainError(f"beta must lie in ({beta_m:.6g}, {2 * beta_m:.6g})")
    first = 0.5 * rho ** (beta - beta_m)
    second = 0.5 * rho ** (2.0 * beta_m - beta)

    def data(x1, x2):
        r, theta = polar(np.stack([x1, x2], axis=-1))
        lead = first * np.power(r, beta_m) * np.sin(beta_m * theta)
        return lead + second * np.power(r, 2.0 * beta_m) * np.sin(2.0 * beta_m * theta)

    return data


def unit_arc_max(field_: ScalarField, alpha: float, samples: int = 256) -> float:
    theta = np.linspace(0.0, alpha, samples)
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return float(np.max(np.abs(field_(pts))))


def sector_decay_ladder(
    constants_: AngleConstants,
    beta: float = constants.DECAY_BETA,
    rhos=constants.DECAY_LADDER,
    h: float = 1.0 / 32.0,
) -> list[DecayStep]:
    """max |w| on ∂B₁ ∩ Q_c^- for envelope data over a ρ-ladder."""
    steps = []
    for rho in rhos:
        data = envelope_data(constants_, beta, rho)
        w = solve_laplace_sector(constants_, rho, data, h)
        peak = unit_arc_max(w, constants_.alpha_minus)
        # compare with the closed form on the same arc
        theta = np.linspace(0.0, constants_.alpha_minus, 256)
        exact = data(np.cos(theta), np.sin(theta))
        residual = float(np.max(np.abs(exact))) - peak
        steps.append(DecayStep(rho=rho, max_on_unit_arc=peak, residual=abs(residual)))
        logger.info("Decay ladder rho=%s: max on unit arc %.4g", rho, peak)
    return steps
