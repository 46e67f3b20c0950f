"""Helpers that turn command-line input into configs, problems and fields."""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any

from macorner.global_solutions import solve_family_member
from macorner.loader import load_config_file, resolve_thread_cap
from macorner.model import Q_HALF, DirichletProblem, Grid2D, make_angle_constants
from macorner.schema import ClassifierConfig, RunConfig
from macorner.solver import solve_dirichlet

logger = logging.getLogger(__name__)


def build_run_config(
    command: str, config_path: Path | None, flags: dict[str, Any]
) -> RunConfig:
    """Merge flags over the config file over defaults.

    Flags left at None do not override anything. The thread cap falls back
    to MA_CORNER_THREADS when neither flags nor file set it.

    Raises:
        ConfigError: If the config file cannot be read
        pydantic.ValidationError: If the merged settings are invalid
    """
    merged: dict[str, Any] = {}
    if config_path is not None:
        merged.update(load_config_file(config_path))
        logger.debug("Config file %s sets %s", config_path, sorted(merged))
    merged.update({k: v for k, v in flags.items() if v not in (None, (), [])})
    if "threads" not in merged:
        merged["threads"] = resolve_thread_cap()
    merged["command"] = command
    return RunConfig(**merged)


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON dump of the effective configuration."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def output_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def classifier_config(config: RunConfig) -> ClassifierConfig:
    return ClassifierConfig(
        R=config.R,
        h=config.h,
        shape=config.shape,
        solver=config.solver_config(),
        windows=config.window_config(),
    )


def solve_from_config(config: RunConfig):
    """Solve the problem a ``solve`` invocation describes.

    For 0 < c < 1 this is family member t (data P_c^- + t·x₁x₂); otherwise
    rhs c with data q + t·x₁x₂, which reduces to q on the axes as well.
    """
    if config.c < 1:
        constants_ = make_angle_constants(config.c)
        return solve_family_member(
            constants_,
            config.t,
            config.R,
            config.h,
            config.solver_config(),
            config.shape,
        )
    grid = Grid2D(h=config.h, R=config.R, shape=config.shape)
    problem = DirichletProblem.build(grid, config.c, Q_HALF.plus_cross(config.t))
    u, _ = solve_dirichlet(problem, config.solver_config())
    return u.with_meta(c=config.c, t=config.t)
