"""Click CLI commands for macorner."""

import functools
import logging
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import NoReturn

import click
import pydantic

from macorner import __version__
from macorner.asymptotics import harnack_coefficient, run_analyses
from macorner.classifier import classify_polygon, log_modulus_experiment
from macorner.errors import ConsistencyError, NonConvergenceError, exit_code_for
from macorner.fieldio import read_field, write_field, write_profile
from macorner.global_solutions import shoot_pbar, shoot_punder
from macorner.harmonic import envelope_data, sector_decay_ladder, solve_laplace_sector
from macorner.loader import load_vertices
from macorner.model import Grid2D, make_angle_constants
from macorner.solver import random_comparison
from macorner.types import ALL_ANALYSES, GridShape, OuterData

from .builders import (
    build_run_config,
    classifier_config,
    config_hash,
    output_dir,
    solve_from_config,
)
from .formatters import (
    print_analysis_summary,
    print_decay_table,
    print_shooting_summary,
    print_solve_report,
    print_sweep_table,
    print_verdict_table,
    write_json,
    write_manifest,
    write_rows,
)

logger = logging.getLogger(__name__)

_QUADRANT_SHAPES = [GridShape.SQUARE.value, GridShape.QUARTER_DISC.value]


def _fail(error: Exception) -> NoReturn:
    """Report an error and exit with its code (1 input, 2 numerical)."""
    code = 1 if isinstance(error, pydantic.ValidationError) else exit_code_for(error)
    click.echo(f"Error: {error}", err=True)
    if logger.isEnabledFor(logging.DEBUG):
        traceback.print_exc()
    sys.exit(code)


def common_options(fn):
    """Options shared by every experiment command."""
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(path_type=Path),
            help="YAML, JSON or TOML file of settings",
        ),
        click.option("--out", type=click.Path(path_type=Path), help="Output directory"),
        click.option("--seed", type=int, help="Seed of randomized checks"),
        click.option("--threads", type=int, help="Worker cap (MA_CORNER_THREADS)"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def grid_options(fn):
    """Problem, grid and solver options."""
    options = [
        click.option("--c", "c", type=float, help="Right-hand side constant"),
        click.option("--t", "t", type=float, help="x1*x2 coefficient of the data"),
        click.option("--R", "R", type=float, help="Truncation radius"),
        click.option("--h", "h", type=float, help="Grid spacing (1/h integer)"),
        click.option(
            "--shape",
            type=click.Choice(_QUADRANT_SHAPES),
            help="Truncation shape",
        ),
        click.option("--newton-tol", type=float, help="Newton residual tolerance"),
        click.option("--max-newton", type=int, help="Newton iteration cap"),
        click.option("--continuation-steps", type=int, help="Continuation steps"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def window_options(fn):
    options = [
        click.option(
            "--near-window", type=(float, float), default=None, help="RMIN RMAX"
        ),
        click.option(
            "--far-window", type=(float, float), default=None, help="RMIN RMAX"
        ),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _run_config(command: str, config_path, **flags):
    try:
        return build_run_config(command, config_path, flags)
    except (pydantic.ValidationError, ValueError) as e:
        _fail(e)


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@click.version_option(version=__version__)
def main(verbose: bool):
    """macorner - Monge-Ampère corner-domain numerical laboratory."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")


@main.command()
@grid_options
@common_options
def solve(config_path, **flags):
    """Solve det D²u = c on the truncated quadrant.

    For 0 < c < 1 the data is P_c^- + t*x1*x2; for c >= 1 it is q + t*x1*x2.

    Examples:
        macorner solve --c 0.75 --t 0.5 --R 8 --h 0.03125
    """
    config = _run_config("solve", config_path, **flags)
    out = output_dir(config)
    artifacts = []
    try:
        u = solve_from_config(config)
    except NonConvergenceError as e:
        artifacts.append(write_json(e.report.to_json_dict(), out / "solve_report.json"))
        write_manifest(out, "solve", config_hash(config), artifacts)
        print_solve_report(e.report)
        _fail(e)
    except Exception as e:
        _fail(e)

    artifacts.extend(write_field(u, out / "field.csv"))
    artifacts.append(write_json(u.report.to_json_dict(), out / "solve_report.json"))
    write_manifest(out, "solve", config_hash(config), artifacts)
    print_solve_report(u.report)
    click.echo(f"Wrote {len(artifacts)} files to {out}")


def _shooting_command(kind: OuterData, config_path, flags) -> None:
    config = _run_config(kind.value, config_path, **flags)
    out = output_dir(config)
    shoot = shoot_pbar if kind is OuterData.PBAR else shoot_punder
    try:
        constants_ = make_angle_constants(config.c)
        result = shoot(
            constants_,
            config.R,
            config.h,
            config.solver_config(),
            shape=config.shape,
        )
    except Exception as e:
        _fail(e)

    summary = result.summary().to_json_dict()
    artifacts = list(write_field(result.field, out / f"{kind.value}.csv"))
    artifacts.append(write_json(summary, out / f"{kind.value}.json"))
    write_manifest(out, kind.value, config_hash(config), artifacts)
    print_shooting_summary(summary)


@main.command()
@grid_options
@common_options
def pbar(config_path, **flags):
    """Shoot for P̄_c: pin u(1,1) = 1 with t in [0, 2s].

    Examples:
        macorner pbar --c 0.75
    """
    _shooting_command(OuterData.PBAR, config_path, flags)


@main.command()
@grid_options
@common_options
def punder(config_path, **flags):
    """Shoot for P̲_c: pin u(1,1) = 0 with t in (-1, 0).

    Examples:
        macorner punder --c 0.75
    """
    _shooting_command(OuterData.PUNDER, config_path, flags)


@main.command()
@click.argument("field_file", type=click.Path(path_type=Path))
@click.option(
    "--analysis",
    "analyses",
    multiple=True,
    type=click.Choice(list(ALL_ANALYSES)),
    help="Analysis to run (repeatable; default: all)",
)
@click.option("--c", "c", type=float, help="Override the c recorded in the field")
@window_options
@common_options
def asymptotics(field_file, analyses, config_path, **flags):
    """Run asymptotic analyses on a field CSV and write one JSON report.

    Examples:
        macorner asymptotics out/pbar.csv --analysis coeff-a --analysis alpha
    """
    config = _run_config("asymptotics", config_path, analyses=list(analyses), **flags)
    out = output_dir(config)
    try:
        u = read_field(field_file)
        c = config.c if "c" in config.model_fields_set else None
        report = run_analyses(
            u,
            c=c,
            analyses=config.analyses or ALL_ANALYSES,
            windows=config.window_config(),
        )
    except Exception as e:
        _fail(e)

    artifacts = [write_json(report, out / "asymptotics.json")]
    limits = report.get("u12-limits")
    if limits:
        for side in ("near", "far"):
            path = out / f"u12_{side}.csv"
            artifacts.append(write_profile(limits[f"{side}_profile"], path))
    write_manifest(out, "asymptotics", config_hash(config), artifacts)
    print_analysis_summary(report)


@main.command()
@click.argument("vertex_file", type=click.Path(path_type=Path))
@click.option("--R", "R", type=float, help="Truncation radius")
@click.option("--h", "h", type=float, help="Grid spacing (1/h integer)")
@window_options
@common_options
def classify(vertex_file, config_path, **flags):
    """Classify vertex regularity from a JSON record or list of records.

    Examples:
        macorner classify vertices.json --threads 4
    """
    config = _run_config("classify", config_path, **flags)
    out = output_dir(config)
    try:
        vertices = load_vertices(vertex_file)
        verdicts = classify_polygon(
            vertices, classifier_config(config), threads=config.threads
        )
    except Exception as e:
        _fail(e)

    payload = [v.to_json_dict() for v in verdicts]
    if len(payload) == 1:
        payload = payload[0]
    artifacts = [write_json(payload, out / "verdicts.json")]
    write_manifest(out, "classify", config_hash(config), artifacts)
    print_verdict_table(verdicts)


@main.command(name="laplace-sector")
@click.option("--c", "c", type=float, help="Right-hand side constant")
@click.option("--h", "h", type=float, help="Grid spacing (1/h integer)")
@click.option("--rho", type=float, multiple=True, help="Inner radius (repeatable)")
@click.option("--beta", type=float, help="Growth exponent of the envelope data")
@common_options
def laplace_sector(config_path, **flags):
    """Decay of sector harmonics across a ρ-ladder.

    Examples:
        macorner laplace-sector --c 0.75 --rho 0.2 --rho 0.1 --rho 0.05
    """
    config = _run_config("laplace-sector", config_path, **flags)
    out = output_dir(config)
    try:
        constants_ = make_angle_constants(config.c)
        steps = sector_decay_ladder(constants_, config.beta, config.rho, config.h)
        artifacts = []
        for rho in config.rho:
            data = envelope_data(constants_, config.beta, rho)
            w = solve_laplace_sector(constants_, rho, data, config.h)
            artifacts.extend(write_field(w, out / f"laplace_rho{rho:g}.csv"))
    except Exception as e:
        _fail(e)

    report = {
        "c": config.c,
        "beta": config.beta,
        "steps": [s.to_json_dict() for s in steps],
    }
    artifacts.append(write_json(report, out / "laplace_sector.json"))
    write_manifest(out, "laplace-sector", config_hash(config), artifacts)
    print_decay_table(steps)


def _sweep_row(c: float, config) -> dict:
    constants_ = make_angle_constants(c)
    solver = config.solver_config()
    upper = shoot_pbar(constants_, config.R, config.h, solver, shape=config.shape)
    lower = shoot_punder(constants_, config.R, config.h, solver, shape=config.shape)
    report = run_analyses(
        upper.field, c, ("alpha", "beta", "coeff-a"), config.window_config()
    )
    return {
        "c": c,
        "pbar_t_star": upper.t_star,
        "pbar_a": report["coeff-a"]["a"],
        "alpha": report["alpha"]["alpha"],
        "beta": report["beta"]["slope"],
        "beta_expected": constants_.beta_minus,
        "punder_t_star": lower.t_star,
        "punder_a": harnack_coefficient(lower.field, constants_, config.far_window).a,
    }


@main.command()
@click.option(
    "--c-values", "c_values", type=float, multiple=True, help="c to sweep (repeatable)"
)
@click.option("--R", "R", type=float, help="Truncation radius")
@click.option("--h", "h", type=float, help="Grid spacing (1/h integer)")
@window_options
@common_options
def sweep(config_path, c_values, **flags):
    """Shoot P̄_c and P̲_c over a c-grid and aggregate t*, a and exponents.

    Examples:
        macorner sweep --c-values 0.5 --c-values 0.75 --threads 2
    """
    config = _run_config("sweep", config_path, c_values=list(c_values), **flags)
    out = output_dir(config)
    try:
        work = functools.partial(_sweep_row, config=config)
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(work, config.c_values))
    except Exception as e:
        _fail(e)

    header = list(rows[0]) if rows else ["c"]
    artifacts = [
        write_json(rows, out / "sweep.json"),
        write_rows(out / "sweep.csv", header, [[r[k] for k in header] for r in rows]),
    ]
    write_manifest(out, "sweep", config_hash(config), artifacts)
    print_sweep_table(rows)


@main.command(name="log-modulus")
@click.option("--epsilon", type=float, help="Outer x1*x2 perturbation (default 0.1)")
@click.option("--h", "h", type=float, help="Grid spacing (1/h integer)")
@common_options
def log_modulus(config_path, **flags):
    """u12(r)*|log r| on a zoom ladder at c = 1 with outer data q + eps*x1*x2.

    Examples:
        macorner log-modulus --epsilon 0.1 --h 0.015625
    """
    config = _run_config("log-modulus", config_path, c=1.0, **flags)
    out = output_dir(config)
    try:
        result = log_modulus_experiment(
            config.epsilon, h=config.h, config=config.solver_config()
        )
    except Exception as e:
        _fail(e)

    artifacts = [write_json(result.to_json_dict(), out / "log_modulus.json")]
    write_manifest(out, "log-modulus", config_hash(config), artifacts)
    ratio = "n/a" if result.ratio is None else f"{result.ratio:.3g}"
    click.echo(
        f"eps={config.epsilon}: max/min of u12*|log r| = {ratio}, "
        f"min(u - q) = {result.lower_margin:.3e}, "
        f"{'passed' if result.passed else 'not passed'}"
    )


@main.command()
@click.option("--c", "c", type=float, help="Right-hand side constant")
@click.option("--R", "R", type=float, help="Truncation radius")
@click.option("--h", "h", type=float, help="Grid spacing (1/h integer)")
@click.option("--pairs", type=int, help="Random ordered data pairs (default 20)")
@common_options
def comparison(config_path, **flags):
    """Check the discrete comparison principle on random ordered data.

    Each pair solves det D²u = c with data q + k*x1*x2 for two k drawn from
    [-1/2, 1/2] by --seed; the solutions must stay ordered like the data.

    Examples:
        macorner comparison --c 1 --R 1 --h 0.0625 --pairs 20 --seed 7
    """
    config = _run_config("comparison", config_path, **flags)
    out = output_dir(config)
    try:
        grid = Grid2D(h=config.h, R=config.R, shape=config.shape)
        summary = random_comparison(
            grid, config.c, config.pairs, config.seed, config.solver_config()
        )
    except Exception as e:
        _fail(e)

    artifacts = [write_json(summary.to_json_dict(), out / "comparison.json")]
    write_manifest(out, "comparison", config_hash(config), artifacts)
    unordered = sum(not trial.ordered for trial in summary.trials)
    click.echo(
        f"seed={summary.seed}: {len(summary.trials) - unordered}/"
        f"{len(summary.trials)} pairs ordered"
    )
    if not summary.passed:
        _fail(ConsistencyError(f"{unordered} random pairs violate comparison"))
