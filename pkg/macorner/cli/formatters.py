"""Output formatting functions for CLI commands."""

import csv
import json
from pathlib import Path
from typing import Any

import click

from macorner import __version__, constants
from macorner.schema import DecayStep, Manifest, RegularityVerdict, SolveReport


def write_json(data: Any, path: Path) -> Path:
    """Write sorted, indented JSON so re-runs are byte-identical."""
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def write_manifest(
    out: Path, command: str, config_hash: str, artifacts: list[Path]
) -> Path:
    """Index every artifact of a run, relative to the output directory."""
    names = sorted(str(Path(p).relative_to(out)) for p in artifacts)
    manifest = Manifest(
        command=command, version=__version__, config_hash=config_hash, artifacts=names
    )
    path = out / constants.MANIFEST_FILENAME
    return write_json(manifest.model_dump(mode="json"), path)


def write_rows(path: Path, header: list[str], rows: list[list[Any]]) -> Path:
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def print_solve_report(report: SolveReport) -> None:
    status = "converged" if report.converged else "FAILED"
    click.echo(
        f"Solve {status}: {report.iterations} Newton iterations, "
        f"residual {report.final_residual:.3e} (tolerance {report.tolerance:.1e})"
    )
    if report.fallback_sweeps:
        click.echo(f"  Gauss-Seidel sweeps: {report.fallback_sweeps}")
    if report.continuation:
        click.echo(f"  Continuation steps: {len(report.continuation)}")


def print_shooting_summary(summary: dict[str, Any]) -> None:
    click.echo(
        f"{summary['kind']}: c={summary['c']}  t*={summary['t_star']:.10g}  "
        f"u(1,1)={summary['value_at_target']:.10g}  "
        f"({len(summary['bracket_history'])} solves)"
    )


def print_verdict_table(verdicts: list[RegularityVerdict]) -> None:
    """
    Print vertex verdicts as a formatted table.

    Displays the vertex label, effective constant, regularity kind and the
    measured Hölder exponent where one was resolved.
    """
    labels = [v.label or f"#{i}" for i, v in enumerate(verdicts)]
    width = max(len("Vertex"), *(len(label) for label in labels))

    click.echo(f"{'Vertex':<{width}}  {'c_eff':>10}  {'Kind':<8}  {'alpha':>8}")
    click.echo("-" * (width + 32))
    for label, v in zip(labels, verdicts, strict=True):
        alpha = "-" if v.alpha_measured is None else f"{v.alpha_measured:.3f}"
        click.echo(f"{label:<{width}}  {v.c_eff:>10.6g}  {v.kind.value:<8}  {alpha:>8}")
        for note in v.notes:
            click.echo(f"{'':<{width}}  note: {note}")


def print_decay_table(steps: list[DecayStep]) -> None:
    click.echo(f"{'rho':>8}  {'max |w| on unit arc':>20}")
    click.echo("-" * 30)
    for step in steps:
        click.echo(f"{step.rho:>8.4g}  {step.max_on_unit_arc:>20.6g}")


def print_sweep_table(rows: list[dict[str, Any]]) -> None:
    click.echo(
        f"{'c':>6}  {'t* pbar':>12}  {'a pbar':>10}  {'alpha':>7}  {'beta':>7}  "
        f"{'t* punder':>12}  {'a punder':>10}"
    )
    click.echo("-" * 76)
    for row in rows:

        def num(key, fmt):
            value = row.get(key)
            return "-" if value is None else format(value, fmt)

        click.echo(
            f"{row['c']:>6.4g}  {num('pbar_t_star', '.8f'):>12}  "
            f"{num('pbar_a', '.4g'):>10}  {num('alpha', '.3f'):>7}  "
            f"{num('beta', '.3f'):>7}  {num('punder_t_star', '.8f'):>12}  "
            f"{num('punder_a', '.4g'):>10}"
        )


def print_analysis_summary(report: dict[str, Any]) -> None:
    """One line per analysis with its headline number."""
    if "u12-limits" in report:
        limits = report["u12-limits"]
        click.echo(f"u12 limits: near {limits['near']:.4g}, far {limits['far']:.4g}")
    if "alpha" in report:
        alpha = report["alpha"]["alpha"]
        click.echo("alpha: " + ("degenerate" if alpha is None else f"{alpha:.4g}"))
    if "beta" in report:
        slope = report["beta"]["slope"]
        expected = report["beta"]["beta_expected"]
        shown = "degenerate" if slope is None else f"{slope:.4g}"
        click.echo(f"beta: {shown} (expected {expected:.4g})")
    if "coeff-a" in report:
        coeff = report["coeff-a"]
        click.echo(f"a = {coeff['a']:.6g} (spread {coeff['residual']:.3g})")
    if "conical" in report:
        click.echo(f"conical indicator: {report['conical']['verdict']}")
    if "hessian-audit" in report:
        audit = report["hessian-audit"]
        click.echo(f"Hessian audit: {'passed' if audit['passed'] else 'FAILED'}")
