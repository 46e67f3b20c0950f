"""Tests for CLI commands."""

import json

import pytest
import yaml
from click.testing import CliRunner

from macorner import __version__
from macorner.cli import main
from macorner.errors import NonConvergenceError
from macorner.global_solutions import ShootingResult
from macorner.model import make_angle_constants, make_pc
from macorner.schema import ComparisonSummary, ComparisonTrial
from macorner.types import OuterData, Sign
from tests.conftest import (
    make_grid,
    make_solve_report,
    make_vertex_dict,
    sample_quadratic,
    write_vertex_file,
)


@pytest.fixture
def cli_runner():
    """Create a Click test runner."""
    return CliRunner()


@pytest.fixture
def pc_minus_dir(cli_runner, tmp_path):
    """Output of `solve` for P_c^- at c = 3/4 on R = 4, h = 1/16."""
    out = tmp_path / "solve"
    result = cli_runner.invoke(
        main,
        [
            "solve",
            "--c", "0.75",
            "--t", "0",
            "--R", "4",
            "--h", "0.0625",
            "--out", str(out),
        ],
    )  # fmt: skip
    assert result.exit_code == 0, result.output
    return out


class TestSolveCommand:
    """Tests for the solve command."""

    def test_writes_field_and_manifest(self, cli_runner, tmp_path):
        """Test that a converged solve writes the field, report and manifest."""
        result = cli_runner.invoke(
            main,
            ["solve", "--c", "1", "--t", "0", "--R", "4", "--h", "0.03125",
             "--out", str(tmp_path)],
        )  # fmt: skip
        assert result.exit_code == 0, result.output
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "solve"
        assert manifest["artifacts"] == [
            "field.csv",
            "field.meta.json",
            "solve_report.json",
        ]
        assert len(manifest["config_hash"]) == 64
        report = json.loads((tmp_path / "solve_report.json").read_text())
        assert report["converged"]
        meta = json.loads((tmp_path / "field.meta.json").read_text())
        assert meta["c"] == 1.0

    def test_invalid_constant(self, cli_runner, tmp_path):
        """Test that c <= 0 exits with code 1."""
        result = cli_runner.invoke(main, ["solve", "--c", "-1", "--out", str(tmp_path)])
        assert result.exit_code == 1
        assert "Error" in result.output

    def test_non_convergence_exits_2(self, cli_runner, tmp_path, mocker):
        """Test that a failed solve still writes its report and exits 2."""
        failed = make_solve_report(converged=False, final_residual=0.5)
        mocker.patch(
            "macorner.cli.commands.solve_from_config",
            side_effect=NonConvergenceError("Newton stalled", failed),
        )
        result = cli_runner.invoke(main, ["solve", "--out", str(tmp_path)])
        assert result.exit_code == 2
        report = json.loads((tmp_path / "solve_report.json").read_text())
        assert not report["converged"]
        assert report["residual"] == 0.5

    def test_config_file(self, cli_runner, tmp_path):
        """Test that settings are read from a YAML config file."""
        config = tmp_path / "run.yaml"
        config.write_text(yaml.dump({"c": 1.0, "R": 2.0, "h": 0.125}))
        out = tmp_path / "out"
        result = cli_runner.invoke(
            main, ["solve", "--config", str(config), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        meta = json.loads((out / "field.meta.json").read_text())
        assert meta["R"] == 2.0
        assert meta["h"] == 0.125

    def test_flags_override_config_file(self, cli_runner, tmp_path):
        """Test that a flag wins over the config file."""
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"c": 1.0, "R": 2.0, "h": 0.125}))
        result = cli_runner.invoke(
            main,
            ["solve", "--config", str(config), "--R", "1", "--out", str(tmp_path)],
        )
        assert result.exit_code == 0, result.output
        meta = json.loads((tmp_path / "field.meta.json").read_text())
        assert meta["R"] == 1.0

    def test_bad_config_file(self, cli_runner, tmp_path):
        """Test that an unreadable config file exits with code 1."""
        result = cli_runner.invoke(
            main, ["solve", "--config", str(tmp_path / "run.ini")]
        )
        assert result.exit_code == 1


class TestShootingCommands:
    """Tests for pbar and punder."""

    def test_pbar(self, cli_runner, tmp_path):
        """Test that pbar writes the field and a summary hitting u(1,1) = 1."""
        result = cli_runner.invoke(
            main,
            ["pbar", "--c", "0.75", "--R", "4", "--h", "0.125", "--out", str(tmp_path)],
        )
        assert result.exit_code == 0, result.output
        summary = json.loads((tmp_path / "pbar.json").read_text())
        assert summary["kind"] == "pbar"
        assert summary["value_at_target"] == pytest.approx(1.0, abs=1e-6)
        assert (tmp_path / "pbar.csv").exists()

    def test_pbar_rejects_c_above_one(self, cli_runner, tmp_path):
        """Test that c > 1 exits with code 1."""
        result = cli_runner.invoke(main, ["pbar", "--c", "1.5", "--out", str(tmp_path)])
        assert result.exit_code == 1



class TestSweepCommand:
    """Tests for the sweep command."""

    @pytest.fixture
    def quadratic_shots(self, mocker):
        """Replace both shootings by the sampled P_c^± at c = 3/4."""
        constants_ = make_angle_constants(0.75)
        grid = make_grid(R=4.0, h=0.0625)

        def shot(sign, kind, t_star):
            field = sample_quadratic(make_pc(constants_, sign), grid, c=0.75)
            return ShootingResult(
                t_star=t_star,
                field=field,
                target_value=1.0 if kind is OuterData.PBAR else 0.0,
                R=4.0,
                h=0.0625,
                report=make_solve_report(),
                c=0.75,
                kind=kind,
            )

        mocker.patch(
            "macorner.cli.commands.shoot_pbar",
            return_value=shot(Sign.PLUS, OuterData.PBAR, 0.4),
        )
        mocker.patch(
            "macorner.cli.commands.shoot_punder",
            return_value=shot(Sign.MINUS, OuterData.PUNDER, -0.5),
        )

    def test_writes_rows(self, cli_runner, tmp_path, quadratic_shots):
        """Test that sweep writes one row per c to JSON and CSV."""
        result = cli_runner.invoke(
            main,
            ["sweep", "--c-values", "0.75", "--R", "4", "--h", "0.0625",
             "--threads", "1", "--out", str(tmp_path)],
        )  # fmt: skip
        assert result.exit_code == 0, result.output
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "sweep"
        assert manifest["artifacts"] == ["sweep.csv", "sweep.json"]
        header = (tmp_path / "sweep.csv").read_text().splitlines()[0]
        assert header == (
            "c,pbar_t_star,pbar_a,alpha,beta,beta_expected,punder_t_star,punder_a"
        )
        (row,) = json.loads((tmp_path / "sweep.json").read_text())
        assert row["c"] == 0.75
        assert row["pbar_t_star"] == 0.4
        assert row["punder_t_star"] == -0.5
        assert row["alpha"] is None
        assert row["beta"] == pytest.approx(2.0, abs=0.05)
        assert row["beta_expected"] == pytest.approx(1.5)
        assert row["pbar_a"] > 0
        assert row["punder_a"] == pytest.approx(0.0, abs=1e-8)

    def test_nonpositive_c_rejected(self, cli_runner, tmp_path):
        """Test that a nonpositive c in the grid exits with code 1."""
        result = cli_runner.invoke(
            main, ["sweep", "--c-values", "-0.5", "--out", str(tmp_path)]
        )
        assert result.exit_code == 1


class TestAsymptoticsCommand:
    """Tests for the asymptotics command."""

    def test_u12_limits(self, cli_runner, pc_minus_dir, tmp_path):
        """Test that u12 limits of P_c^- are -s in both windows."""
        out = tmp_path / "analysis"
        result = cli_runner.invoke(
            main,
            [
                "asymptotics",
                str(pc_minus_dir / "field.csv"),
                "--analysis", "u12-limits",
                "--out", str(out),
            ],
        )  # fmt: skip
        assert result.exit_code == 0, result.output
        report = json.loads((out / "asymptotics.json").read_text())
        assert report["c"] == 0.75
        assert report["u12-limits"]["near"] == pytest.approx(-0.5, abs=1e-8)
        assert report["u12-limits"]["far"] == pytest.approx(-0.5, abs=1e-8)
        assert (out / "u12_near.csv").exists()
        assert (out / "u12_far.csv").exists()

    def test_truncated_field(self, cli_runner, pc_minus_dir, tmp_path):
        """Test that a field with missing rows exits with code 1."""
        field = pc_minus_dir / "field.csv"
        lines = field.read_text().splitlines()
        field.write_text("\n".join(lines[:-10]) + "\n")
        result = cli_runner.invoke(
            main, ["asymptotics", str(field), "--out", str(tmp_path)]
        )
        assert result.exit_code == 1
        assert "missing" in result.output


class TestClassifyCommand:
    """Tests for the classify command."""

    def test_unit_constant_vertex(self, cli_runner, vertex_file, tmp_path):
        """Test that a unit-band vertex is classified as C2."""
        result = cli_runner.invoke(
            main,
            ["classify", str(vertex_file), "--R", "4", "--h", "0.0625",
             "--out", str(tmp_path)],
        )  # fmt: skip
        assert result.exit_code == 0, result.output
        verdict = json.loads((tmp_path / "verdicts.json").read_text())
        assert verdict["kind"] == "C2"
        assert verdict["label"] == "v0"

    def test_malformed_vertex_file(self, cli_runner, tmp_path):
        """Test that malformed JSON exits with code 1."""
        path = tmp_path / "bad.json"
        path.write_text("{oops")
        result = cli_runner.invoke(
            main, ["classify", str(path), "--out", str(tmp_path)]
        )
        assert result.exit_code == 1

    def test_invalid_record(self, cli_runner, tmp_path):
        """Test that an invalid record exits with code 1."""
        path = tmp_path / "bad.json"
        write_vertex_file(path, make_vertex_dict(p1=0.0))
        result = cli_runner.invoke(
            main, ["classify", str(path), "--out", str(tmp_path)]
        )
        assert result.exit_code == 1


class TestLaplaceSectorCommand:
    """Tests for the laplace-sector command."""

    def test_single_rho(self, cli_runner, tmp_path):
        """Test that one ρ writes one sector field and the decay report."""
        result = cli_runner.invoke(
            main,
            ["laplace-sector", "--c", "0.75", "--rho", "0.5", "--h", "0.0625",
             "--out", str(tmp_path)],
        )  # fmt: skip
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "laplace_sector.json").read_text())
        assert report["beta"] == 1.8
        assert [s["rho"] for s in report["steps"]] == [0.5]
        assert (tmp_path / "laplace_rho0.5.csv").exists()


class TestLogModulusCommand:
    """Tests for the log-modulus command."""

    def test_negative_epsilon(self, cli_runner, tmp_path):
        """Test that epsilon < 0 exits with code 1."""
        result = cli_runner.invoke(
            main, ["log-modulus", "--epsilon", "-1", "--out", str(tmp_path)]
        )
        assert result.exit_code == 1



class TestComparisonCommand:
    """Tests for the comparison command."""

    def _run(self, cli_runner, out, seed="3"):
        return cli_runner.invoke(
            main,
            ["comparison", "--c", "1", "--R", "1", "--h", "0.125", "--pairs", "2",
             "--seed", seed, "--out", str(out)],
        )  # fmt: skip

    def test_writes_summary(self, cli_runner, tmp_path):
        """Test that the seeded pairs are solved, ordered and recorded."""
        result = self._run(cli_runner, tmp_path)
        assert result.exit_code == 0, result.output
        assert "2/2 pairs ordered" in result.output
        summary = json.loads((tmp_path / "comparison.json").read_text())
        assert summary["seed"] == 3
        assert len(summary["trials"]) == 2
        assert summary["passed"]
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "comparison"

    def test_same_seed_same_output(self, cli_runner, tmp_path):
        """Test that a seed reproduces the summary byte for byte."""
        assert self._run(cli_runner, tmp_path / "a").exit_code == 0
        assert self._run(cli_runner, tmp_path / "b").exit_code == 0
        first = (tmp_path / "a" / "comparison.json").read_bytes()
        assert first == (tmp_path / "b" / "comparison.json").read_bytes()

    def test_unordered_pair_exits_2(self, cli_runner, tmp_path, mocker):
        """Test that a violated comparison is a numerical failure."""
        failed = ComparisonSummary(
            c=1.0,
            seed=0,
            spread=0.5,
            trials=[ComparisonTrial(k_lo=-0.1, k_hi=0.2, ordered=False)],
            passed=False,
        )
        mocker.patch(
            "macorner.cli.commands.random_comparison", return_value=failed
        )
        result = cli_runner.invoke(main, ["comparison", "--out", str(tmp_path)])
        assert result.exit_code == 2
        assert (tmp_path / "comparison.json").exists()


class TestVersion:
    """Tests for --version."""

    def test_version(self, cli_runner):
        """Test that the package version is printed."""
        result = cli_runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.output
