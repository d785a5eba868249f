"""
Tests for CLI commands.
"""

import json
import os
import subprocess
import sys

import pytest
from typer.testing import CliRunner

from mildlab import __version__
from mildlab.cli import app

runner = CliRunner()

SMALL_GRID = ["--t1", "1", "--dt", "0.05", "--burn-in", "1"]


class TestCLI:
    """Test CLI commands."""

    def test_cli_help(self):
        result = runner.invoke(app, ["--help"])
        assert result.exit_code == 0
        assert "mildlab" in result.output.lower()
        for command in ("check", "simulate", "automorphy", "report"):
            assert command in result.output

    def test_cli_without_command_prints_help(self):
        result = runner.invoke(app, [])
        assert result.exit_code == 0
        assert "Usage" in result.output

    def test_cli_help_with_gbk_encoding(self):
        """--help works under GBK-style console encoding."""
        env = os.environ.copy()
        env["PYTHONIOENCODING"] = "gbk"
        result = subprocess.run(
            [sys.executable, "-m", "mildlab", "--help"],
            capture_output=True,
            text=True,
            encoding="gbk",
            errors="replace",
            env=env,
            cwd=os.getcwd(),
        )

        assert result.returncode == 0
        assert "Usage:" in result.stdout
        assert "UnicodeEncodeError" not in result.stderr

    def test_check_renders_under_gbk_encoding(self, tmp_path):
        """Rich panels fall back to ASCII labels instead of crashing."""
        env = os.environ.copy()
        env["PYTHONIOENCODING"] = "gbk"
        argv = [
            sys.executable,
            "-m",
            "mildlab",
            "check",
            "linear_test",
            "--window",
            "10",
            "--out",
            str(tmp_path / "check"),
        ]
        result = subprocess.run(
            argv,
            capture_output=True,
            text=True,
            encoding="gbk",
            errors="replace",
            env=env,
            cwd=os.getcwd(),
        )

        assert result.returncode == 0
        assert "UnicodeEncodeError" not in result.stderr

    def test_cli_version(self):
        result = runner.invoke(app, ["--version"])
        assert result.exit_code == 0
        assert f"mildlab-cli version {__version__}" in result.output

    def test_cli_rejects_invalid_output_format(self):
        result = runner.invoke(app, ["-o", "xml", "check", "linear_test"])
        assert result.exit_code == 2


class TestCheckCommand:
    def test_passing_scenario(self, tmp_path):
        result = runner.invoke(
            app, ["check", "linear_test", "--window", "10", "--out", str(tmp_path / "c")]
        )
        assert result.exit_code == 0
        assert "PASS linear_test" in result.output
        assert (tmp_path / "c" / "hypotheses.txt").exists()

    def test_large_delta_fails(self, tmp_path):
        result = runner.invoke(
            app,
            [
                "-o",
                "plain",
                "check",
                "paper_example_5",
                "--delta",
                "5",
                "--window",
                "10",
                "--out",
                str(tmp_path / "c"),
            ],
        )
        assert result.exit_code == 1
        assert "FAIL (contraction) paper_example_5" in result.stdout

    def test_json_output(self, tmp_path, scenario_file):
        result = runner.invoke(
            app,
            ["-o", "json", "check", str(scenario_file), "--window", "10", "--out", str(tmp_path)],
        )
        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["scenario"] == "linear_from_file"
        assert data["delta"] == 0.5
        assert data["passes"]["contraction"] is True

    def test_missing_scenario(self):
        result = runner.invoke(app, ["check", "no_such_scenario"])
        assert result.exit_code == 2
        assert "Scenario not found" in result.output

    def test_invalid_scenario_file(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text('builtin = "zero"\n[space]\nmodes = -1\n', encoding="utf-8")
        result = runner.invoke(app, ["check", str(path)])
        assert result.exit_code == 2


class TestSimulateCommand:
    def test_json_manifest(self, tmp_path):
        out = tmp_path / "sim"
        result = runner.invoke(
            app,
            ["-o", "json", "simulate", "linear_test", "-n", "2", *SMALL_GRID, "--out", str(out)],
        )
        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["manifest"]["n_paths"] == 2
        assert data["manifest"]["outputs"]["paths"] == ["path-000000.csv", "path-000001.csv"]
        assert (out / "manifest.json").exists()

    def test_reruns_are_byte_identical(self, tmp_path):
        outputs = []
        for name in ("a", "b"):
            out = tmp_path / name
            result = runner.invoke(
                app,
                [
                    "-o",
                    "plain",
                    "simulate",
                    "paper_example_5",
                    "-n",
                    "2",
                    "--seed",
                    "7",
                    *SMALL_GRID,
                    "--out",
                    str(out),
                ],
            )
            assert result.exit_code == 0
            outputs.append(out)
        for name in ("path-000000.csv", "path-000001.csv"):
            assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()

    def test_parquet_and_noise_dump(self, tmp_path):
        out = tmp_path / "sim"
        result = runner.invoke(
            app,
            [
                "simulate",
                "zero",
                "-n",
                "1",
                *SMALL_GRID,
                "--format",
                "parquet",
                "--dump-noise",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0
        assert (out / "path-000000.parquet").exists()
        assert (out / "noise-path-000000.parquet").exists()
        assert (out / "noise-path-000000-events.parquet").exists()

    def test_dt_must_divide_window(self, tmp_path):
        result = runner.invoke(
            app, ["simulate", "zero", "--t1", "1", "--dt", "0.3", "--out", str(tmp_path)]
        )
        assert result.exit_code == 2

    def test_convergence_failure_exits_one(self, tmp_path):
        result = runner.invoke(
            app,
            [
                "simulate",
                "linear_test",
                "-n",
                "1",
                *SMALL_GRID,
                "--tol",
                "1e-300",
                "--max-iter",
                "1",
                "--out",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 1
        assert "path 0" in result.output


class TestAutomorphyCommand:
    @pytest.mark.parametrize(
        "argv",
        [
            ["automorphy"],
            ["automorphy", "zero", "--ensemble", "somewhere"],
        ],
    )
    def test_scenario_xor_ensemble(self, argv):
        result = runner.invoke(app, argv)
        assert result.exit_code == 2
        assert "either a scenario or --ensemble" in result.output

    def test_from_ensembles(self, tmp_path):
        for name, t0, t1 in (("base", "0", "1"), ("near", "2", "3"), ("far", "3", "4")):
            result = runner.invoke(
                app,
                [
                    "-o",
                    "plain",
                    "simulate",
                    "zero",
                    "-n",
                    "2",
                    "--t0",
                    t0,
                    "--t1",
                    t1,
                    "--dt",
                    "0.05",
                    "--burn-in",
                    "1",
                    "--out",
                    str(tmp_path / name),
                ],
            )
            assert result.exit_code == 0
        result = runner.invoke(
            app,
            [
                "-o",
                "json",
                "automorphy",
                "-e",
                str(tmp_path / "base"),
                "-e",
                str(tmp_path / "near"),
                "-e",
                str(tmp_path / "far"),
                "--t-samples",
                "2",
                "-m",
                "2",
                "--out",
                str(tmp_path / "auto"),
            ],
        )
        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["summary"]["passed"] is True
        # tau = 3 recurs worse than tau = 2 and becomes the control.
        assert data["shifts"][0]["tau"] == pytest.approx(2.0)
        assert data["summary"]["control_tau"] == pytest.approx(3.0)
        assert (tmp_path / "auto" / "automorphy.csv").exists()


class TestReportCommand:
    def test_report_of_check_run(self, tmp_path):
        out = tmp_path / "c"
        runner.invoke(app, ["check", "linear_test", "--window", "10", "--out", str(out)])
        result = runner.invoke(app, ["-o", "json", "report", str(out)])
        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["manifest"]["kind"] == "check"
        assert data["details"]["all_pass"] == "true"

    def test_report_of_failed_check_exits_one(self, tmp_path):
        out = tmp_path / "c"
        runner.invoke(
            app,
            ["check", "paper_example_5", "--delta", "5", "--window", "10", "--out", str(out)],
        )
        result = runner.invoke(app, ["report", str(out)])
        assert result.exit_code == 1

    def test_report_plain(self, tmp_path):
        out = tmp_path / "sim"
        runner.invoke(app, ["simulate", "zero", "-n", "1", *SMALL_GRID, "--out", str(out)])
        result = runner.invoke(app, ["-o", "plain", "report", str(out)])
        assert result.exit_code == 0
        assert "kind\tsimulate" in result.stdout
        assert "paths\t1" in result.stdout

    def test_report_missing_directory(self, tmp_path):
        result = runner.invoke(app, ["report", str(tmp_path / "missing")])
        assert result.exit_code == 2
