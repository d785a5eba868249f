"""
Tests for run orchestration and run directories.
"""

import json

import pytest

from mildlab.errors import IncompatibleEnsembleError, InvalidArgumentError
from mildlab.metrics import recurrence_error
from mildlab.pipeline import (
    OUTPUT_ROOT_ENV,
    load_run,
    rerun_automorphy,
    resolve_scenario,
    run_automorphy,
    run_automorphy_from_ensembles,
    run_check,
    run_passed,
    run_simulate,
    shift_summary,
)
from mildlab.scenario import scenario_hash


class TestResolveScenario:
    def test_builtin_name(self):
        assert resolve_scenario("linear_test").name == "linear_test"

    def test_scenario_file(self, scenario_file):
        scn = resolve_scenario(str(scenario_file))
        assert scn.name == "linear_from_file"
        assert scn.modes == 8

    def test_delta_override(self):
        assert resolve_scenario("paper_example_5", delta=0.3).delta == 0.3

    def test_negative_delta(self):
        with pytest.raises(InvalidArgumentError):
            resolve_scenario("paper_example_5", delta=-1.0)

    @pytest.mark.parametrize("source", ["no_such_scenario", "missing.toml"])
    def test_unknown_source(self, source, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        with pytest.raises(FileNotFoundError):
            resolve_scenario(source)


class TestCheck:
    def test_writes_report_scenario_and_manifest(self, tmp_path, linear_scenario):
        result = run_check(linear_scenario, out=tmp_path / "check", window=10.0)
        assert result.report.all_pass
        assert result.report_path.name == "hypotheses.txt"
        for name in ("hypotheses.txt", "scenario.json", "manifest.json"):
            assert (result.directory / name).exists()
        manifest = json.loads((result.directory / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["kind"] == "check"
        assert manifest["all_pass"] is True
        assert manifest["scenario_hash"] == scenario_hash(linear_scenario)
        assert set(manifest["versions"]) == {"mildlab", "numpy", "scipy", "pyarrow"}

    def test_default_directory_under_output_root(self, tmp_path, monkeypatch, linear_scenario):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
        result = run_check(linear_scenario, window=10.0)
        expected = f"check-linear_test-{scenario_hash(linear_scenario)}"
        assert result.directory == tmp_path / expected

    def test_failing_check_is_reported(self, tmp_path):
        scn = resolve_scenario("paper_example_5", delta=5.0)
        result = run_check(scn, out=tmp_path / "fail", window=10.0)
        run = load_run(result.directory)
        assert run["details"]["passes.contraction"] == "false"
        assert run_passed(run) is False


class TestSimulate:
    def test_manifest_describes_the_run(self, tmp_path, small_paper_scenario, short_grid):
        result = run_simulate(small_paper_scenario, short_grid, 2, seed=3, out=tmp_path / "sim")
        manifest = result.manifest
        assert manifest["kind"] == "simulate"
        assert manifest["seed"] == 3
        assert manifest["n_paths"] == 2
        assert manifest["modes"] == 16
        assert manifest["grid"]["dt"] == 0.05
        assert manifest["outputs"]["paths"] == ["path-000000.csv", "path-000001.csv"]
        assert len(manifest["iterations"]) == 2
        assert 0 < manifest["vartheta"] < 1
        for name in manifest["outputs"]["paths"]:
            assert (result.directory / name).exists()

    def test_reruns_are_byte_identical(self, tmp_path, small_paper_scenario, short_grid):
        first = run_simulate(small_paper_scenario, short_grid, 2, seed=4, out=tmp_path / "a")
        second = run_simulate(small_paper_scenario, short_grid, 2, seed=4, out=tmp_path / "b")
        for name in first.manifest["outputs"]["paths"]:
            assert (first.directory / name).read_bytes() == (second.directory / name).read_bytes()

    def test_noise_dump_and_convergence_check(
        self, tmp_path, deterministic_scenario, short_grid
    ):
        result = run_simulate(
            deterministic_scenario,
            short_grid,
            1,
            seed=0,
            out=tmp_path / "sim",
            dump_noise=True,
            convergence_check=True,
        )
        noise_files = result.manifest["outputs"]["noise"]
        assert noise_files == ["noise-path-000000.csv", "noise-path-000000-events.csv"]
        assert all((result.directory / name).exists() for name in noise_files)
        study = result.manifest["self_convergence"]
        assert len(study["dts"]) == 3
        assert "convergence_seconds" in result.manifest["timings"]

    def test_parquet_output(self, tmp_path, zero_scenario, short_grid):
        result = run_simulate(
            zero_scenario, short_grid, 1, seed=0, out=tmp_path / "sim", suffix=".parquet"
        )
        assert result.manifest["outputs"]["paths"] == ["path-000000.parquet"]

    def test_load_run_summarizes_iterations(self, tmp_path, zero_scenario, short_grid):
        result = run_simulate(zero_scenario, short_grid, 2, seed=0, out=tmp_path / "sim")
        run = load_run(result.directory)
        assert run["details"]["paths"] == 2
        assert run["details"]["max_iterations"] == 1
        assert run_passed(run)


class TestAutomorphy:
    def test_end_to_end_run(self, tmp_path, small_paper_scenario, short_grid):
        seen = []
        result = run_automorphy(
            small_paper_scenario,
            short_grid,
            n_paths=2,
            seed=1,
            horizon=20.0,
            t_samples=3,
            m=2,
            out=tmp_path / "auto",
            progress_callback=lambda done, total: seen.append((done, total)),
        )
        report = result.report
        assert len(report.rows) == 3 * 4
        assert sum(row.role == "control" for row in report.rows) == 3
        assert seen[-1] == (10, 10)
        assert result.table_path.exists() and result.summary_path.exists()
        assert result.svg_path is None
        manifest = json.loads((result.directory / "manifest.json").read_text(encoding="utf-8"))
        assert len(manifest["shifts"]) == 3
        assert manifest["control_shift"] == pytest.approx(report.control_tau)

        summary = shift_summary(report)
        assert [row["role"] for row in summary] == ["shift"] * 3 + ["control"]
        assert all(row["max_beta"] >= row["mean_beta"] for row in summary)

        run = load_run(result.directory)
        assert run_passed(run) == report.passed

    def test_from_ensembles(self, tmp_path, small_paper_scenario, short_grid):
        directories = [tmp_path / "base", tmp_path / "near", tmp_path / "far"]
        for directory, tau in zip(directories, (0.0, 6.3, 7.0)):
            run_simulate(
                small_paper_scenario, short_grid.shifted(tau), 2, seed=5, out=directory
            )
        result = run_automorphy_from_ensembles(
            directories, t_samples=2, m=2, out=tmp_path / "auto"
        )
        freqs = small_paper_scenario.forcing_frequencies()
        errors = {tau: float(recurrence_error(freqs, tau)) for tau in (6.3, 7.0)}
        control_tau = max(errors, key=errors.get)
        assert result.report.control_tau == pytest.approx(control_tau)
        assert len(result.report.rows) == 2 * 2

    def test_manifest_reproduces_the_run(self, tmp_path, small_paper_scenario, short_grid):
        first = run_automorphy(
            small_paper_scenario,
            short_grid,
            n_paths=2,
            seed=4,
            horizon=15.0,
            count=2,
            t_samples=4,
            m=3,
            pass_fraction=0.75,
            out=tmp_path / "first",
            tol=1e-8,
            max_iter=40,
        )
        manifest = json.loads((first.directory / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["tol"] == 1e-8
        assert manifest["max_iter"] == 40
        assert manifest["t_samples"] == 4
        assert manifest["count"] == 2
        assert manifest["projection_dim"] == 3
        assert manifest["pass_fraction"] == 0.75
        assert manifest["workers"] == 1

        second = rerun_automorphy(first.directory, tmp_path / "second")
        for name in ("automorphy.csv", "automorphy.json", "scenario.json"):
            assert (second.directory / name).read_bytes() == (first.directory / name).read_bytes()

    def test_rerun_from_ensembles(self, tmp_path, zero_scenario, short_grid):
        directories = [tmp_path / "base", tmp_path / "near", tmp_path / "far"]
        for directory, tau in zip(directories, (0.0, 6.3, 7.0)):
            run_simulate(zero_scenario, short_grid.shifted(tau), 2, seed=1, out=directory)
        first = run_automorphy_from_ensembles(
            directories, t_samples=3, m=2, pass_fraction=0.9, out=tmp_path / "first"
        )
        second = rerun_automorphy(first.directory, tmp_path / "second")
        assert second.report.summary() == first.report.summary()
        assert second.table_path.read_bytes() == first.table_path.read_bytes()

    def test_rerun_needs_an_automorphy_run(self, tmp_path, zero_scenario):
        result = run_check(zero_scenario, out=tmp_path / "check")
        with pytest.raises(InvalidArgumentError):
            rerun_automorphy(result.directory, tmp_path / "again")

    def test_single_shifted_ensemble_is_rejected(self, tmp_path, zero_scenario, short_grid):
        base = run_simulate(zero_scenario, short_grid, 2, seed=0, out=tmp_path / "base")
        moved = run_simulate(
            zero_scenario, short_grid.shifted(2.0), 2, seed=0, out=tmp_path / "moved"
        )
        with pytest.raises(InvalidArgumentError, match="two shifted ensembles"):
            run_automorphy_from_ensembles(
                [base.directory, moved.directory], t_samples=2, m=2, out=tmp_path / "auto"
            )
        assert not (tmp_path / "auto").exists()

    def test_incompatible_ensembles(self, tmp_path, zero_scenario, short_grid):
        base = run_simulate(zero_scenario, short_grid, 2, seed=0, out=tmp_path / "base")
        near = run_simulate(
            zero_scenario, short_grid.shifted(2.0), 2, seed=0, out=tmp_path / "near"
        )
        other = run_simulate(
            zero_scenario, short_grid.shifted(3.0), 2, seed=1, out=tmp_path / "other"
        )
        with pytest.raises(IncompatibleEnsembleError):
            run_automorphy_from_ensembles([base.directory, near.directory, other.directory])

    def test_needs_three_directories(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            run_automorphy_from_ensembles([tmp_path])
        with pytest.raises(InvalidArgumentError):
            run_automorphy_from_ensembles([tmp_path, tmp_path])


def test_load_run_rejects_unknown_kind(tmp_path):
    (tmp_path / "manifest.json").write_text('{"kind": "mystery"}', encoding="utf-8")
    with pytest.raises(ValueError, match="unknown run kind"):
        load_run(tmp_path)
