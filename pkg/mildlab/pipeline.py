"""
Run orchestration behind the CLI: scenario resolution, hypothesis checks, ensemble
simulation and the automorphy study, each writing a self-describing run directory.
"""

import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from mildlab.errors import IncompatibleEnsembleError, InvalidArgumentError
from mildlab.formats import (
    AUTOMORPHY_SUMMARY_NAME,
    AUTOMORPHY_TABLE_NAME,
    HYPOTHESIS_REPORT_NAME,
    MANIFEST_NAME,
    dump_segment,
    read_ensemble,
    read_hypothesis_report,
    read_manifest,
    write_automorphy_summary,
    write_automorphy_svg,
    write_automorphy_table,
    write_ensemble,
    write_hypothesis_report,
    write_manifest,
)
from mildlab.formats._common import _read_json, _write_json
from mildlab.hypotheses import HypothesisReport, check_hypotheses, compute_vartheta
from mildlab.metrics import (
    DEFAULT_PROJECTION,
    AutomorphyReport,
    ShiftSequence,
    automorphy_profile,
    control_shift,
    find_recurrence_shifts,
    recurrence_error,
)
from mildlab.scenario import (
    BUILTIN_NAMES,
    Scenario,
    builtin_scenario,
    load_scenario,
    scenario_from_dict,
    scenario_hash,
    scenario_to_dict,
)
from mildlab.solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    GridSpec,
    SolutionPath,
    ensemble_run,
    sample_path_noise,
    self_convergence,
)

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "MILDLAB_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "mildlab-runs"
SCENARIO_COPY_NAME = "scenario.json"

ProgressCallback = Optional[Callable[[int, int], None]]


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT)


def resolve_scenario(source: str, delta: Optional[float] = None) -> Scenario:
    """Load ``source`` as a scenario file, or as a built-in name when no such file exists."""
    path = Path(source)
    if path.exists() or path.suffix.lower() in (".toml", ".json"):
        scenario = load_scenario(path)
    elif source in BUILTIN_NAMES:
        scenario = builtin_scenario(source)
    else:
        raise FileNotFoundError(
            f"Scenario not found: {source} (not a file nor one of {', '.join(BUILTIN_NAMES)})"
        )
    if delta is not None:
        if delta < 0:
            raise InvalidArgumentError("delta must be non-negative")
        scenario = scenario.with_delta(delta)
    return scenario


def _run_directory(out: Optional[Path], command: str, scn: Scenario) -> Path:
    if out is not None:
        return Path(out)
    return default_output_root() / f"{command}-{scn.name}-{scenario_hash(scn)}"


def _versions() -> Dict[str, str]:
    import pyarrow
    import scipy

    from mildlab import __version__

    return {
        "mildlab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pyarrow": pyarrow.__version__,
    }


def _base_manifest(kind: str, scn: Scenario) -> Dict[str, Any]:
    return {
        "kind": kind,
        "scenario": scn.name,
        "scenario_hash": scenario_hash(scn),
        "versions": _versions(),
        "outputs": {"scenario": SCENARIO_COPY_NAME},
    }


# check -----------------------------------------------------------------


@dataclass
class CheckResult:
    report: HypothesisReport
    directory: Path
    report_path: Path


def run_check(
    scn: Scenario,
    out: Optional[Path] = None,
    r_grid=None,
    step: Optional[float] = None,
    window: Optional[float] = None,
) -> CheckResult:
    kwargs = {key: value for key, value in (("step", step), ("window", window)) if value}
    started = time.perf_counter()
    report = check_hypotheses(scn, r_grid=r_grid, **kwargs)
    directory = _run_directory(out, "check", scn)
    report_path = write_hypothesis_report(report, directory / HYPOTHESIS_REPORT_NAME)
    _write_json(scenario_to_dict(scn), directory / SCENARIO_COPY_NAME)
    manifest = _base_manifest("check", scn)
    manifest["outputs"]["report"] = HYPOTHESIS_REPORT_NAME
    manifest["all_pass"] = report.all_pass
    manifest["timings"] = {"check_seconds": round(time.perf_counter() - started, 6)}
    write_manifest(manifest, directory)
    return CheckResult(report=report, directory=directory, report_path=report_path)


# simulate --------------------------------------------------------------


@dataclass
class SimulationResult:
    directory: Path
    manifest: Dict[str, Any]
    paths: List[SolutionPath] = field(default_factory=list)


def run_simulate(
    scn: Scenario,
    grid: GridSpec,
    n_paths: int,
    seed: int,
    out: Optional[Path] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
    suffix: str = ".csv",
    convergence_check: bool = False,
    dump_noise: bool = False,
    progress_callback: ProgressCallback = None,
) -> SimulationResult:
    """Solve an ensemble and write path files, the resolved scenario and a manifest."""
    directory = _run_directory(out, "simulate", scn)
    vartheta = compute_vartheta(scn)

    started = time.perf_counter()
    paths = ensemble_run(
        scn,
        grid,
        n_paths,
        seed,
        tol=tol,
        max_iter=max_iter,
        workers=workers,
        progress_callback=progress_callback,
        vartheta=vartheta,
    )
    solved = time.perf_counter()
    files = write_ensemble(paths, directory, suffix=suffix)
    written = time.perf_counter()
    _write_json(scenario_to_dict(scn), directory / SCENARIO_COPY_NAME)

    manifest = _base_manifest("simulate", scn)
    manifest.update(
        seed=int(seed),
        grid=grid.as_dict(),
        n_paths=int(n_paths),
        modes=scn.modes,
        tol=tol,
        max_iter=max_iter,
        workers=int(workers),
        vartheta=vartheta,
        iterations=[path.iterations for path in paths],
    )
    manifest["outputs"]["paths"] = [file.name for file in files]
    if dump_noise:
        increments, events = dump_segment(
            sample_path_noise(scn, grid, seed, 0), directory / f"noise-path-000000{suffix}"
        )
        manifest["outputs"]["noise"] = [increments.name, events.name]
    timings = {
        "solve_seconds": round(solved - started, 6),
        "write_seconds": round(written - solved, 6),
    }
    if convergence_check:
        study = self_convergence(scn, grid, seed, path_index=0)
        manifest["self_convergence"] = study.as_dict()
        timings["convergence_seconds"] = round(time.perf_counter() - written, 6)
    manifest["timings"] = timings
    write_manifest(manifest, directory)
    logger.info("wrote %d paths to %s", len(files), directory)
    return SimulationResult(directory=directory, manifest=manifest, paths=paths)


# automorphy ------------------------------------------------------------


@dataclass
class AutomorphyResult:
    report: AutomorphyReport
    directory: Path
    table_path: Path
    summary_path: Path
    svg_path: Optional[Path] = None


def shift_summary(report: AutomorphyReport) -> List[Dict[str, Any]]:
    """One row per (role, tau): recurrence error plus mean and max beta over sampled t."""
    groups: Dict[Tuple[str, float], List[Any]] = {}
    for row in report.rows:
        groups.setdefault((row.role, row.tau), []).append(row)
    summary = []
    for role, tau in sorted(groups, key=lambda key: (key[0] != "shift", key[1])):
        rows = groups[(role, tau)]
        betas = np.array([row.beta for row in rows])
        summary.append(
            {
                "role": role,
                "tau": float(tau),
                "epsilon": float(rows[0].epsilon),
                "mean_beta": float(betas.mean()),
                "max_beta": float(betas.max()),
            }
        )
    return summary


def _sample_times(window_times: np.ndarray, count: int) -> np.ndarray:
    if count < 1:
        raise InvalidArgumentError("t_samples must be at least 1")
    indices = np.unique(np.linspace(0, window_times.size - 1, count).round().astype(int))
    return window_times[indices]


def _write_automorphy(
    report: AutomorphyReport,
    scn: Scenario,
    directory: Path,
    svg: bool,
    extra: Dict[str, Any],
) -> AutomorphyResult:
    table_path = write_automorphy_table(report, directory / AUTOMORPHY_TABLE_NAME)
    summary_path = write_automorphy_summary(report, directory / AUTOMORPHY_SUMMARY_NAME)
    svg_path = write_automorphy_svg(report, directory / "automorphy.svg") if svg else None
    _write_json(scenario_to_dict(scn), directory / SCENARIO_COPY_NAME)
    manifest = _base_manifest("automorphy", scn)
    manifest.update(extra)
    manifest["outputs"].update(table=table_path.name, summary=summary_path.name)
    if svg_path is not None:
        manifest["outputs"]["chart"] = svg_path.name
    write_manifest(manifest, directory)
    return AutomorphyResult(report, directory, table_path, summary_path, svg_path)


def run_automorphy(
    scn: Scenario,
    grid: GridSpec,
    n_paths: int,
    seed: int,
    horizon: float = 200.0,
    count: int = 3,
    t_samples: int = 20,
    m: int = DEFAULT_PROJECTION,
    pass_fraction: float = 0.5,
    out: Optional[Path] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
    svg: bool = False,
    progress_callback: ProgressCallback = None,
) -> AutomorphyResult:
    """Base, shifted and control ensembles with common random numbers, then beta profile."""
    shifts = find_recurrence_shifts(scn.forcing_frequencies(), horizon, count, dt=grid.dt)
    tau_control = control_shift(shifts, grid.dt)
    offsets = [0.0] + [float(tau) for tau in shifts.shifts] + [tau_control]
    total = len(offsets) * n_paths
    started = time.perf_counter()

    ensembles = []
    for position, tau in enumerate(offsets):
        def report_progress(current: int, _total: int, done: int = position * n_paths) -> None:
            if progress_callback is not None:
                progress_callback(done + current, total)

        ensembles.append(
            ensemble_run(
                scn,
                grid.shifted(tau) if tau else grid,
                n_paths,
                seed,
                tol=tol,
                max_iter=max_iter,
                workers=workers,
                progress_callback=report_progress,
            )
        )
    base, shifted, control = ensembles[0], ensembles[1:-1], ensembles[-1]
    report = automorphy_profile(
        scn,
        base,
        {tau: ensemble for tau, ensemble in zip(shifts.shifts, shifted)},
        shifts,
        _sample_times(grid.window_times(), t_samples),
        m=m,
        control=(tau_control, control),
        pass_fraction=pass_fraction,
    )
    extra = {
        "seed": int(seed),
        "grid": grid.as_dict(),
        "n_paths": int(n_paths),
        "modes": scn.modes,
        "horizon": float(horizon),
        "count": int(count),
        "t_samples": int(t_samples),
        "projection_dim": int(m),
        "pass_fraction": float(pass_fraction),
        "tol": float(tol),
        "max_iter": int(max_iter),
        "workers": int(workers),
        "svg": bool(svg),
        "shifts": [float(tau) for tau in shifts.shifts],
        "control_shift": tau_control,
        "timings": {"total_seconds": round(time.perf_counter() - started, 6)},
    }
    return _write_automorphy(report, scn, _run_directory(out, "automorphy", scn), svg, extra)


def _ensemble_key(manifest: Dict[str, Any]) -> Tuple[Any, ...]:
    grid = manifest.get("grid", {})
    return (
        manifest.get("scenario_hash"),
        manifest.get("seed"),
        manifest.get("n_paths"),
        grid.get("dt"),
        manifest.get("modes"),
        round(grid.get("t_end", 0) - grid.get("t_start", 0), 9),
    )


def run_automorphy_from_ensembles(
    directories: Sequence[Path],
    t_samples: int = 20,
    m: int = DEFAULT_PROJECTION,
    pass_fraction: float = 0.5,
    out: Optional[Path] = None,
    svg: bool = False,
) -> AutomorphyResult:
    """Compare simulated ensembles: the first is the base, the others are translated copies.

    The translated ensemble with the largest recurrence error is the control, so at least
    two are needed.
    """
    if len(directories) < 3:
        raise InvalidArgumentError(
            "provide a base ensemble and at least two shifted ensembles "
            "(the worst recurring one serves as the control)"
        )
    loaded = [read_ensemble(directory) for directory in directories]
    base_manifest, base = loaded[0]
    key = _ensemble_key(base_manifest)
    for directory, (manifest, _) in zip(directories[1:], loaded[1:]):
        if _ensemble_key(manifest) != key:
            raise IncompatibleEnsembleError(
                f"{directory} is not compatible with {directories[0]} "
                "(scenario hash, seed, n_paths, dt, modes and window length must match)"
            )

    scn = scenario_from_dict(_read_json(Path(directories[0]) / SCENARIO_COPY_NAME))
    if scenario_hash(scn) != base_manifest.get("scenario_hash"):
        raise IncompatibleEnsembleError(f"{directories[0]}: scenario copy does not match hash")
    frequencies = scn.forcing_frequencies()
    base_start = base_manifest["grid"]["t_start"]
    taus = [manifest["grid"]["t_start"] - base_start for manifest, _ in loaded[1:]]
    if any(tau <= 0 for tau in taus):
        raise IncompatibleEnsembleError("shifted ensembles must start after the base ensemble")
    errors = [float(recurrence_error(frequencies, tau)) for tau in taus]

    shifted = list(zip(taus, errors, (paths for _, paths in loaded[1:])))
    tau_c, _, paths_c = shifted.pop(int(np.argmax(errors)))
    control = (tau_c, paths_c)
    order = np.argsort([tau for tau, _, _ in shifted])
    shifts = ShiftSequence(
        shifts=np.array([shifted[i][0] for i in order]),
        recurrence_errors=np.array([shifted[i][1] for i in order]),
        frequencies=frequencies,
    )
    report = automorphy_profile(
        scn,
        base,
        {tau: paths for tau, _, paths in shifted},
        shifts,
        _sample_times(base[0].window_times(), t_samples),
        m=m,
        control=control,
        pass_fraction=pass_fraction,
    )
    extra = {
        "seed": base_manifest.get("seed"),
        "grid": base_manifest.get("grid"),
        "n_paths": base_manifest.get("n_paths"),
        "ensembles": [str(directory) for directory in directories],
        "svg": bool(svg),
        "shifts": [float(tau) for tau in shifts.shifts],
        "control_shift": float(tau_c),
        "t_samples": int(t_samples),
        "projection_dim": int(m),
        "pass_fraction": float(pass_fraction),
    }
    directory = Path(out) if out is not None else _run_directory(None, "automorphy", scn)
    return _write_automorphy(report, scn, directory, svg, extra)


def rerun_automorphy(directory: Path, out: Path) -> AutomorphyResult:
    """Repeat an automorphy run from the scenario copy and manifest in ``directory``."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    if manifest.get("kind") != "automorphy":
        raise InvalidArgumentError(f"{directory} does not hold an automorphy run")
    try:
        if "ensembles" in manifest:
            return run_automorphy_from_ensembles(
                [Path(path) for path in manifest["ensembles"]],
                t_samples=manifest["t_samples"],
                m=manifest["projection_dim"],
                pass_fraction=manifest["pass_fraction"],
                out=out,
                svg=manifest["svg"],
            )
        scn = scenario_from_dict(_read_json(directory / SCENARIO_COPY_NAME))
        return run_automorphy(
            scn,
            GridSpec.from_dict(manifest["grid"]),
            manifest["n_paths"],
            manifest["seed"],
            horizon=manifest["horizon"],
            count=manifest["count"],
            t_samples=manifest["t_samples"],
            m=manifest["projection_dim"],
            pass_fraction=manifest["pass_fraction"],
            out=out,
            tol=manifest["tol"],
            max_iter=manifest["max_iter"],
            workers=manifest["workers"],
            svg=manifest["svg"],
        )
    except KeyError as e:
        raise ValueError(f"{directory / MANIFEST_NAME}: missing run parameter {e}") from e


# report ----------------------------------------------------------------


def load_run(directory: Path) -> Dict[str, Any]:
    """Everything needed to render a run directory: manifest plus its main artifact."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    kind = manifest.get("kind")
    details: Dict[str, Any] = {}
    if kind == "check":
        details = read_hypothesis_report(directory / HYPOTHESIS_REPORT_NAME)
    elif kind == "automorphy":
        details = _read_json(directory / AUTOMORPHY_SUMMARY_NAME)
    elif kind == "simulate":
        iterations = manifest.get("iterations") or [0]
        details = {
            "paths": len(manifest.get("outputs", {}).get("paths", [])),
            "max_iterations": max(iterations),
            "mean_iterations": float(np.mean(iterations)),
        }
        if "self_convergence" in manifest:
            details["self_convergence"] = manifest["self_convergence"]
    else:
        raise ValueError(f"{directory / MANIFEST_NAME}: unknown run kind {kind!r}")
    return {"directory": str(directory), "manifest": manifest, "details": details}


def run_passed(run: Dict[str, Any]) -> bool:
    """Exit status of a rendered run: hypotheses or automorphy criterion satisfied."""
    kind = run["manifest"].get("kind")
    if kind == "check":
        return bool(run["manifest"].get("all_pass"))
    if kind == "automorphy":
        return bool(run["details"].get("passed"))
    return True


def grid_from_options(t0: float, t1: float, dt: float, burn_in: float) -> GridSpec:
    return GridSpec(t_start=t0, t_end=t1, dt=dt, burn_in=burn_in)

