#!/usr/bin/env python3
"""
Desk-scale acceptance run for mildlab: each criterion is timed and reported as a
markdown table.
"""

from __future__ import annotations

import argparse
import math
import time
from pathlib import Path
from typing import Any, Callable, Dict, Tuple

import numpy as np
from scipy import integrate

from mildlab.hypotheses import (
    check_hypotheses,
    compute_theta,
    compute_vartheta,
    find_critical_delta,
)
from mildlab.metrics import EmpiricalMeasure, bl_distance
from mildlab.noise import (
    Purpose,
    Region,
    StreamId,
    compensator_drift,
    jump_moment,
    large_jump_mass,
    sample_jumps,
    sample_wiener_increments,
)
from mildlab.pipeline import run_automorphy, run_simulate
from mildlab.scenario import Kernel, builtin_scenario
from mildlab.solver import (
    GridSpec,
    ensemble_run,
    fixed_point_residual,
    iteration_ratios,
    picard_solve,
    sample_path_noise,
    self_convergence,
)
from mildlab.spectral import Semigroup, SpectralVector, semigroup_apply, vector_norm

CRITERIA = (
    "semigroup",
    "kernel_constants",
    "contraction_threshold",
    "noise_statistics",
    "linear_solver",
    "picard_contraction",
    "beta_metric",
    "automorphy",
    "determinism",
)

# Paper family with the additive forcing on, so that solutions are not identically zero.
FORCED = {"coefficients": {"additive": 1.0}}
DETERMINISTIC = {
    "space": {"modes": 16},
    "noise": {
        "wiener": {"q_eigenvalues": {"scale": 1e-12}},
        "jumps": {"parameters": {"sizes": [], "rates": []}},
    },
    "coefficients": {"delta": 0.2, "additive": 1.0},
}


def _timed(check: Callable[[], Tuple[bool, str]]) -> Dict[str, Any]:
    t0 = time.perf_counter()
    passed, detail = check()
    return {"passed": bool(passed), "detail": detail, "seconds": time.perf_counter() - t0}


def check_semigroup(samples: int = 1000, seed: int = 0) -> Tuple[bool, str]:
    sg = Semigroup.dirichlet_sine(64)
    rng = np.random.default_rng(seed)
    worst_bound = worst_composition = 0.0
    for _ in range(samples):
        s, t = rng.uniform(0.0, 2.0, 2)
        v = SpectralVector(rng.standard_normal(64))
        image = semigroup_apply(sg, t, v)
        worst_bound = max(
            worst_bound, vector_norm(image) - math.exp(-(math.pi**2) * t) * vector_norm(v)
        )
        composed = semigroup_apply(sg, s, image)
        direct = semigroup_apply(sg, s + t, v)
        worst_composition = max(worst_composition, vector_norm(composed - direct))
    passed = worst_bound <= 1e-12 and worst_composition <= 1e-12
    return passed, f"bound excess {worst_bound:.2e}, composition error {worst_composition:.2e}"


def check_kernel_constants() -> Tuple[bool, str]:
    worst = 0.0
    for rate in (0.5, 1.0, math.pi**2):
        kernel = Kernel(rate=rate)
        l1, _ = integrate.quad(lambda t: float(kernel(t)), 0.0, np.inf)
        l2, _ = integrate.quad(lambda t: float(kernel(t)) ** 2, 0.0, np.inf)
        worst = max(
            worst,
            abs(kernel.l1_norm - 1.0 / rate),
            abs(kernel.l2_norm_sq - 1.0 / (2.0 * rate)),
            abs(kernel.l1_norm - l1),
            abs(kernel.l2_norm_sq - l2),
        )
    unit = builtin_scenario(
        "paper_example_5",
        {"kernels": {"B1": {"rate": 1.0}, "B2": {"rate": 1.0}}},
    )
    theta = compute_theta(unit)
    return worst <= 1e-8 and theta == 2.0, f"max norm error {worst:.2e}, theta {theta:g}"


def check_contraction_threshold(window: float) -> Tuple[bool, str]:
    scn = builtin_scenario("paper_example_5")
    delta_star = find_critical_delta(scn, window=window)
    at_star = compute_vartheta(scn.with_delta(delta_star), window=window)
    half = check_hypotheses(scn.with_delta(delta_star / 2), window=window).all_pass
    double = check_hypotheses(scn.with_delta(2 * delta_star), window=window).all_pass
    base = compute_vartheta(scn.with_delta(0.05), window=window)
    scaled = compute_vartheta(scn.with_delta(0.1), window=window)
    scaling_error = abs(scaled / (4.0 * base) - 1.0)
    passed = abs(at_star - 1.0) <= 1e-6 and half and not double and scaling_error <= 1e-6
    return passed, (
        f"delta* {delta_star:.6g}, vartheta(delta*) {at_star:.8f}, "
        f"half passes {half}, double passes {double}, scaling error {scaling_error:.1e}"
    )


def check_noise_statistics(
    replicates: int = 10_000, checked_modes: int = 4, seed: int = 0
) -> Tuple[bool, str]:
    """One grid cell per replicate; each target is compared within 3 standard errors."""
    scn = builtin_scenario("paper_example_5")
    dt = 0.1
    grid = np.arange(replicates + 1) * dt

    increments = sample_wiener_increments(scn.wiener, grid, StreamId(seed, 0, Purpose.WIENER))
    target = scn.wiener.q_eigenvalues[:checked_modes] * dt
    variances = increments[:, :checked_modes].var(axis=0, ddof=1)
    variance_z = np.abs(variances - target) / (target * math.sqrt(2.0 / (replicates - 1)))

    cell_grid = np.arange(replicates + 1, dtype=float)
    small, large = sample_jumps(scn.jumps, cell_grid, StreamId(seed, 0, Purpose.JUMPS))
    b = large_jump_mass(scn.jumps)
    counts = np.bincount(large.cells, minlength=replicates)
    count_z = abs(counts.mean() - b) / math.sqrt(b / replicates)

    drift = compensator_drift(scn.jumps, scn.modes).sum()
    sums = np.bincount(small.cells, weights=small.sizes, minlength=replicates) - drift
    second = jump_moment(scn.jumps, 2.0, Region.SAMPLED_SMALL)
    compensated_z = abs(sums.mean()) / math.sqrt(second / replicates)

    worst = max(float(variance_z.max()), count_z, compensated_z)
    return worst <= 3.0, (
        f"max |z| variance {variance_z.max():.2f}, large counts {count_z:.2f}, "
        f"compensated small jumps {compensated_z:.2f}"
    )


def check_linear_solver() -> Tuple[bool, str]:
    scn = builtin_scenario("linear_test")
    grid = GridSpec(0.0, 2.0, 0.01, burn_in=3.0)
    path, _ = picard_solve(scn, grid, sample_path_noise(scn, grid, seed=0))
    expected = np.zeros(scn.modes)
    expected[0] = scn.delta / math.pi**2
    tolerance = 1e-5 + math.exp(-scn.semigroup.stability_omega * grid.burn_in_steps * grid.dt)
    error = float(np.abs(path.window_states() - expected).max())

    study = self_convergence(
        builtin_scenario("paper_example_5", DETERMINISTIC),
        GridSpec(0.0, 2.0, 0.02, burn_in=1.0),
        seed=0,
    )
    passed = error <= tolerance and study.as_dict()["first_order"]
    ratios = ", ".join(f"{ratio:.3f}" for ratio in study.ratios)
    return passed, f"fixed point error {error:.2e}, self-convergence ratios {ratios}"


def check_picard_contraction(
    n_paths: int, grid: GridSpec, window: float, seed: int = 0, tol: float = 1e-6
) -> Tuple[bool, str]:
    scn = builtin_scenario("paper_example_5", FORCED)
    scn = scn.with_delta(find_critical_delta(scn, window=window) / 2)
    vartheta = compute_vartheta(scn, window=window)
    paths = ensemble_run(scn, grid, n_paths, seed, tol=tol, max_iter=30)
    worst_ratio = worst_residual = 0.0
    for index, path in enumerate(paths):
        ratios = iteration_ratios(path.convergence_trace)[3:]
        ratios = ratios[np.isfinite(ratios)]
        if ratios.size:
            worst_ratio = max(worst_ratio, float(ratios.max()))
        noise = sample_path_noise(scn, grid, seed, index)
        worst_residual = max(worst_residual, fixed_point_residual(scn, grid, path, noise))
    iterations = max(path.iterations for path in paths)
    passed = worst_ratio <= vartheta + 0.1 and worst_residual <= 2 * tol
    return passed, (
        f"vartheta {vartheta:.3f}, max iterations {iterations}, "
        f"max late ratio {worst_ratio:.3f}, max residual {worst_residual:.2e}"
    )


def check_beta_metric(triples: int = 100, seed: int = 0) -> Tuple[bool, str]:
    dirac_error = 0.0
    for d in (0.1, 0.5, 1.0, 2.0, 10.0):
        value = bl_distance(EmpiricalMeasure.dirac([0.0]), EmpiricalMeasure.dirac([d]))
        dirac_error = max(dirac_error, abs(value - 2 * d / (2 + d)))

    rng = np.random.default_rng(seed)
    violation = largest = 0.0
    for _ in range(triples):
        mu, nu, rho = (EmpiricalMeasure.uniform(rng.standard_normal((5, 2))) for _ in range(3))
        d_mn, d_nm = bl_distance(mu, nu), bl_distance(nu, mu)
        d_mr, d_rn = bl_distance(mu, rho), bl_distance(rho, nu)
        violation = max(violation, abs(d_mn - d_nm), d_mn - d_mr - d_rn, -d_mn)
        largest = max(largest, d_mn, d_mr, d_rn)
    passed = dirac_error <= 1e-6 and violation <= 1e-8 and largest <= 2.0
    return passed, (
        f"dirac error {dirac_error:.1e}, axiom violation {violation:.1e}, max beta {largest:.3f}"
    )


def check_automorphy(
    base_dir: Path, n_paths: int, grid: GridSpec, horizon: float, window: float, seed: int = 0
) -> Tuple[bool, str]:
    scn = builtin_scenario("paper_example_5", FORCED)
    scn = scn.with_delta(find_critical_delta(scn, window=window) / 2)
    result = run_automorphy(
        scn,
        grid,
        n_paths,
        seed,
        horizon=horizon,
        pass_fraction=0.7,
        out=base_dir / "automorphy",
    )
    report = result.report
    passed = report.passed and report.rank_correlation > 0
    return passed, (
        f"best tau {report.best_tau:.2f}, win fraction {report.win_fraction:.2f}, "
        f"rank correlation {report.rank_correlation:.2f}"
    )


def check_determinism(base_dir: Path, grid: GridSpec, seed: int = 0) -> Tuple[bool, str]:
    scn = builtin_scenario("paper_example_5", FORCED)
    runs = [
        run_simulate(scn, grid, 2, seed, out=base_dir / f"determinism-{name}")
        for name in ("a", "b")
    ]
    names = runs[0].manifest["outputs"]["paths"]
    identical = all(
        (runs[0].directory / name).read_bytes() == (runs[1].directory / name).read_bytes()
        for name in names
    )
    return identical, f"{len(names)} path files compared"


def run_acceptance(
    base_dir: Path,
    *,
    picard_paths: int = 64,
    automorphy_paths: int = 256,
    horizon: float = 200.0,
    replicates: int = 10_000,
    window: float = 200.0,
    grid: GridSpec | None = None,
) -> Dict[str, Dict[str, Any]]:
    base_dir.mkdir(parents=True, exist_ok=True)
    grid = grid or GridSpec(0.0, 10.0, 0.01, burn_in=3.0)
    checks = {
        "semigroup": check_semigroup,
        "kernel_constants": check_kernel_constants,
        "contraction_threshold": lambda: check_contraction_threshold(window),
        "noise_statistics": lambda: check_noise_statistics(replicates),
        "linear_solver": check_linear_solver,
        "picard_contraction": lambda: check_picard_contraction(picard_paths, grid, window),
        "beta_metric": check_beta_metric,
        "automorphy": lambda: check_automorphy(
            base_dir, automorphy_paths, grid, horizon, window
        ),
        "determinism": lambda: check_determinism(base_dir, grid),
    }
    return {name: _timed(checks[name]) for name in CRITERIA}


def render_markdown_report(result: Dict[str, Dict[str, Any]]) -> str:
    lines = [
        "## Acceptance",
        "",
        "| criterion | result | seconds | detail |",
        "|---|---|---:|---|",
    ]
    for name in CRITERIA:
        data = result[name]
        status = "pass" if data["passed"] else "FAIL"
        lines.append(f"| {name} | {status} | {data['seconds']:.2f} | {data['detail']} |")
    return "\n".join(lines)


def main() -> None:
    parser = argparse.ArgumentParser(description="Run the mildlab acceptance criteria.")
    parser.add_argument(
        "--output-dir",
        default="/tmp/mildlab-acceptance",
        help="Directory for run directories written by the pipeline checks.",
    )
    parser.add_argument("--picard-paths", type=int, default=64)
    parser.add_argument("--automorphy-paths", type=int, default=256)
    parser.add_argument("--horizon", type=float, default=200.0)
    parser.add_argument("--replicates", type=int, default=10_000)
    parser.add_argument("--window", type=float, default=200.0)
    args = parser.parse_args()

    result = run_acceptance(
        Path(args.output_dir),
        picard_paths=args.picard_paths,
        automorphy_paths=args.automorphy_paths,
        horizon=args.horizon,
        replicates=args.replicates,
        window=args.window,
    )
    print(render_markdown_report(result))
    if not all(data["passed"] for data in result.values()):
        raise SystemExit(1)


if __name__ == "__main__":
    main()
