"""
Constants and pass/fail flags of the existence theorem's hypotheses for a Scenario.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.signal import lfilter

from mildlab.errors import InvalidArgumentError
from mildlab.noise import intensity_condition
from mildlab.scenario import Kernel, Scenario, eval_envelope, eval_modulus, scenario_hash

logger = logging.getLogger(__name__)

DEFAULT_SUP_STEP = 0.01
DEFAULT_SUP_WINDOW = 200.0
DEFAULT_R_GRID = np.logspace(-3, 3, 121)
WARMUP_DECAYS = 40.0


@dataclass(frozen=True)
class RadiusBudget:
    """Envelope Delta(r) against the bound omega^2 r / (20 theta K^2) on a grid of radii."""

    r_grid: np.ndarray
    envelope: np.ndarray
    bound: np.ndarray

    @property
    def feasible(self) -> np.ndarray:
        return self.envelope <= self.bound

    @property
    def interval(self) -> Optional[Tuple[float, float]]:
        hits = self.r_grid[self.feasible]
        if hits.size == 0:
            return None
        return float(hits.min()), float(hits.max())


@dataclass(frozen=True)
class LConstants:
    g: float = 0.0
    f: float = 0.0
    h: float = 0.0
    F: float = 0.0
    G: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        return {"L_g": self.g, "L_f": self.f, "L_h": self.h, "L_F": self.F, "L_G": self.G}

    def all_finite(self) -> bool:
        return all(math.isfinite(value) for value in self.as_dict().values())


@dataclass(frozen=True)
class HypothesisReport:
    scenario_name: str
    scenario_hash: str
    delta: float
    stability_K: float
    stability_omega: float
    theta: float
    b: float
    kernel_norms: Tuple[float, float, float]
    intensity_integral: float
    radius: RadiusBudget
    L_constants: LConstants
    vartheta: float
    sup_step: float
    sup_window: float
    passes: Dict[str, bool] = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.passes.values())


def kernel_norms(kernel: Kernel) -> Tuple[float, float]:
    """(L1 norm, squared L2 norm) over (0, inf)."""
    return kernel.l1_norm, kernel.l2_norm_sq


def compute_theta(scn: Scenario) -> float:
    b1_l1, _ = kernel_norms(scn.B1)
    b2_l1, b2_l2sq = kernel_norms(scn.B2)
    return max(1.0, b1_l1**2, 4.0 * b2_l2sq, 2.0 * scn.b * b2_l1**2)


def check_radius_budget(scn: Scenario, r_grid=None) -> RadiusBudget:
    r_grid = np.asarray(DEFAULT_R_GRID if r_grid is None else r_grid, dtype=float)
    if r_grid.ndim != 1 or np.any(r_grid <= 0):
        raise InvalidArgumentError("radius grid must contain positive values")
    K = scn.semigroup.stability_K
    omega = scn.semigroup.stability_omega
    bound = omega**2 * r_grid / (20.0 * compute_theta(scn) * K**2)
    return RadiusBudget(r_grid=r_grid, envelope=eval_envelope(scn, r_grid), bound=bound)


def sup_exponential_convolution(
    modulus: Callable[[np.ndarray], np.ndarray],
    rate: float,
    step: float = DEFAULT_SUP_STEP,
    window: float = DEFAULT_SUP_WINDOW,
) -> float:
    """sup over t in [0, window] of the integral of exp(-rate (t - s)) m(s) over s < t.

    The lower limit is truncated after WARMUP_DECAYS / rate time units; between grid points
    m is taken piecewise linear and the exponential weight is integrated exactly.
    """
    if rate <= 0 or step <= 0 or window <= 0:
        raise InvalidArgumentError("rate, step and window must be positive")
    warmup_steps = int(math.ceil(WARMUP_DECAYS / rate / step))
    n_window = int(math.ceil(window / step))
    s = np.arange(-warmup_steps, n_window + 1) * step
    values = np.asarray(modulus(s), dtype=float)

    ah = rate * step
    decay = math.exp(-ah)
    w_old = (-math.expm1(-ah) - ah * decay) / (rate * ah)
    w_new = -math.expm1(-ah) / rate - w_old
    running = lfilter([w_new, w_old], [1.0, -decay], values)
    return float(running[warmup_steps:].max())


def compute_L_constants(
    scn: Scenario, step: float = DEFAULT_SUP_STEP, window: float = DEFAULT_SUP_WINDOW
) -> LConstants:
    """L_g with the semigroup weight, L_f with B1, and L_h, L_F, L_G with B2 squared."""

    def sup(which: str, rate: float) -> float:
        return sup_exponential_convolution(
            lambda s: eval_modulus(scn, which, s), rate, step=step, window=window
        )

    if scn.delta == 0:
        return LConstants()
    omega = scn.semigroup.stability_omega
    L_g = sup("g", omega)
    L_f = 0.0 if scn.B1.is_zero else sup("f", scn.B1.rate)
    if scn.B2.is_zero:
        return LConstants(g=L_g, f=L_f)
    rate2 = 2.0 * scn.B2.rate
    return LConstants(g=L_g, f=L_f, h=sup("h", rate2), F=sup("F", rate2), G=sup("G", rate2))


def vartheta_from_constants(scn: Scenario, L: LConstants) -> float:
    K = scn.semigroup.stability_K
    omega = scn.semigroup.stability_omega
    b1_l1 = scn.B1.l1_norm
    b2_l1 = scn.B2.l1_norm
    bracket = (
        omega * L.g
        + L.f * b1_l1
        + L.h
        + L.F
        + 2.0 * (1.0 + scn.b * b2_l1) * L.G
    )
    return 10.0 * K**2 / omega**2 * bracket


def compute_vartheta(
    scn: Scenario, step: float = DEFAULT_SUP_STEP, window: float = DEFAULT_SUP_WINDOW
) -> float:
    return vartheta_from_constants(scn, compute_L_constants(scn, step=step, window=window))


def find_critical_delta(
    scn: Scenario,
    step: float = DEFAULT_SUP_STEP,
    window: float = DEFAULT_SUP_WINDOW,
    xtol: float = 1e-12,
) -> float:
    """The amplitude delta* at which vartheta reaches 1 (``inf`` if it never does)."""

    def excess(delta: float) -> float:
        return compute_vartheta(scn.with_delta(delta), step=step, window=window) - 1.0

    high = 1.0
    for _ in range(60):
        value = compute_vartheta(scn.with_delta(high), step=step, window=window)
        if value == 0:
            return math.inf
        if value > 1.0:
            break
        high *= 2.0
    else:
        return math.inf
    root = brentq(excess, 0.0, high, xtol=xtol, rtol=4 * np.finfo(float).eps)
    logger.info("critical delta for %s: %.9g", scn.name, root)
    return float(root)


def check_hypotheses(
    scn: Scenario,
    r_grid=None,
    step: float = DEFAULT_SUP_STEP,
    window: float = DEFAULT_SUP_WINDOW,
) -> HypothesisReport:
    """Evaluate every checkable hypothesis of the existence theorem."""
    theta = compute_theta(scn)
    radius = check_radius_budget(scn, r_grid)
    L = compute_L_constants(scn, step=step, window=window)
    vartheta = vartheta_from_constants(scn, L)
    intensity = intensity_condition(scn.jumps)
    passes = {
        "intensity_finite": math.isfinite(intensity),
        "L_finite": L.all_finite(),
        "radius_feasible": radius.interval is not None,
        "contraction": vartheta < 1.0,
    }
    report = HypothesisReport(
        scenario_name=scn.name,
        scenario_hash=scenario_hash(scn),
        delta=scn.delta,
        stability_K=scn.semigroup.stability_K,
        stability_omega=scn.semigroup.stability_omega,
        theta=theta,
        b=scn.b,
        kernel_norms=(scn.B1.l1_norm, scn.B2.l1_norm, scn.B2.l2_norm_sq),
        intensity_integral=intensity,
        radius=radius,
        L_constants=L,
        vartheta=vartheta,
        sup_step=step,
        sup_window=window,
        passes=passes,
    )
    level = logging.INFO if report.all_pass else logging.WARNING
    logger.log(level, "hypotheses for %s: %s", scn.name, summary_line(report))
    return report


def report_to_dict(report: HypothesisReport) -> Dict[str, object]:
    interval = report.radius.interval
    return {
        "scenario": report.scenario_name,
        "scenario_hash": report.scenario_hash,
        "delta": report.delta,
        "K": report.stability_K,
        "omega": report.stability_omega,
        "theta": report.theta,
        "b": report.b,
        "B1_L1": report.kernel_norms[0],
        "B2_L1": report.kernel_norms[1],
        "B2_L2_squared": report.kernel_norms[2],
        "intensity_integral": report.intensity_integral,
        "radius_interval": list(interval) if interval else None,
        "radius_grid": [float(report.radius.r_grid[0]), float(report.radius.r_grid[-1])],
        **report.L_constants.as_dict(),
        "vartheta": report.vartheta,
        "sup_step": report.sup_step,
        "sup_window": report.sup_window,
        "passes": dict(report.passes),
        "all_pass": report.all_pass,
    }


def report_to_text(report: HypothesisReport) -> str:
    """Key/value serialization, one ``key = value`` per line."""
    lines = []
    for key, value in report_to_dict(report).items():
        if isinstance(value, dict):
            for sub_key, sub_value in value.items():
                lines.append(f"{key}.{sub_key} = {str(sub_value).lower()}")
        elif isinstance(value, bool):
            lines.append(f"{key} = {str(value).lower()}")
        elif isinstance(value, float):
            lines.append(f"{key} = {value:.12g}")
        elif value is None:
            lines.append(f"{key} = none")
        elif isinstance(value, list):
            lines.append(f"{key} = " + ", ".join(f"{item:.12g}" for item in value))
        else:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def summary_line(report: HypothesisReport) -> str:
    failed = [name for name, ok in report.passes.items() if not ok]
    status = "PASS" if not failed else "FAIL (" + ", ".join(failed) + ")"
    return (
        f"{status} {report.scenario_name} delta={report.delta:.6g} "
        f"theta={report.theta:.6g} vartheta={report.vartheta:.6g}"
    )
