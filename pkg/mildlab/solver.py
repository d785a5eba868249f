"""
Mild solutions on a finite grid: the integral operator Lambda, Picard iteration,
forward time stepping and Monte Carlo ensembles.

The lower limits -inf of every integral are replaced by the start of the computational
grid, ``t_start - burn_in``. Coefficients are evaluated at the left end of each cell; the
exponential kernel weights are integrated exactly.
"""

import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.signal import lfilter

from mildlab.errors import ConvergenceError, InvalidArgumentError
from mildlab.noise import LevyPathSegment, compensator_drift, sample_levy_segment
from mildlab.scenario import Scenario
from mildlab.spectral import SpectralVector, semigroup_integral_weights

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 50
DEFAULT_BURN_IN = 3.0
_INDEX_SLACK = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Uniform time grid on [t_start, t_end] preceded by a burn-in window."""

    t_start: float
    t_end: float
    dt: float
    burn_in: float = DEFAULT_BURN_IN

    def __post_init__(self) -> None:
        for name in ("t_start", "t_end", "dt", "burn_in"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidArgumentError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.t_start >= self.t_end:
            raise InvalidArgumentError("t_start must be smaller than t_end")
        if self.dt <= 0:
            raise InvalidArgumentError("dt must be positive")
        if self.burn_in < 0:
            raise InvalidArgumentError("burn_in must be non-negative")
        span = self.t_end - self.t_start
        if abs(round(span / self.dt) * self.dt - span) > 1e-12 * max(1.0, abs(span)):
            raise InvalidArgumentError(f"dt={self.dt} does not divide the window length {span}")

    @property
    def window_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    @property
    def burn_in_steps(self) -> int:
        return int(math.ceil(self.burn_in / self.dt - _INDEX_SLACK))

    @property
    def total_steps(self) -> int:
        return self.burn_in_steps + self.window_steps

    @property
    def start(self) -> float:
        """First point of the computational grid."""
        return self.t_start - self.burn_in_steps * self.dt

    def times(self) -> np.ndarray:
        """Computational grid from t_start - burn_in to t_end."""
        return self.t_start + self.dt * np.arange(-self.burn_in_steps, self.window_steps + 1)

    def window_times(self) -> np.ndarray:
        return self.times()[self.burn_in_steps :]

    def window_slice(self) -> slice:
        return slice(self.burn_in_steps, None)

    def steps(self) -> np.ndarray:
        """Nominal cell lengths."""
        return np.full(self.total_steps, self.dt)

    def index_of(self, t: float) -> int:
        """Index of ``t`` on the computational grid."""
        position = (t - self.start) / self.dt
        index = int(round(position))
        if abs(position - index) > 1e-6 or not 0 <= index <= self.total_steps:
            raise InvalidArgumentError(f"time {t} is not on the grid")
        return index

    def shifted(self, tau: float) -> "GridSpec":
        """The grid translated by ``tau`` (a multiple of dt)."""
        k = int(round(tau / self.dt))
        if abs(k * self.dt - tau) > 1e-9 * max(1.0, abs(tau)):
            raise InvalidArgumentError(f"shift {tau} is not a multiple of dt={self.dt}")
        return GridSpec(
            self.t_start + k * self.dt,
            self.t_end + k * self.dt,
            self.dt,
            self.burn_in_steps * self.dt,
        )

    def refined(self, factor: int) -> "GridSpec":
        """Same computational span with dt divided by ``factor``."""
        if factor < 1:
            raise InvalidArgumentError("refinement factor must be positive")
        return GridSpec(self.t_start, self.t_end, self.dt / factor, self.burn_in_steps * self.dt)

    def as_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "dt": self.dt,
            "burn_in": self.burn_in_steps * self.dt,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        try:
            return cls(data["t_start"], data["t_end"], data["dt"], data["burn_in"])
        except (KeyError, TypeError) as e:
            raise InvalidArgumentError(f"incomplete grid record: {e}") from e


@dataclass(frozen=True)
class SolutionPath:
    """States on the computational grid; rows are basis coefficients."""

    grid: np.ndarray
    states: np.ndarray
    noise_ref: Tuple[int, ...] = ()
    window_start: int = 0
    convergence_trace: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.states.shape[0] != self.grid.shape[0]:
            raise InvalidArgumentError("states and grid must have the same length")
        if not np.all(np.isfinite(self.states)):
            raise InvalidArgumentError("solution states must be finite")

    @property
    def iterations(self) -> int:
        return len(self.convergence_trace)

    @property
    def modes(self) -> int:
        return int(self.states.shape[1])

    def window_times(self) -> np.ndarray:
        return self.grid[self.window_start :]

    def window_states(self) -> np.ndarray:
        return self.states[self.window_start :]

    def state_at(self, t: float) -> SpectralVector:
        matches = np.flatnonzero(np.abs(self.grid - t) <= 1e-9 * max(1.0, abs(t)))
        if not matches.size:
            raise InvalidArgumentError(f"time {t} is not on the solution grid")
        return SpectralVector(self.states[matches[0]])


@dataclass(frozen=True)
class ConvolutionState:
    """Inner convolutions Y1 (deterministic) and Y2 (stochastic) on the grid."""

    y1: np.ndarray
    y2: np.ndarray


class _Stepper:
    """Per-step constants of the discrete mild formulation for one scenario and dt."""

    def __init__(self, scn: Scenario, dt: float):
        self.scn = scn
        self.dt = dt
        sg = scn.semigroup
        self.decay = sg.factors(dt)
        self.weights = semigroup_integral_weights(sg, dt)
        self.kernel1 = self._kernel_constants(scn.B1, dt)
        self.kernel2 = self._kernel_constants(scn.B2, dt)
        self.drift = compensator_drift(scn.jumps, scn.modes)

    @staticmethod
    def _kernel_constants(kernel, dt: float) -> Optional[Tuple[float, float, float]]:
        if kernel.is_zero:
            return None
        rate = kernel.rate
        return rate, math.exp(-rate * dt), -math.expm1(-rate * dt) / rate

    def jump_factors(self, noise: LevyPathSegment):
        """Merged jumps ordered by cell with their kernel decay to the end of the cell."""
        events = [noise.small_jumps, noise.large_jumps]
        cells = np.concatenate([e.cells for e in events])
        modes = np.concatenate([e.modes for e in events])
        sizes = np.concatenate([e.sizes for e in events])
        times = np.concatenate([e.times for e in events])
        order = np.argsort(cells, kind="stable")
        cells, modes, sizes, times = cells[order], modes[order], sizes[order], times[order]
        rate = self.kernel2[0]
        cell_ends = noise.grid[cells + 1]
        return cells, modes, sizes * np.exp(-rate * (cell_ends - times))

    def stochastic_increments(
        self, h: np.ndarray, jump: np.ndarray, noise: LevyPathSegment
    ) -> np.ndarray:
        """Increment of Y2 over each cell given left-point h and jump coupling."""
        _, decay2, weight2 = self.kernel2
        increments = decay2 * h[:-1] * noise.wiener_increments
        increments -= weight2 * jump[:-1] * self.drift
        cells, modes, scaled = self.jump_factors(noise)
        np.add.at(increments, (cells, modes), scaled * jump[cells, modes])
        return increments

    def convolutions(self, fields: dict, noise: LevyPathSegment) -> ConvolutionState:
        n_points, modes = fields["g"].shape
        y1 = np.zeros((n_points, modes))
        y2 = np.zeros((n_points, modes))
        if self.kernel1 is not None:
            _, decay1, weight1 = self.kernel1
            y1 = lfilter([0.0, weight1], [1.0, -decay1], fields["f"], axis=0)
        if self.kernel2 is not None:
            _, decay2, _ = self.kernel2
            increments = self.stochastic_increments(fields["h"], fields["jump"], noise)
            increments = np.vstack([increments, np.zeros((1, modes))])
            y2 = lfilter([0.0, 1.0], [1.0, -decay2], increments, axis=0)
        return ConvolutionState(y1=y1, y2=y2)

    def outer_convolution(self, forcing: np.ndarray) -> np.ndarray:
        """z_{k+1} = exp(-lambda dt) z_k + w * forcing_k from z_0 = 0, per mode."""
        out = np.empty_like(forcing)
        for mode in range(forcing.shape[1]):
            out[:, mode] = lfilter(
                [0.0, self.weights[mode]], [1.0, -self.decay[mode]], forcing[:, mode]
            )
        return out


def _check_noise(grid: GridSpec, noise: LevyPathSegment, modes: int) -> np.ndarray:
    times = grid.times()
    if noise.grid.shape != times.shape or not np.allclose(noise.grid, times, rtol=0, atol=1e-9):
        raise InvalidArgumentError("noise segment and solution grid do not match")
    if noise.modes != modes:
        raise InvalidArgumentError(f"noise has {noise.modes} modes, scenario has {modes}")
    return times


def sample_path_noise(
    scn: Scenario, grid: GridSpec, seed: int, path_index: int = 0
) -> LevyPathSegment:
    """Noise for path ``path_index``, drawn relative to the grid start."""
    return sample_levy_segment(
        scn.wiener, scn.jumps, grid.times(), seed, path_index, steps=grid.steps()
    )


def apply_lambda(
    scn: Scenario, grid: GridSpec, x: SolutionPath, noise: LevyPathSegment
) -> SolutionPath:
    """(Lambda x)(t) on the computational grid."""
    times = _check_noise(grid, noise, scn.modes)
    if x.states.shape != (times.size, scn.modes):
        raise InvalidArgumentError("path and grid do not match")
    return SolutionPath(
        grid=times,
        states=_lambda_states(_Stepper(scn, grid.dt), times, x.states, noise),
        noise_ref=noise.seed_record,
        window_start=grid.burn_in_steps,
    )


def _lambda_states(
    stepper: _Stepper, times: np.ndarray, states: np.ndarray, noise: LevyPathSegment
) -> np.ndarray:
    fields = stepper.scn.evaluate_fields(times, states)
    conv = stepper.convolutions(fields, noise)
    return stepper.outer_convolution(fields["g"] + conv.y1 + conv.y2)


def picard_solve(
    scn: Scenario,
    grid: GridSpec,
    noise: LevyPathSegment,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    vartheta: Optional[float] = None,
) -> Tuple[SolutionPath, Tuple[float, ...]]:
    """Iterate x_{k+1} = Lambda x_k from x_0 = 0 until max_t ||x_{k+1} - x_k|| < tol."""
    if tol <= 0 or max_iter < 1:
        raise InvalidArgumentError("tol must be positive and max_iter at least 1")
    if vartheta is not None and vartheta >= 1.0:
        logger.warning(
            "vartheta = %.4g >= 1 for %s: Picard iteration is not guaranteed to contract",
            vartheta,
            scn.name,
        )
    times = _check_noise(grid, noise, scn.modes)
    stepper = _Stepper(scn, grid.dt)
    current = np.zeros((times.size, scn.modes))
    trace: List[float] = []
    for iteration in range(1, max_iter + 1):
        updated = _lambda_states(stepper, times, current, noise)
        distance = float(np.max(np.linalg.norm(updated - current, axis=1)))
        trace.append(distance)
        logger.debug("picard iteration %d: distance %.3e", iteration, distance)
        current = updated
        if not math.isfinite(distance):
            break
        if distance < tol:
            path = SolutionPath(
                grid=times,
                states=current,
                noise_ref=noise.seed_record,
                window_start=grid.burn_in_steps,
                convergence_trace=tuple(trace),
            )
            return path, tuple(trace)
    raise ConvergenceError(
        f"Picard iteration did not reach tol={tol:g} within {len(trace)} iterations "
        f"(last distance {trace[-1]:.3e})",
        trace=trace,
    )


def fixed_point_residual(
    scn: Scenario, grid: GridSpec, path: SolutionPath, noise: LevyPathSegment
) -> float:
    """max_t ||(Lambda x)(t) - x(t)||."""
    image = apply_lambda(scn, grid, path, noise)
    return float(np.max(np.linalg.norm(image.states - path.states, axis=1)))


def simulate_forward(
    scn: Scenario,
    a: float,
    x_a: SpectralVector,
    grid: GridSpec,
    noise: LevyPathSegment,
) -> SolutionPath:
    """Explicit time stepping of the mild equation started at x(a) = x_a.

    The inner convolutions start from zero at ``a``.
    """
    times = _check_noise(grid, noise, scn.modes)
    if abs(a - times[0]) > 1e-9 * max(1.0, abs(a)):
        raise InvalidArgumentError(f"a={a} must be the grid start {times[0]}")
    if x_a.modes != scn.modes:
        raise InvalidArgumentError(f"x_a has {x_a.modes} modes, scenario has {scn.modes}")
    stepper = _Stepper(scn, grid.dt)
    modes = scn.modes
    states = np.zeros((times.size, modes))
    states[0] = x_a.coeffs
    y1 = np.zeros(modes)
    y2 = np.zeros(modes)
    if stepper.kernel2 is not None:
        cells, jump_modes, scaled = stepper.jump_factors(noise)
        bounds = np.searchsorted(cells, np.arange(times.size))
    for k in range(times.size - 1):
        fields = scn.evaluate_fields(times[k : k + 1], states[k : k + 1])
        g, f, h, jump = (fields[name][0] for name in ("g", "f", "h", "jump"))
        states[k + 1] = stepper.decay * states[k] + stepper.weights * (g + y1 + y2)
        if stepper.kernel1 is not None:
            _, decay1, weight1 = stepper.kernel1
            y1 = decay1 * y1 + weight1 * f
        if stepper.kernel2 is not None:
            _, decay2, weight2 = stepper.kernel2
            increment = decay2 * h * noise.wiener_increments[k] - weight2 * jump * stepper.drift
            lo, hi = bounds[k], bounds[k + 1]
            np.add.at(increment, jump_modes[lo:hi], scaled[lo:hi] * jump[jump_modes[lo:hi]])
            y2 = decay2 * y2 + increment
    return SolutionPath(
        grid=times,
        states=states,
        noise_ref=noise.seed_record,
        window_start=grid.burn_in_steps,
    )


def _solve_one(args) -> Union[SolutionPath, ConvergenceError]:
    scn, grid, seed, index, tol, max_iter = args
    noise = sample_path_noise(scn, grid, seed, index)
    try:
        path, _ = picard_solve(scn, grid, noise, tol=tol, max_iter=max_iter)
    except ConvergenceError as e:
        return ConvergenceError(e.message, e.trace, path_index=index)
    return path


def ensemble_run(
    scn: Scenario,
    grid: GridSpec,
    n_paths: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
    progress_callback: Optional[Callable[[int, int], None]] = None,
    vartheta: Optional[float] = None,
) -> List[SolutionPath]:
    """Picard solutions for paths 0..n_paths-1, path i driven by stream (seed, i).

    The result is ordered by path index whatever the number of workers.
    """
    if n_paths < 1:
        raise InvalidArgumentError("n_paths must be at least 1")
    if workers < 1:
        raise InvalidArgumentError("workers must be at least 1")
    if vartheta is not None and vartheta >= 1.0:
        logger.warning("vartheta = %.4g >= 1 for %s", vartheta, scn.name)
    tasks = [(scn, grid, seed, index, tol, max_iter) for index in range(n_paths)]

    outcomes: List[Union[SolutionPath, ConvergenceError]] = []
    if workers == 1 or n_paths == 1:
        for task in tasks:
            outcomes.append(_solve_one(task))
            if progress_callback is not None:
                progress_callback(len(outcomes), n_paths)
    else:
        with Pool(processes=min(workers, n_paths)) as pool:
            for outcome in pool.imap(_solve_one, tasks):
                outcomes.append(outcome)
                if progress_callback is not None:
                    progress_callback(len(outcomes), n_paths)

    for outcome in outcomes:
        if isinstance(outcome, ConvergenceError):
            raise outcome
    logger.info("solved %d paths for %s", n_paths, scn.name)
    return list(outcomes)


@dataclass(frozen=True)
class SelfConvergence:
    """Endpoint differences between successive dt halvings on one noise realization."""

    dts: Tuple[float, ...]
    differences: Tuple[float, ...]
    ratios: Tuple[float, ...] = field(default=())

    @property
    def ratio(self) -> float:
        return self.ratios[-1] if self.ratios else math.nan

    def as_dict(self) -> dict:
        return {
            "dts": list(self.dts),
            "endpoint_differences": list(self.differences),
            "ratios": list(self.ratios),
            "first_order": bool(self.ratios) and all(0.35 <= r <= 0.7 for r in self.ratios),
        }


def self_convergence(
    scn: Scenario,
    grid: GridSpec,
    seed: int,
    path_index: int = 0,
    levels: int = 3,
    x_a: Optional[SpectralVector] = None,
) -> SelfConvergence:
    """Forward solutions at dt, dt/2, ... on the finest noise sample, coarsened."""
    if levels < 3:
        raise InvalidArgumentError("self-convergence needs at least three levels")
    finest_factor = 2 ** (levels - 1)
    fine_grid = grid.refined(finest_factor)
    fine_noise = sample_path_noise(scn, fine_grid, seed, path_index)
    start = x_a or SpectralVector.zeros(scn.modes)

    endpoints = []
    dts = []
    for level in range(levels):
        factor = 2 ** (levels - 1 - level)
        level_grid = grid.refined(2**level)
        path = simulate_forward(
            scn, level_grid.start, start, level_grid, fine_noise.coarsen(factor)
        )
        endpoints.append(path.states[-1])
        dts.append(level_grid.dt)
    differences = tuple(
        float(np.linalg.norm(endpoints[i] - endpoints[i + 1])) for i in range(levels - 1)
    )
    ratios = tuple(
        differences[i + 1] / differences[i] if differences[i] > 0 else math.nan
        for i in range(len(differences) - 1)
    )
    return SelfConvergence(dts=tuple(dts), differences=differences, ratios=ratios)


def iteration_ratios(trace: Sequence[float]) -> np.ndarray:
    """Successive distance ratios d_{k+1} / d_k of a Picard trace."""
    trace = np.asarray(trace, dtype=float)
    if trace.size < 2:
        return np.zeros(0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return trace[1:] / trace[:-1]
