"""
Sampling of the Levy noise through its Levy-Ito decomposition.

A jump is a scalar size ``s`` carried by one basis direction ``e_j``; its norm in V is
``|s|``. Jumps with ``|s| < small_cutoff`` are never sampled: the solver replaces them by
nothing and only subtracts the compensator of the sampled small jumps.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Mapping, Optional, Tuple, Union

import numpy as np

from mildlab.errors import ConfigurationError, InvalidArgumentError

logger = logging.getLogger(__name__)


class JumpFamily(str, Enum):
    """Closed-form families for the intensity measure nu."""

    TRUNCATED_POWER_LAW = "truncated_power_law"
    FINITE_ATOMS = "finite_atoms"


class DirectionMode(str, Enum):
    """How a scalar jump size is mapped to a vector in V."""

    FIXED = "fixed"
    RANDOM_MODE = "random_mode"


class Region(str, Enum):
    """Integration regions for jump moments, by jump norm."""

    SMALL = "small"  # 0 < |y| < 1
    LARGE = "large"  # |y| >= 1
    SAMPLED_SMALL = "sampled_small"  # cutoff <= |y| < 1
    SAMPLED = "sampled"  # cutoff <= |y|


class Purpose(IntEnum):
    """Purpose tags separating the random streams of one path."""

    WIENER = 1
    JUMPS = 2


@dataclass(frozen=True)
class StreamId:
    """Entropy of one independent random stream."""

    seed: int
    path_index: int = 0
    purpose: Purpose = Purpose.WIENER
    side: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "path_index", "side"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise InvalidArgumentError(f"stream {name} must be a non-negative integer")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            [int(self.seed), int(self.path_index), int(self.purpose), int(self.side)]
        )


def _positive_array(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    if array.ndim != 1 or array.size == 0:
        raise ConfigurationError(f"{name} must be a non-empty list of numbers")
    if not np.all(np.isfinite(array)) or np.any(array <= 0):
        raise ConfigurationError(f"{name} must be positive and finite")
    return array


@dataclass(frozen=True)
class QWienerConfig:
    """Diagonal covariance operator Q of the V-valued Wiener process."""

    q_eigenvalues: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "q_eigenvalues", _positive_array(self.q_eigenvalues, "q_eigenvalues")
        )

    @classmethod
    def power_decay(cls, modes: int, scale: float = 1.0, exponent: float = 2.0) -> "QWienerConfig":
        """q_n = scale * n^(-exponent)."""
        n = np.arange(1, modes + 1, dtype=float)
        return cls(scale * n ** (-float(exponent)))

    @property
    def modes(self) -> int:
        return self.q_eigenvalues.shape[0]

    @property
    def trace(self) -> float:
        return float(self.q_eigenvalues.sum())

    @property
    def operator_norm(self) -> float:
        return float(self.q_eigenvalues.max())


@dataclass(frozen=True)
class AtomParameters:
    """Finitely many atoms: nu = sum rate_i * Dirac(size_i)."""

    sizes: Tuple[float, ...] = ()
    rates: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        sizes = tuple(float(value) for value in self.sizes)
        rates = tuple(float(value) for value in self.rates)
        if len(sizes) != len(rates):
            raise ConfigurationError("atom sizes and rates must have the same length")
        if any(value == 0 or not np.isfinite(value) for value in sizes):
            raise ConfigurationError("atom sizes must be non-zero and finite")
        if any(value <= 0 or not np.isfinite(value) for value in rates):
            raise ConfigurationError("atom rates must be positive and finite")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "rates", rates)


@dataclass(frozen=True)
class PowerLawParameters:
    """Density scale * |s|^(-1-alpha) on 0 < |s| <= max_size (both signs when symmetric)."""

    alpha: float = 0.5
    scale: float = 1.0
    max_size: float = 2.0
    symmetric: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 2:
            raise ConfigurationError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.scale <= 0:
            raise ConfigurationError(f"scale must be positive, got {self.scale}")
        if not np.isfinite(self.max_size) or self.max_size <= 0:
            raise ConfigurationError(f"max_size must be positive and finite, got {self.max_size}")


JumpParameters = Union[AtomParameters, PowerLawParameters]


@dataclass(frozen=True)
class JumpMeasureConfig:
    """Intensity measure nu together with its sampling cutoff and direction rule."""

    family: JumpFamily = JumpFamily.FINITE_ATOMS
    small_cutoff: float = 0.1
    parameters: JumpParameters = field(default_factory=AtomParameters)
    direction: DirectionMode = DirectionMode.FIXED
    direction_index: int = 0
    direction_modes: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", JumpFamily(self.family))
        object.__setattr__(self, "direction", DirectionMode(self.direction))
        if not 0 < self.small_cutoff < 1:
            raise ConfigurationError(f"small_cutoff must lie in (0, 1), got {self.small_cutoff}")
        expected = (
            AtomParameters if self.family == JumpFamily.FINITE_ATOMS else PowerLawParameters
        )
        if not isinstance(self.parameters, expected):
            raise ConfigurationError(
                f"{self.family.value} expects {expected.__name__}, "
                f"got {type(self.parameters).__name__}"
            )
        if (
            isinstance(self.parameters, PowerLawParameters)
            and self.parameters.max_size <= self.small_cutoff
        ):
            raise ConfigurationError("max_size must exceed small_cutoff")
        if self.direction_index < 0:
            raise ConfigurationError("direction_index must be non-negative")
        if self.direction_modes < 1:
            raise ConfigurationError("direction_modes must be at least 1")

    @classmethod
    def none(cls) -> "JumpMeasureConfig":
        """The zero measure (no jumps at all)."""
        return cls(family=JumpFamily.FINITE_ATOMS, parameters=AtomParameters())

    def required_modes(self) -> int:
        if self.direction == DirectionMode.FIXED:
            return self.direction_index + 1
        return self.direction_modes


def _region_bounds(cfg: JumpMeasureConfig, region: Region) -> Tuple[float, float]:
    lower = {
        Region.SMALL: 0.0,
        Region.LARGE: 1.0,
        Region.SAMPLED_SMALL: cfg.small_cutoff,
        Region.SAMPLED: cfg.small_cutoff,
    }[region]
    upper = 1.0 if region in (Region.SMALL, Region.SAMPLED_SMALL) else np.inf
    return lower, upper


def _power_law_side_integral(params: PowerLawParameters, lo: float, hi: float, exponent: float):
    """scale * integral of s^(exponent - 1 - alpha) over [lo, hi) on one side."""
    hi = min(hi, params.max_size)
    if hi <= lo:
        return 0.0
    k = exponent - params.alpha
    if lo == 0.0 and k <= 0:
        return np.inf
    if k == 0:
        return params.scale * float(np.log(hi / lo))
    return params.scale * (hi**k - lo**k) / k


def jump_moment(
    cfg: JumpMeasureConfig, power: float, region: Union[Region, str], signed: bool = False
) -> float:
    """Integral of |y|^power (or s|s|^(power-1) when ``signed``) against nu over ``region``.

    Returns ``inf`` when the integral diverges.
    """
    lo, hi = _region_bounds(cfg, Region(region))
    params = cfg.parameters
    if isinstance(params, AtomParameters):
        total = 0.0
        for size, rate in zip(params.sizes, params.rates):
            if lo <= abs(size) < hi:
                weight = np.sign(size) if signed else 1.0
                total += rate * weight * abs(size) ** power
        return float(total)

    side = _power_law_side_integral(params, lo, hi, power)
    if signed:
        return 0.0 if params.symmetric else float(side)
    return float(2.0 * side if params.symmetric else side)


def intensity_above_cutoff(cfg: JumpMeasureConfig) -> float:
    """Total jump rate nu({|y| >= small_cutoff}) of the sampled jumps."""
    return jump_moment(cfg, 0.0, Region.SAMPLED)


def large_jump_mass(cfg: JumpMeasureConfig) -> float:
    """The constant b = nu({|y| >= 1})."""
    return jump_moment(cfg, 0.0, Region.LARGE)


def intensity_condition(cfg: JumpMeasureConfig) -> float:
    """Integral of min(|y|^2, 1) against nu; finite for an admissible Levy measure."""
    return jump_moment(cfg, 2.0, Region.SMALL) + large_jump_mass(cfg)


def direction_weights(cfg: JumpMeasureConfig, modes: int) -> np.ndarray:
    """Probability of each basis mode carrying a jump."""
    if cfg.required_modes() > modes:
        raise ConfigurationError(
            f"jump direction needs {cfg.required_modes()} modes but only {modes} are available"
        )
    weights = np.zeros(modes)
    if cfg.direction == DirectionMode.FIXED:
        weights[cfg.direction_index] = 1.0
    else:
        weights[: cfg.direction_modes] = 1.0 / cfg.direction_modes
    return weights


def compensator_drift(cfg: JumpMeasureConfig, modes: int) -> np.ndarray:
    """Integral of y over cutoff <= |y| < 1, per unit time, as basis coefficients."""
    scalar = jump_moment(cfg, 1.0, Region.SAMPLED_SMALL, signed=True)
    return scalar * direction_weights(cfg, modes)


def _sample_sizes(cfg: JumpMeasureConfig, rng: np.random.Generator, count: int) -> np.ndarray:
    params = cfg.parameters
    if count == 0:
        return np.zeros(0)
    if isinstance(params, AtomParameters):
        sizes = np.array(params.sizes)
        rates = np.array(params.rates)
        keep = np.abs(sizes) >= cfg.small_cutoff
        sizes, rates = sizes[keep], rates[keep]
        picks = rng.choice(sizes.size, size=count, p=rates / rates.sum())
        return sizes[picks]

    # Inverse CDF of s^(-1-alpha) restricted to [cutoff, max_size].
    a = params.alpha
    low = cfg.small_cutoff ** (-a)
    high = params.max_size ** (-a)
    u = rng.random(count)
    sizes = (low - u * (low - high)) ** (-1.0 / a)
    if params.symmetric:
        sizes = np.where(rng.random(count) < 0.5, -sizes, sizes)
    return sizes


def _sample_directions(cfg: JumpMeasureConfig, rng: np.random.Generator, count: int) -> np.ndarray:
    if cfg.direction == DirectionMode.FIXED:
        return np.full(count, cfg.direction_index, dtype=np.int64)
    return rng.integers(0, cfg.direction_modes, size=count, dtype=np.int64)


def validate_grid(grid) -> np.ndarray:
    """Return ``grid`` as a float array; zero-length steps are allowed, backward steps are not."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidArgumentError("time grid must be a non-empty one-dimensional array")
    if not np.all(np.isfinite(grid)):
        raise InvalidArgumentError("time grid must be finite")
    if np.any(np.diff(grid) < 0):
        raise InvalidArgumentError("time grid must be non-decreasing")
    return grid


@dataclass(frozen=True)
class JumpEvents:
    """Jump events: exact times, signed sizes, carrying mode, and the grid cell they fall in."""

    times: np.ndarray
    sizes: np.ndarray
    modes: np.ndarray
    cells: np.ndarray

    @classmethod
    def empty(cls) -> "JumpEvents":
        index = np.zeros(0, dtype=np.int64)
        return cls(np.zeros(0), np.zeros(0), index, index.copy())

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def select(self, mask: np.ndarray) -> "JumpEvents":
        return JumpEvents(self.times[mask], self.sizes[mask], self.modes[mask], self.cells[mask])

    def vectors(self, modes: int) -> np.ndarray:
        """Dense jump vectors y, one row per event."""
        out = np.zeros((len(self), modes))
        out[np.arange(len(self)), self.modes] = self.sizes
        return out

    def norms(self) -> np.ndarray:
        return np.abs(self.sizes)


def _resolve_steps(grid: np.ndarray, steps) -> np.ndarray:
    if steps is None:
        return np.diff(grid)
    steps = np.asarray(steps, dtype=float)
    if steps.shape != (grid.size - 1,) or np.any(steps < 0):
        raise InvalidArgumentError("steps must be one non-negative length per grid cell")
    return steps


def sample_wiener_increments(
    cfg: QWienerConfig, grid, stream: StreamId, steps=None
) -> np.ndarray:
    """Q-Wiener increments over each grid step, shape (steps, modes).

    Mode n of step k is N(0, q_n * dt_k); a zero-length step yields a zero increment.
    ``steps`` overrides the cell lengths used for the draws (nominal lengths of a uniform
    grid, so that translated grids share bit-identical increments).
    """
    grid = validate_grid(grid)
    steps = _resolve_steps(grid, steps)
    rng = stream.generator()
    normals = rng.standard_normal((steps.shape[0], cfg.modes))
    return normals * np.sqrt(np.outer(steps, cfg.q_eigenvalues))


def sample_jumps(
    cfg: JumpMeasureConfig, grid, stream: StreamId, steps=None
) -> Tuple[JumpEvents, JumpEvents]:
    """Sample jumps with |y| >= small_cutoff at exact times; returns (small, large) events."""
    grid = validate_grid(grid)
    steps = _resolve_steps(grid, steps)
    rate = intensity_above_cutoff(cfg)
    if not np.isfinite(rate):
        raise ConfigurationError("jump intensity above the small cutoff is infinite")
    if rate == 0 or steps.size == 0:
        return JumpEvents.empty(), JumpEvents.empty()

    rng = stream.generator()
    counts = rng.poisson(rate * steps)
    cells = np.repeat(np.arange(steps.size, dtype=np.int64), counts)
    times = grid[cells] + rng.random(cells.size) * steps[cells]
    sizes = _sample_sizes(cfg, rng, cells.size)
    modes = _sample_directions(cfg, rng, cells.size)

    order = np.argsort(times, kind="stable")
    events = JumpEvents(times[order], sizes[order], modes[order], cells[order])
    is_small = events.norms() < 1.0
    return events.select(is_small), events.select(~is_small)


@dataclass(frozen=True)
class LevyPathSegment:
    """Sampled noise on a time grid."""

    grid: np.ndarray
    wiener_increments: np.ndarray
    small_jumps: JumpEvents
    large_jumps: JumpEvents
    seed_record: Tuple[int, ...]

    @property
    def modes(self) -> int:
        return int(self.wiener_increments.shape[1])

    @property
    def steps(self) -> int:
        return int(self.grid.shape[0] - 1)

    def coarsen(self, factor: int) -> "LevyPathSegment":
        """The same realization on every ``factor``-th grid point."""
        if factor < 1 or self.steps % factor:
            raise InvalidArgumentError(
                f"cannot coarsen {self.steps} steps by a factor of {factor}"
            )
        if factor == 1:
            return self
        increments = self.wiener_increments.reshape(
            self.steps // factor, factor, self.modes
        ).sum(axis=1)

        def regroup(events: JumpEvents) -> JumpEvents:
            return JumpEvents(events.times, events.sizes, events.modes, events.cells // factor)

        return LevyPathSegment(
            grid=self.grid[::factor],
            wiener_increments=increments,
            small_jumps=regroup(self.small_jumps),
            large_jumps=regroup(self.large_jumps),
            seed_record=self.seed_record,
        )


def sample_levy_segment(
    q_cfg: QWienerConfig,
    jump_cfg: JumpMeasureConfig,
    grid,
    seed: int,
    path_index: int = 0,
    side: int = 0,
    steps=None,
) -> LevyPathSegment:
    """Sample the Wiener part and the jumps of one path on ``grid``.

    Draws depend only on the step sizes, so translated grids see the same realization.
    """
    grid = validate_grid(grid)
    wiener = sample_wiener_increments(
        q_cfg, grid, StreamId(seed, path_index, Purpose.WIENER, side), steps=steps
    )
    small, large = sample_jumps(
        jump_cfg, grid, StreamId(seed, path_index, Purpose.JUMPS, side), steps=steps
    )
    logger.debug(
        "path %d: %d small and %d large jumps on %d steps",
        path_index,
        len(small),
        len(large),
        grid.size - 1,
    )
    return LevyPathSegment(
        grid=grid,
        wiener_increments=wiener,
        small_jumps=small,
        large_jumps=large,
        seed_record=(int(seed), int(path_index), int(side)),
    )


def sample_two_sided_segment(
    q_cfg: QWienerConfig,
    jump_cfg: JumpMeasureConfig,
    horizon: float,
    dt: float,
    seed: int,
    path_index: int = 0,
) -> LevyPathSegment:
    """Noise on [-horizon, horizon] built as L(t) = L1(t) for t >= 0 and -L2(-t) for t < 0."""
    if horizon <= 0 or dt <= 0:
        raise InvalidArgumentError("horizon and dt must be positive")
    n_steps = int(round(horizon / dt))
    half = np.arange(n_steps + 1) * dt
    forward = sample_levy_segment(q_cfg, jump_cfg, half, seed, path_index, side=0)
    backward = sample_levy_segment(q_cfg, jump_cfg, half, seed, path_index, side=1)

    def reflect(events: JumpEvents) -> JumpEvents:
        return JumpEvents(-events.times, events.sizes, events.modes, n_steps - 1 - events.cells)

    def merge(past: JumpEvents, future: JumpEvents) -> JumpEvents:
        shifted = JumpEvents(future.times, future.sizes, future.modes, future.cells + n_steps)
        times = np.concatenate([past.times, shifted.times])
        order = np.argsort(times, kind="stable")
        return JumpEvents(
            times[order],
            np.concatenate([past.sizes, shifted.sizes])[order],
            np.concatenate([past.modes, shifted.modes])[order],
            np.concatenate([past.cells, shifted.cells])[order],
        )

    return LevyPathSegment(
        grid=np.concatenate([-half[::-1], half[1:]]),
        wiener_increments=np.concatenate(
            [backward.wiener_increments[::-1], forward.wiener_increments]
        ),
        small_jumps=merge(reflect(backward.small_jumps), forward.small_jumps),
        large_jumps=merge(reflect(backward.large_jumps), forward.large_jumps),
        seed_record=(int(seed), int(path_index), 0, 1),
    )


def levy_path_values(
    segment: LevyPathSegment, jump_cfg: JumpMeasureConfig, anchor: Optional[float] = None
) -> np.ndarray:
    """Cumulative L(t) at each grid point (Wiener part, compensated small jumps, large jumps).

    The path is pinned to zero at ``anchor``: by default t = 0 when it is a grid point,
    otherwise the grid start.
    """
    grid = segment.grid
    modes = segment.modes
    increments = segment.wiener_increments.copy()
    for events in (segment.small_jumps, segment.large_jumps):
        np.add.at(increments, (events.cells, events.modes), events.sizes)
    increments -= np.outer(np.diff(grid), compensator_drift(jump_cfg, modes))

    values = np.vstack([np.zeros((1, modes)), np.cumsum(increments, axis=0)])
    if anchor is None:
        zero_hits = np.flatnonzero(grid == 0.0)
        index = int(zero_hits[0]) if zero_hits.size else 0
    else:
        matches = np.flatnonzero(np.isclose(grid, anchor, rtol=0.0, atol=1e-12))
        if not matches.size:
            raise InvalidArgumentError(f"anchor {anchor} is not a grid point")
        index = int(matches[0])
    return values - values[index]


def config_summary(q_cfg: QWienerConfig, jump_cfg: JumpMeasureConfig) -> Mapping[str, float]:
    """Closed-form noise constants shown in reports."""
    return {
        "q_trace": q_cfg.trace,
        "q_operator_norm": q_cfg.operator_norm,
        "jump_rate_above_cutoff": intensity_above_cutoff(jump_cfg),
        "b": large_jump_mass(jump_cfg),
        "intensity_integral": intensity_condition(jump_cfg),
    }
