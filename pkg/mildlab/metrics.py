"""
Bounded-Lipschitz distance between empirical laws, recurrence shifts of quasi-periodic
forcings, and the empirical almost-automorphy-in-distribution test.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog, minimize_scalar
from scipy.sparse import csr_matrix, vstack
from scipy.spatial.distance import cdist
from scipy.stats import spearmanr

from mildlab.errors import IncompatibleEnsembleError, InvalidArgumentError, MildlabError
from mildlab.scenario import Scenario, scenario_hash
from mildlab.solver import SolutionPath

logger = logging.getLogger(__name__)

DEFAULT_PROJECTION = 8
CONTROL_OFFSET = 0.5
TIE_TOLERANCE = 1e-10
MAJORITY = 0.5
_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Finitely supported probability measure on R^m."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        support = np.atleast_2d(np.asarray(self.support, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if support.shape[0] == 0 or weights.shape != (support.shape[0],):
            raise InvalidArgumentError("support must be non-empty with one weight per point")
        if not np.all(np.isfinite(support)):
            raise InvalidArgumentError("support points must be finite")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, points) -> "EmpiricalMeasure":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(points, np.full(points.shape[0], 1.0 / points.shape[0]))

    @classmethod
    def dirac(cls, point) -> "EmpiricalMeasure":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), np.ones(1))

    @property
    def dimension(self) -> int:
        return int(self.support.shape[1])


def _union_support(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> Tuple[np.ndarray, np.ndarray]:
    """Deduplicated union support and the signed weight difference on it."""
    if mu.dimension != nu.dimension:
        raise InvalidArgumentError(
            f"measures live in dimensions {mu.dimension} and {nu.dimension}"
        )
    stacked = np.vstack([mu.support, nu.support])
    points, inverse = np.unique(stacked, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    signed = np.zeros(points.shape[0])
    np.add.at(signed, inverse[: mu.support.shape[0]], mu.weights)
    np.add.at(signed, inverse[mu.support.shape[0] :], -nu.weights)
    return points, signed


def _lipschitz_rows(distances: np.ndarray, n: int, with_L: bool):
    """Rows f_i - f_j (- d_ij L) <= 0 for every ordered pair i != j."""
    i, j = np.nonzero(~np.eye(n, dtype=bool))
    rows = np.arange(i.size)
    width = n + 2 if with_L else n
    data = [np.ones(i.size), -np.ones(i.size)]
    cols = [i, j]
    row_index = [rows, rows]
    if with_L:
        data.append(-distances[i, j])
        cols.append(np.full(i.size, n))
        row_index.append(rows)
    matrix = csr_matrix(
        (np.concatenate(data), (np.concatenate(row_index), np.concatenate(cols))),
        shape=(i.size, width),
    )
    return matrix, i, j


def _solve(c, A_ub, b_ub, bounds) -> float:
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs", options=_LP_OPTIONS)
    if res.status != 0:
        logger.error("bounded-Lipschitz LP failed: %s", res.message)
        raise MildlabError(f"bounded-Lipschitz LP failed: {res.message}")
    return float(-res.fun)


def bl_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """beta(mu, nu) = sup |int f dmu - int f dnu| over ||f||_L + ||f||_inf <= 1.

    Solved exactly as a linear program in the values of f on the union support and the
    constants L (Lipschitz) and c (sup-norm), with L + c <= 1.
    """
    points, signed = _union_support(mu, nu)
    n = points.shape[0]
    if np.all(np.abs(signed) <= 1e-15):
        return 0.0
    if n == 1:
        return 0.0
    distances = cdist(points, points)
    lipschitz, _, _ = _lipschitz_rows(distances, n, with_L=True)
    eye = csr_matrix(np.hstack([np.eye(n), np.zeros((n, 1)), -np.ones((n, 1))]))
    neg_eye = csr_matrix(np.hstack([-np.eye(n), np.zeros((n, 1)), -np.ones((n, 1))]))
    budget = csr_matrix(np.concatenate([np.zeros(n), [1.0, 1.0]])[None, :])
    A_ub = vstack([lipschitz, eye, neg_eye, budget], format="csr")
    b_ub = np.concatenate([np.zeros(A_ub.shape[0] - 1), [1.0]])
    objective = np.concatenate([-signed, [0.0, 0.0]])
    bounds = [(None, None)] * n + [(0, None), (0, None)]
    value = _solve(objective, A_ub, b_ub, bounds)
    return float(min(max(value, 0.0), 2.0))


def bl_distance_bruteforce(
    mu: EmpiricalMeasure, nu: EmpiricalMeasure, scan_points: int = 201
) -> float:
    """Reference value: scan L in [0, 1] with c = 1 - L and an exact inner LP, then refine."""
    points, signed = _union_support(mu, nu)
    n = points.shape[0]
    if n == 1 or np.all(np.abs(signed) <= 1e-15):
        return 0.0
    distances = cdist(points, points)
    lipschitz, i, j = _lipschitz_rows(distances, n, with_L=False)

    def inner(L: float) -> float:
        b_ub = L * distances[i, j]
        bounds = [(-(1.0 - L), 1.0 - L)] * n
        return _solve(-signed, lipschitz, b_ub, bounds)

    grid = np.linspace(0.0, 1.0, scan_points)
    values = np.array([inner(L) for L in grid])
    best = int(np.argmax(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    refined = minimize_scalar(
        lambda L: -inner(L), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
    )
    return float(max(values.max(), -refined.fun))


@dataclass(frozen=True)
class ShiftSequence:
    shifts: np.ndarray
    recurrence_errors: np.ndarray
    frequencies: Tuple[float, ...] = ()

    def __len__(self) -> int:
        return int(self.shifts.shape[0])

    @property
    def best(self) -> Tuple[float, float]:
        index = int(np.argmin(self.recurrence_errors))
        return float(self.shifts[index]), float(self.recurrence_errors[index])


def recurrence_error(frequencies: Sequence[float], tau) -> np.ndarray:
    """Largest circle distance of omega_j * tau to a multiple of 2 pi."""
    freqs = np.asarray(frequencies, dtype=float)
    tau = np.asarray(tau, dtype=float)
    phases = np.multiply.outer(tau, freqs)
    wrapped = np.abs(np.mod(phases + np.pi, 2.0 * np.pi) - np.pi)
    return wrapped.max(axis=-1)


def find_recurrence_shifts(
    frequencies: Sequence[float],
    horizon: float,
    count: int = 3,
    dt: float = 0.01,
    min_shift: Optional[float] = None,
) -> ShiftSequence:
    """The ``count`` shifts tau in [min_shift, horizon] on the dt-grid with the smallest
    simultaneous recurrence error.

    Candidates are local minima of the error along the grid and the two ends of the range.
    ``min_shift`` defaults to half the longest forcing period.
    """
    freqs = tuple(float(abs(value)) for value in frequencies if value != 0)
    if not freqs:
        raise InvalidArgumentError("at least one non-zero frequency is required")
    if horizon <= 0 or dt <= 0 or count < 1:
        raise InvalidArgumentError("horizon, dt and count must be positive")
    if min_shift is None:
        min_shift = math.pi / min(freqs)
    first = max(1, int(math.ceil(min_shift / dt - 1e-9)))
    last = int(math.floor(horizon / dt + 1e-9))
    if last < first:
        raise InvalidArgumentError(
            f"horizon {horizon} is shorter than the minimum shift {min_shift:.4g}"
        )
    taus = np.arange(first, last + 1) * dt
    errors = recurrence_error(freqs, taus)

    candidate = np.zeros(taus.size, dtype=bool)
    candidate[[0, -1]] = True
    if taus.size > 2:
        interior = (errors[1:-1] <= errors[:-2]) & (errors[1:-1] <= errors[2:])
        candidate[1:-1] = interior
    indices = np.flatnonzero(candidate)
    chosen = indices[np.argsort(errors[indices], kind="stable")[:count]]
    chosen = np.sort(chosen)
    return ShiftSequence(shifts=taus[chosen], recurrence_errors=errors[chosen], frequencies=freqs)


def empirical_law(
    ensemble: Sequence[SolutionPath], t: float, m: int = DEFAULT_PROJECTION
) -> EmpiricalMeasure:
    """Uniform measure on the first ``m`` coefficients of every path at time ``t``."""
    if not ensemble:
        raise InvalidArgumentError("ensemble is empty")
    if m < 1 or m > ensemble[0].modes:
        raise InvalidArgumentError(f"projection dimension must lie in 1..{ensemble[0].modes}")
    points = np.vstack([path.state_at(t).coeffs[:m] for path in ensemble])
    return EmpiricalMeasure.uniform(points)


@dataclass(frozen=True)
class AutomorphyRow:
    t: float
    tau: float
    epsilon: float
    beta: float
    role: str = "shift"


@dataclass(frozen=True)
class AutomorphyReport:
    scenario_name: str
    scenario_hash: str
    projection_dim: int
    n_paths: int
    rows: Tuple[AutomorphyRow, ...]
    best_tau: float
    control_tau: float
    rank_correlation: float
    win_fraction: float
    pass_fraction: float

    @property
    def has_control(self) -> bool:
        return not math.isnan(self.control_tau)

    @property
    def passed(self) -> bool:
        """A strict majority of wins over the control, and at least ``pass_fraction``."""
        if not self.has_control:
            return False
        return self.win_fraction > MAJORITY and self.win_fraction >= self.pass_fraction

    def summary(self) -> Dict[str, object]:
        return {
            "scenario": self.scenario_name,
            "scenario_hash": self.scenario_hash,
            "projection_dim": self.projection_dim,
            "n_paths": self.n_paths,
            "best_tau": self.best_tau,
            "control_tau": None if math.isnan(self.control_tau) else self.control_tau,
            "rank_correlation": (
                None if math.isnan(self.rank_correlation) else self.rank_correlation
            ),
            "win_fraction": self.win_fraction,
            "pass_fraction": self.pass_fraction,
            "passed": self.passed,
        }


def control_shift(shifts: ShiftSequence, dt: float) -> float:
    """Best shift offset by CONTROL_OFFSET, snapped to the dt-grid."""
    best_tau, _ = shifts.best
    return round((best_tau + CONTROL_OFFSET) / dt) * dt


def automorphy_profile(
    scn: Scenario,
    base: Sequence[SolutionPath],
    shifted: Mapping[float, Sequence[SolutionPath]],
    shifts: ShiftSequence,
    t_grid: Sequence[float],
    m: int = DEFAULT_PROJECTION,
    control: Optional[Tuple[float, Sequence[SolutionPath]]] = None,
    pass_fraction: float = 0.5,
) -> AutomorphyReport:
    """beta between the law at t + tau (shifted ensemble) and the law at t (base ensemble).

    ``shifted`` maps each shift to an ensemble simulated on the grid translated by that
    shift with the same seeds; ``control`` is (tau_control, ensemble).
    """
    if not 0 < pass_fraction <= 1:
        raise InvalidArgumentError("pass_fraction must lie in (0, 1]")
    n_paths = len(base)
    ensembles = list(shifted.values()) + ([control[1]] if control else [])
    for ensemble in ensembles:
        if len(ensemble) != n_paths:
            raise IncompatibleEnsembleError(
                f"ensemble sizes differ ({len(ensemble)} vs {n_paths} paths)"
            )
    missing = [tau for tau in shifts.shifts if _lookup(shifted, tau) is None]
    if missing:
        raise InvalidArgumentError(f"no shifted ensemble for tau={missing[0]:g}")

    best_tau, _ = shifts.best
    rows: List[AutomorphyRow] = []
    wins = 0
    for t in t_grid:
        reference = empirical_law(base, t, m)
        best_beta = math.nan
        for tau, epsilon in zip(shifts.shifts, shifts.recurrence_errors):
            beta = bl_distance(empirical_law(_lookup(shifted, tau), t + tau, m), reference)
            rows.append(AutomorphyRow(float(t), float(tau), float(epsilon), beta))
            if tau == best_tau:
                best_beta = beta
        if control is not None:
            tau_c, ensemble = control
            beta_c = bl_distance(empirical_law(ensemble, t + tau_c, m), reference)
            epsilon_c = float(recurrence_error(shifts.frequencies, tau_c))
            rows.append(AutomorphyRow(float(t), float(tau_c), epsilon_c, beta_c, "control"))
            if best_beta <= beta_c + TIE_TOLERANCE:
                wins += 1

    epsilons = np.array([row.epsilon for row in rows])
    betas = np.array([row.beta for row in rows])
    correlation = math.nan
    if rows and np.ptp(epsilons) > 0 and np.ptp(betas) > 0:
        correlation = float(spearmanr(epsilons, betas).correlation)

    n_times = len(t_grid)
    # Without a control there is nothing to win against.
    win_fraction = wins / n_times if control is not None and n_times else 0.0
    report = AutomorphyReport(
        scenario_name=scn.name,
        scenario_hash=scenario_hash(scn),
        projection_dim=m,
        n_paths=n_paths,
        rows=tuple(rows),
        best_tau=best_tau,
        control_tau=float(control[0]) if control else math.nan,
        rank_correlation=correlation,
        win_fraction=win_fraction,
        pass_fraction=pass_fraction,
    )
    logger.info(
        "automorphy for %s: win fraction %.2f, rank correlation %s",
        scn.name,
        win_fraction,
        "n/a" if math.isnan(correlation) else f"{correlation:.3f}",
    )
    return report


def _lookup(shifted: Mapping[float, Sequence[SolutionPath]], tau: float):
    for key, ensemble in shifted.items():
        if abs(float(key) - float(tau)) <= 1e-9 * max(1.0, abs(tau)):
            return ensemble
    return None
