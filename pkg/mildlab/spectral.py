"""
Truncated Hilbert space H, its sine basis, and diagonal exponentially stable semigroups.

Elements of H are stored as coefficient vectors in an orthonormal basis, so the
Euclidean norm of the coefficients is the H-norm. Physical-space evaluation uses a
midpoint quadrature on (0, 1) whose discrete sine transform is exactly orthogonal
for every mode below the number of nodes.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Tuple

import numpy as np

from mildlab.errors import ConfigurationError, InvalidArgumentError

DEFAULT_MODES = 64
DEFAULT_QUADRATURE_POINTS = 512


class BasisLabel(str, Enum):
    """Supported bases for the truncated space."""

    DIRICHLET_SINE = "dirichlet_sine"
    ABSTRACT_DIAGONAL = "abstract_diagonal"


@dataclass(frozen=True)
class SpaceConfig:
    """Truncation level and basis of H."""

    modes: int = DEFAULT_MODES
    basis_label: BasisLabel = BasisLabel.DIRICHLET_SINE

    def __post_init__(self) -> None:
        if int(self.modes) != self.modes or self.modes < 1:
            raise ConfigurationError(f"modes must be a positive integer, got {self.modes}")
        object.__setattr__(self, "basis_label", BasisLabel(self.basis_label))


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SpectralVector:
    """An element of H given by its basis coefficients."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = _frozen_array(self.coeffs)
        if coeffs.ndim != 1:
            raise InvalidArgumentError("SpectralVector coefficients must be one-dimensional")
        if not np.all(np.isfinite(coeffs)):
            raise InvalidArgumentError("SpectralVector coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, modes: int) -> "SpectralVector":
        return cls(np.zeros(modes))

    @classmethod
    def unit(cls, modes: int, index: int = 0, scale: float = 1.0) -> "SpectralVector":
        coeffs = np.zeros(modes)
        coeffs[index] = scale
        return cls(coeffs)

    @property
    def modes(self) -> int:
        return self.coeffs.shape[0]

    def __add__(self, other: "SpectralVector") -> "SpectralVector":
        return SpectralVector(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralVector") -> "SpectralVector":
        return SpectralVector(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralVector":
        return SpectralVector(self.coeffs * float(scalar))

    __rmul__ = __mul__


def vector_norm(v: SpectralVector) -> float:
    """H-norm of ``v`` (Euclidean norm of orthonormal coefficients)."""
    return float(np.linalg.norm(v.coeffs))


@dataclass(frozen=True)
class Semigroup:
    """Diagonal C0-semigroup T(t) = diag(exp(-lambda_n t)) with ||T(t)|| <= K exp(-omega t)."""

    decay_rates: np.ndarray
    stability_K: float = 1.0
    stability_omega: float = field(default=0.0)

    def __post_init__(self) -> None:
        rates = _frozen_array(self.decay_rates)
        if rates.ndim != 1 or rates.size == 0:
            raise ConfigurationError("decay_rates must be a non-empty one-dimensional array")
        if not np.all(np.isfinite(rates)) or np.any(rates <= 0):
            raise ConfigurationError("decay_rates must be positive and finite")
        object.__setattr__(self, "decay_rates", rates)
        omega = float(self.stability_omega) if self.stability_omega else float(rates.min())
        object.__setattr__(self, "stability_omega", omega)
        object.__setattr__(self, "stability_K", float(self.stability_K))
        if self.stability_K < 1.0:
            raise ConfigurationError(f"stability K must be >= 1, got {self.stability_K}")
        if omega <= 0:
            raise ConfigurationError(f"stability omega must be positive, got {omega}")
        # Diagonal in an orthonormal basis: ||T(t)|| = exp(-min(lambda) t).
        if omega > rates.min() * (1.0 + 1e-12):
            raise ConfigurationError(
                f"stability omega {omega} exceeds the slowest decay rate {rates.min()}"
            )

    @classmethod
    def dirichlet_sine(cls, modes: int) -> "Semigroup":
        """Heat semigroup of the Dirichlet Laplacian on (0, 1): lambda_n = n^2 pi^2."""
        n = np.arange(1, modes + 1, dtype=float)
        return cls(decay_rates=(n * np.pi) ** 2, stability_K=1.0, stability_omega=np.pi**2)

    @classmethod
    def abstract_diagonal(
        cls, rates, stability_K: float = 1.0, stability_omega: float = 0.0
    ) -> "Semigroup":
        return cls(
            decay_rates=np.asarray(rates, dtype=float),
            stability_K=stability_K,
            stability_omega=stability_omega,
        )

    @property
    def modes(self) -> int:
        return self.decay_rates.shape[0]

    def factors(self, t: float) -> np.ndarray:
        """Per-mode multipliers exp(-lambda_n t)."""
        if t < 0:
            raise InvalidArgumentError(f"semigroup time must be non-negative, got {t}")
        return np.exp(-self.decay_rates * t)

    def bound(self, t: float) -> float:
        """Stability envelope K exp(-omega t)."""
        return self.stability_K * float(np.exp(-self.stability_omega * t))


def semigroup_apply(sg: Semigroup, t: float, v: SpectralVector) -> SpectralVector:
    """Apply T(t) to ``v``."""
    if v.modes != sg.modes:
        raise InvalidArgumentError(
            f"vector has {v.modes} modes but the semigroup acts on {sg.modes}"
        )
    return SpectralVector(sg.factors(t) * v.coeffs)


def semigroup_integral_weights(sg: Semigroup, dt: float) -> np.ndarray:
    """Per-mode integral of exp(-lambda_n s) over [0, dt]."""
    if dt < 0:
        raise InvalidArgumentError(f"step must be non-negative, got {dt}")
    return -np.expm1(-sg.decay_rates * dt) / sg.decay_rates


@lru_cache(maxsize=16)
def _sine_quadrature_cached(modes: int, points: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes = (np.arange(points) + 0.5) / points
    synthesis = np.sqrt(2.0) * np.sin(np.pi * np.outer(nodes, np.arange(1, modes + 1)))
    nodes.setflags(write=False)
    synthesis.setflags(write=False)
    return nodes, synthesis


def sine_quadrature(
    modes: int, points: int = DEFAULT_QUADRATURE_POINTS
) -> Tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes on (0, 1) and the synthesis matrix E[j, n] = sqrt(2) sin((n+1) pi r_j)."""
    if modes >= points:
        raise InvalidArgumentError(
            f"quadrature needs more nodes than modes ({points} <= {modes})"
        )
    return _sine_quadrature_cached(int(modes), int(points))


def to_physical(coeffs: np.ndarray, points: int = DEFAULT_QUADRATURE_POINTS) -> np.ndarray:
    """Evaluate coefficient vectors (last axis = modes) at the quadrature nodes."""
    coeffs = np.asarray(coeffs, dtype=float)
    _, synthesis = sine_quadrature(coeffs.shape[-1], points)
    return coeffs @ synthesis.T


def from_physical(
    values: np.ndarray, modes: int, points: int = DEFAULT_QUADRATURE_POINTS
) -> np.ndarray:
    """Project nodal values (last axis = nodes) onto the first ``modes`` basis functions."""
    values = np.asarray(values, dtype=float)
    _, synthesis = sine_quadrature(modes, points)
    return values @ synthesis / points
