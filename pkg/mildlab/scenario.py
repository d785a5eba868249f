"""
Problem instances: semigroup, kernels, coefficient families, noise and moduli.

A scenario is loaded from a TOML or JSON file (optionally layered over a built-in) and is
validated eagerly; every value object is immutable afterwards.
"""

import copy
import hashlib
import json
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from mildlab.errors import ConfigurationError, InvalidArgumentError, ScenarioLoadError
from mildlab.noise import (
    AtomParameters,
    DirectionMode,
    JumpFamily,
    JumpMeasureConfig,
    PowerLawParameters,
    QWienerConfig,
    Region,
    direction_weights,
    jump_moment,
    large_jump_mass,
)
from mildlab.spectral import (
    DEFAULT_QUADRATURE_POINTS,
    BasisLabel,
    Semigroup,
    SpaceConfig,
    SpectralVector,
    from_physical,
    to_physical,
)

logger = logging.getLogger(__name__)

DEFAULT_FREQUENCIES = (1.0, math.sqrt(2.0), math.sqrt(3.0), math.sqrt(5.0), math.pi)
BUILTIN_NAMES = ("paper_example_5", "zero", "linear_test")
SCENARIO_SUFFIXES = (".toml", ".json")


class KernelFamily(str, Enum):
    EXPONENTIAL = "exponential"
    ZERO = "zero"


class CoefficientFamily(str, Enum):
    PAPER_EXAMPLE_5 = "paper_example_5"
    ZERO = "zero"
    LINEAR_TEST = "linear_test"


class JumpCoupling(str, Enum):
    """Which forcing multiplies the jump vector in F and G."""

    THETA = "theta"
    H = "h"


@dataclass(frozen=True)
class Kernel:
    """Convolution kernel B(t) = exp(-rate t) on (0, inf), or identically zero."""

    family: KernelFamily = KernelFamily.EXPONENTIAL
    rate: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", KernelFamily(self.family))
        object.__setattr__(self, "rate", float(self.rate))
        if self.family == KernelFamily.EXPONENTIAL and not (
            self.rate > 0 and math.isfinite(self.rate)
        ):
            raise ConfigurationError(
                f"exponential kernel rate must be positive and finite, got {self.rate}"
            )

    @property
    def is_zero(self) -> bool:
        return self.family == KernelFamily.ZERO

    @property
    def l1_norm(self) -> float:
        return 0.0 if self.is_zero else 1.0 / self.rate

    @property
    def l2_norm_sq(self) -> float:
        return 0.0 if self.is_zero else 1.0 / (2.0 * self.rate)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.is_zero:
            return np.zeros_like(t)
        return np.where(t >= 0, np.exp(-self.rate * np.maximum(t, 0.0)), 0.0)


@dataclass(frozen=True)
class CoefficientSet:
    """Amplitude, frequencies and family of the forcings g, f, h and of the jump coupling.

    ``frequencies`` holds the base frequency followed by those of g, f, h and theta:
    phi_g(t) = sin(w0 t) + sin(w1 t), phi_f uses w2, phi_h uses w3, phi_theta uses w4.

    ``additive`` adds state-independent terms to the paper_example_5 family:
    additive * phi_g(t) e_1 to g and additive * phi(t) to the noise multipliers h and
    theta. With additive = 0 the zero path solves the equation exactly.
    """

    family: CoefficientFamily = CoefficientFamily.PAPER_EXAMPLE_5
    delta: float = 0.05
    frequencies: Tuple[float, ...] = DEFAULT_FREQUENCIES
    jump_coupling: JumpCoupling = JumpCoupling.H
    additive: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", CoefficientFamily(self.family))
        object.__setattr__(self, "jump_coupling", JumpCoupling(self.jump_coupling))
        frequencies = tuple(float(value) for value in self.frequencies)
        if len(frequencies) != 5 or not all(math.isfinite(value) for value in frequencies):
            raise ConfigurationError("frequencies must list five finite numbers")
        object.__setattr__(self, "frequencies", frequencies)
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise ConfigurationError(f"delta must be non-negative and finite, got {self.delta}")
        object.__setattr__(self, "delta", float(self.delta))
        if not (self.additive >= 0 and math.isfinite(self.additive)):
            raise ConfigurationError(
                f"additive must be non-negative and finite, got {self.additive}"
            )
        object.__setattr__(self, "additive", float(self.additive))


_FREQUENCY_SLOT = {"g": 1, "f": 2, "h": 3, "theta": 4}


@dataclass(frozen=True)
class Scenario:
    """A complete problem instance."""

    name: str
    space: SpaceConfig
    semigroup: Semigroup
    kernels: Tuple[Kernel, Kernel]
    wiener: QWienerConfig
    jumps: JumpMeasureConfig
    coefficients: CoefficientSet
    quadrature_points: int = DEFAULT_QUADRATURE_POINTS

    def __post_init__(self) -> None:
        modes = self.space.modes
        if self.semigroup.modes != modes:
            raise ConfigurationError(
                f"semigroup acts on {self.semigroup.modes} modes, space has {modes}"
            )
        if self.wiener.modes != modes:
            raise ConfigurationError(
                f"q_eigenvalues has {self.wiener.modes} entries, space has {modes}"
            )
        if self.quadrature_points <= modes:
            raise ConfigurationError("quadrature_points must exceed modes")
        direction_weights(self.jumps, modes)

    @property
    def modes(self) -> int:
        return self.space.modes

    @property
    def delta(self) -> float:
        return self.coefficients.delta

    @property
    def B1(self) -> Kernel:
        return self.kernels[0]

    @property
    def B2(self) -> Kernel:
        return self.kernels[1]

    @property
    def b(self) -> float:
        return large_jump_mass(self.jumps)

    def with_delta(self, delta: float) -> "Scenario":
        return replace(self, coefficients=replace(self.coefficients, delta=float(delta)))

    def forcing_frequencies(self) -> Tuple[float, ...]:
        """Distinct frequencies present in the forcings."""
        coeffs = self.coefficients
        used = coeffs.frequencies[:4]
        if coeffs.jump_coupling == JumpCoupling.THETA:
            used = coeffs.frequencies
        return tuple(sorted({abs(value) for value in used if value != 0}))

    # Forcing profiles -------------------------------------------------

    def _coupling_name(self) -> str:
        return "theta" if self.coefficients.jump_coupling == JumpCoupling.THETA else "h"

    def phase(self, which: str, t) -> np.ndarray:
        """phi_which(t) = sin(w0 t) + sin(w_which t)."""
        if which in ("F", "G", "jump"):
            which = self._coupling_name()
        if which not in _FREQUENCY_SLOT:
            raise InvalidArgumentError(f"unknown coefficient '{which}'")
        freqs = self.coefficients.frequencies
        t = np.asarray(t, dtype=float)
        return np.sin(freqs[0] * t) + np.sin(freqs[_FREQUENCY_SLOT[which]] * t)

    def sine_projection(self, states: np.ndarray) -> np.ndarray:
        """Spectral coefficients of sin(u(r)) for each row of ``states``."""
        nodal = to_physical(states, self.quadrature_points)
        return from_physical(np.sin(nodal), self.modes, self.quadrature_points)

    def evaluate_fields(self, times, states: np.ndarray) -> Dict[str, np.ndarray]:
        """Batch evaluation of g, f, h, theta and the jump coupling at (times[k], states[k]).

        Returns arrays of shape (len(times), modes); ``h``, ``theta`` and ``jump`` are
        per-mode multipliers applied to noise increments.
        """
        times = np.atleast_1d(np.asarray(times, dtype=float))
        states = np.atleast_2d(np.asarray(states, dtype=float))
        shape = (times.shape[0], self.modes)
        coeffs = self.coefficients
        delta = coeffs.delta
        zeros = np.zeros(shape)
        if coeffs.family == CoefficientFamily.LINEAR_TEST and delta != 0:
            g = np.zeros(shape)
            g[:, 0] = delta
            return {"g": g, "f": zeros, "h": zeros, "theta": zeros, "jump": zeros}
        if coeffs.family != CoefficientFamily.PAPER_EXAMPLE_5 or (
            delta == 0 and coeffs.additive == 0
        ):
            return {"g": zeros, "f": zeros, "h": zeros, "theta": zeros, "jump": zeros}

        sine = self.sine_projection(states) if delta else zeros
        phases = {name: self.phase(name, times)[:, None] for name in _FREQUENCY_SLOT}
        fields = {name: delta * phases[name] * sine for name in _FREQUENCY_SLOT}
        if coeffs.additive:
            fields["g"][:, :1] += coeffs.additive * phases["g"]
            fields["h"] = fields["h"] + coeffs.additive * phases["h"]
            fields["theta"] = fields["theta"] + coeffs.additive * phases["theta"]
        fields["jump"] = fields[self._coupling_name()]
        return fields

    # Moduli and envelope ---------------------------------------------

    def jump_second_moments(self) -> Tuple[float, float]:
        """Integrals of |y|^2 against nu over |y| < 1 and |y| >= 1."""
        return (
            jump_moment(self.jumps, 2.0, Region.SMALL),
            jump_moment(self.jumps, 2.0, Region.LARGE),
        )

    def envelope_constant(self) -> float:
        """max(1, sqrt(tr Q), first absolute jump moments on both regions).

        sqrt(tr Q) covers the Hilbert-Schmidt norm of h Q^(1/2) when the additive term
        loads every mode.
        """
        return max(
            1.0,
            math.sqrt(self.wiener.trace),
            jump_moment(self.jumps, 1.0, Region.SMALL),
            jump_moment(self.jumps, 1.0, Region.LARGE),
        )


def eval_coefficient(scn: Scenario, which: str, t: float, u: SpectralVector) -> SpectralVector:
    """g, f or h (or theta) at (t, u); h and theta are per-mode multipliers against noise."""
    if u.modes != scn.modes:
        raise InvalidArgumentError(f"state has {u.modes} modes, scenario has {scn.modes}")
    if which not in _FREQUENCY_SLOT:
        raise InvalidArgumentError(f"unknown coefficient '{which}'")
    return SpectralVector(scn.evaluate_fields([t], u.coeffs[None, :])[which][0])


def eval_jump_coefficient(
    scn: Scenario, which: str, t: float, u: SpectralVector, y: SpectralVector
) -> SpectralVector:
    """F (|y| < 1) or G (|y| >= 1): coupling(t, u) multiplied mode-wise by y."""
    norm = float(np.linalg.norm(y.coeffs))
    if which == "F":
        active = norm < 1.0
    elif which == "G":
        active = norm >= 1.0
    else:
        raise InvalidArgumentError(f"unknown jump coefficient '{which}'")
    if not active:
        return SpectralVector.zeros(scn.modes)
    coupling = scn.evaluate_fields([t], u.coeffs[None, :])["jump"][0]
    return SpectralVector(coupling * y.coeffs)


def eval_modulus(scn: Scenario, which: str, t):
    """Lipschitz modulus m_which(t); scalar in, scalar out, array in, array out."""
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    family = scn.coefficients.family
    if family != CoefficientFamily.PAPER_EXAMPLE_5 or scn.delta == 0:
        if which not in ("g", "f", "h", "F", "G"):
            raise InvalidArgumentError(f"unknown modulus '{which}'")
        values = np.zeros_like(t)
    else:
        d2 = scn.delta**2
        m2_small, m2_large = scn.jump_second_moments()
        factors = {
            "g": 1.0,
            "f": 1.0,
            "h": scn.wiener.operator_norm,
            "F": m2_small,
            "G": m2_large,
        }
        if which not in factors:
            raise InvalidArgumentError(f"unknown modulus '{which}'")
        values = d2 * factors[which] * scn.phase(which, t) ** 2
    return float(values) if scalar else values


def eval_envelope(scn: Scenario, r):
    """Delta(r): bound on every sup-norm quantity of the boundedness hypothesis on the ball r."""
    scalar = np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    coeffs = scn.coefficients
    if coeffs.family == CoefficientFamily.LINEAR_TEST:
        values = np.full_like(r, scn.delta)
    elif coeffs.family == CoefficientFamily.ZERO:
        values = np.zeros_like(r)
    else:
        # |sin a| <= min(|a|, 1) pointwise and |phi| <= 2.
        amplitude = scn.delta * np.minimum(r, 1.0) + coeffs.additive
        values = 2.0 * amplitude * scn.envelope_constant()
    return float(values) if scalar else values


def jump_lipschitz_integral(
    scn: Scenario, region: str, t: float, y_state: SpectralVector, z_state: SpectralVector
) -> float:
    """Integral of ||F(t,Y,y) - F(t,Z,y)||^2 nu(dy) over the small or large region."""
    fields_y = scn.evaluate_fields([t], y_state.coeffs[None, :])["jump"][0]
    fields_z = scn.evaluate_fields([t], z_state.coeffs[None, :])["jump"][0]
    weights = direction_weights(scn.jumps, scn.modes)
    moment = jump_moment(scn.jumps, 2.0, Region.SMALL if region == "F" else Region.LARGE)
    return float(moment * np.sum(weights * (fields_y - fields_z) ** 2))


# Built-ins -------------------------------------------------------------


def _paper_example_dict() -> Dict[str, Any]:
    rate = math.pi**2
    return {
        "name": "paper_example_5",
        "space": {"modes": 64, "basis": "dirichlet_sine", "quadrature_points": 512},
        "semigroup": {"type": "dirichlet_sine", "K": 1.0, "omega": rate},
        "kernels": {
            "B1": {"family": "exponential", "rate": rate},
            "B2": {"family": "exponential", "rate": rate},
        },
        "noise": {
            "wiener": {"q_eigenvalues": {"scale": 1.0, "exponent": 2.0}},
            "jumps": {
                "family": "finite_atoms",
                "small_cutoff": 0.1,
                "direction": "random_mode",
                "direction_index": 0,
                "direction_modes": 8,
                "parameters": {"sizes": [0.5, -0.5, 2.0], "rates": [1.0, 1.0, 0.5]},
            },
        },
        "coefficients": {
            "family": "paper_example_5",
            "delta": 0.05,
            "frequencies": list(DEFAULT_FREQUENCIES),
            "jump_coupling": "h",
        },
    }


def _no_jumps() -> Dict[str, Any]:
    return {"family": "finite_atoms", "parameters": {"sizes": [], "rates": []}}


def builtin_dict(name: str) -> Dict[str, Any]:
    """Raw configuration tree of a built-in scenario."""
    if name not in BUILTIN_NAMES:
        raise ScenarioLoadError(
            f"unknown built-in scenario '{name}' (choose from {', '.join(BUILTIN_NAMES)})",
            field="builtin",
        )
    data = _paper_example_dict()
    if name == "zero":
        data["name"] = "zero"
        data["space"]["modes"] = 16
        data["noise"]["jumps"] = _no_jumps()
        data["coefficients"].update(family="zero", delta=0.0)
    elif name == "linear_test":
        data["name"] = "linear_test"
        data["space"]["modes"] = 16
        data["noise"]["jumps"] = _no_jumps()
        data["coefficients"].update(family="linear_test", delta=1.0)
    return data


def _deep_merge(base: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            # A new jump family replaces the old parameter table wholesale.
            new_family = value.get("family", merged[key].get("family"))
            if key == "jumps" and new_family != merged[key].get("family"):
                merged[key] = copy.deepcopy(dict(value))
                continue
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def builtin_scenario(name: str, overrides: Optional[Mapping[str, Any]] = None) -> Scenario:
    data = builtin_dict(name)
    if overrides:
        data = _deep_merge(data, overrides)
    return scenario_from_dict(data)


# Parsing ---------------------------------------------------------------


class _Section:
    """Reads keys from one table of the configuration tree and rejects leftovers."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, Mapping):
            raise ScenarioLoadError("expected a table", field=path or "<root>")
        self._data = dict(data)
        self._path = path
        self._seen = set()

    def _field(self, key: str) -> str:
        return f"{self._path}.{key}" if self._path else key

    def section(self, key: str, required: bool = False) -> "_Section":
        self._seen.add(key)
        if key not in self._data:
            if required:
                raise ScenarioLoadError("missing section", field=self._field(key))
            return _Section({}, self._field(key))
        return _Section(self._data[key], self._field(key))

    def get(self, key: str, default: Any = None, kind: Any = None, required: bool = False):
        self._seen.add(key)
        if key not in self._data:
            if required:
                raise ScenarioLoadError("missing value", field=self._field(key))
            return default
        value = self._data[key]
        if kind is None:
            return value
        try:
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind in (int, float) and isinstance(value, bool):
                raise TypeError
            if kind is int and float(value) != int(value):
                raise TypeError
            return kind(value)
        except (TypeError, ValueError) as e:
            raise ScenarioLoadError(f"invalid value {value!r}", field=self._field(key)) from e

    def raw(self, key: str) -> Any:
        self._seen.add(key)
        return self._data.get(key)

    def has(self, key: str) -> bool:
        return key in self._data

    def field(self, key: str) -> str:
        return self._field(key)

    def finish(self) -> None:
        unknown = sorted(set(self._data) - self._seen)
        if unknown:
            raise ScenarioLoadError("unknown key", field=self._field(unknown[0]))


def _float_list(value: Any, field: str) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise ScenarioLoadError("expected a list of numbers", field=field)
    try:
        return tuple(float(item) for item in value)
    except (TypeError, ValueError) as e:
        raise ScenarioLoadError("expected a list of numbers", field=field) from e


def _parse_q(noise: _Section, modes: int) -> QWienerConfig:
    wiener = noise.section("wiener")
    raw = wiener.raw("q_eigenvalues")
    field = wiener.field("q_eigenvalues")
    wiener.finish()
    if raw is None:
        return QWienerConfig.power_decay(modes)
    if isinstance(raw, Mapping):
        table = _Section(raw, field)
        scale = table.get("scale", 1.0, float)
        exponent = table.get("exponent", 2.0, float)
        table.finish()
        if scale <= 0:
            raise ScenarioLoadError("scale must be positive", field=f"{field}.scale")
        return QWienerConfig.power_decay(modes, scale, exponent)
    values = _float_list(raw, field)
    if len(values) != modes:
        raise ScenarioLoadError(f"expected {modes} values, got {len(values)}", field=field)
    return QWienerConfig(values)


def _parse_jumps(noise: _Section) -> JumpMeasureConfig:
    jumps = noise.section("jumps")
    family = jumps.get("family", JumpFamily.FINITE_ATOMS.value, str)
    try:
        family = JumpFamily(family)
    except ValueError as e:
        message = f"unknown jump family '{family}'"
        raise ScenarioLoadError(message, field=jumps.field("family")) from e
    params = jumps.section("parameters")
    if family == JumpFamily.FINITE_ATOMS:
        parameters = AtomParameters(
            sizes=_float_list(params.get("sizes", []), params.field("sizes")),
            rates=_float_list(params.get("rates", []), params.field("rates")),
        )
    else:
        parameters = PowerLawParameters(
            alpha=params.get("alpha", 0.5, float),
            scale=params.get("scale", 1.0, float),
            max_size=params.get("max_size", 2.0, float),
            symmetric=params.get("symmetric", True, bool),
        )
    params.finish()
    direction = jumps.get("direction", DirectionMode.FIXED.value, str)
    try:
        direction = DirectionMode(direction)
    except ValueError as e:
        raise ScenarioLoadError(
            f"unknown direction '{direction}'", field=jumps.field("direction")
        ) from e
    cfg = JumpMeasureConfig(
        family=family,
        small_cutoff=jumps.get("small_cutoff", 0.1, float),
        parameters=parameters,
        direction=direction,
        direction_index=jumps.get("direction_index", 0, int),
        direction_modes=jumps.get("direction_modes", 1, int),
    )
    jumps.finish()
    return cfg


def _parse_kernel(kernels: _Section, key: str) -> Kernel:
    table = kernels.section(key)
    family = table.get("family", KernelFamily.EXPONENTIAL.value, str)
    rate = table.get("rate", 1.0, float)
    table.finish()
    try:
        return Kernel(KernelFamily(family), rate)
    except ValueError as e:
        key = "rate" if "rate" in str(e) else "family"
        raise ScenarioLoadError(str(e), field=table.field(key)) from e


def _parse_semigroup(root: _Section, modes: int) -> Semigroup:
    table = root.section("semigroup")
    kind = table.get("type", BasisLabel.DIRICHLET_SINE.value, str)
    K = table.get("K", 1.0, float)
    omega = table.get("omega", None, float)
    rates = table.raw("rates")
    table.finish()
    try:
        label = BasisLabel(kind)
    except ValueError as e:
        message = f"unknown semigroup type '{kind}'"
        raise ScenarioLoadError(message, field=table.field("type")) from e
    if label == BasisLabel.DIRICHLET_SINE:
        if rates is not None:
            raise ScenarioLoadError(
                "rates are fixed by the dirichlet_sine basis", field=table.field("rates")
            )
        values = (np.arange(1, modes + 1) * math.pi) ** 2
    else:
        if rates is None:
            raise ScenarioLoadError("abstract_diagonal needs rates", field=table.field("rates"))
        values = np.array(_float_list(rates, table.field("rates")))
        if values.size != modes:
            raise ScenarioLoadError(
                f"expected {modes} rates, got {values.size}", field=table.field("rates")
            )
    try:
        return Semigroup(values, stability_K=K, stability_omega=omega or 0.0)
    except ConfigurationError as e:
        raise ScenarioLoadError(str(e), field="semigroup") from e


def scenario_from_dict(data: Mapping[str, Any]) -> Scenario:
    """Validate a configuration tree and build the Scenario."""
    root = _Section(data, "")
    root.get("builtin")
    name = root.get("name", "custom", str)

    space_table = root.section("space")
    modes = space_table.get("modes", 64, int)
    basis = space_table.get("basis", None, str)
    points = space_table.get("quadrature_points", DEFAULT_QUADRATURE_POINTS, int)
    space_table.finish()
    if modes < 1:
        raise ScenarioLoadError(f"modes must be at least 1, got {modes}", field="space.modes")

    semigroup_kind = root.section("semigroup").get("type", BasisLabel.DIRICHLET_SINE.value)
    if basis is not None and basis != semigroup_kind:
        raise ScenarioLoadError(
            f"basis '{basis}' does not match semigroup type '{semigroup_kind}'",
            field="space.basis",
        )
    semigroup = _parse_semigroup(root, modes)

    kernels_table = root.section("kernels")
    kernels = (_parse_kernel(kernels_table, "B1"), _parse_kernel(kernels_table, "B2"))
    kernels_table.finish()

    noise = root.section("noise")
    try:
        wiener = _parse_q(noise, modes)
        jumps = _parse_jumps(noise)
    except ScenarioLoadError:
        raise
    except ConfigurationError as e:
        raise ScenarioLoadError(str(e), field="noise") from e
    noise.finish()

    coeff_table = root.section("coefficients")
    family = coeff_table.get("family", CoefficientFamily.PAPER_EXAMPLE_5.value, str)
    delta = coeff_table.get("delta", 0.05, float)
    frequencies = coeff_table.raw("frequencies")
    coupling = coeff_table.get("jump_coupling", JumpCoupling.H.value, str)
    additive = coeff_table.get("additive", 0.0, float)
    coeff_table.finish()
    root.finish()

    try:
        coefficients = CoefficientSet(
            family=family,
            delta=delta,
            frequencies=(
                DEFAULT_FREQUENCIES
                if frequencies is None
                else _float_list(frequencies, "coefficients.frequencies")
            ),
            jump_coupling=coupling,
            additive=additive,
        )
        scenario = Scenario(
            name=name,
            space=SpaceConfig(modes, BasisLabel(semigroup_kind)),
            semigroup=semigroup,
            kernels=kernels,
            wiener=wiener,
            jumps=jumps,
            coefficients=coefficients,
            quadrature_points=points,
        )
    except ScenarioLoadError:
        raise
    except (ConfigurationError, ValueError) as e:
        raise ScenarioLoadError(str(e), field="coefficients" if "delta" in str(e) else None) from e
    logger.info("loaded scenario %s (%s)", scenario.name, scenario_hash(scenario))
    return scenario


def _read_config(path: Path) -> Dict[str, Any]:
    suffix = path.suffix.lower()
    if suffix not in SCENARIO_SUFFIXES:
        raise ScenarioLoadError(
            f"unsupported scenario format '{suffix or '<none>'}' (use .toml or .json)"
        )
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioLoadError(f"cannot read {path}: {e}") from e
    try:
        if suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib

            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except (ValueError, TypeError) as e:
        raise ScenarioLoadError(f"cannot parse {path.name}: {e}") from e
    if not isinstance(data, dict):
        raise ScenarioLoadError("scenario file must contain a table at the top level")
    return data


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Load and validate a scenario file, layering it over ``builtin`` when named."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Scenario file not found: {path}")
    data = _read_config(path)
    builtin = data.get("builtin")
    if builtin is not None:
        if not isinstance(builtin, str):
            raise ScenarioLoadError("expected a built-in name", field="builtin")
        data = _deep_merge(builtin_dict(builtin), data)
    return scenario_from_dict(data)


# Serialization ---------------------------------------------------------


def _jump_parameters_dict(cfg: JumpMeasureConfig) -> Dict[str, Any]:
    params = cfg.parameters
    if isinstance(params, AtomParameters):
        return {"sizes": list(params.sizes), "rates": list(params.rates)}
    return {
        "alpha": params.alpha,
        "scale": params.scale,
        "max_size": params.max_size,
        "symmetric": params.symmetric,
    }


def scenario_to_dict(scn: Scenario) -> Dict[str, Any]:
    """Fully resolved configuration tree; ``scenario_from_dict`` of it rebuilds ``scn``."""
    label = scn.space.basis_label
    semigroup: Dict[str, Any] = {
        "type": label.value,
        "K": scn.semigroup.stability_K,
        "omega": scn.semigroup.stability_omega,
    }
    if label == BasisLabel.ABSTRACT_DIAGONAL:
        semigroup["rates"] = [float(value) for value in scn.semigroup.decay_rates]
    return {
        "name": scn.name,
        "space": {
            "modes": scn.modes,
            "basis": label.value,
            "quadrature_points": scn.quadrature_points,
        },
        "semigroup": semigroup,
        "kernels": {
            key: {"family": kernel.family.value, "rate": kernel.rate}
            for key, kernel in zip(("B1", "B2"), scn.kernels)
        },
        "noise": {
            "wiener": {"q_eigenvalues": [float(value) for value in scn.wiener.q_eigenvalues]},
            "jumps": {
                "family": scn.jumps.family.value,
                "small_cutoff": scn.jumps.small_cutoff,
                "direction": scn.jumps.direction.value,
                "direction_index": scn.jumps.direction_index,
                "direction_modes": scn.jumps.direction_modes,
                "parameters": _jump_parameters_dict(scn.jumps),
            },
        },
        "coefficients": {
            "family": scn.coefficients.family.value,
            "delta": scn.coefficients.delta,
            "frequencies": list(scn.coefficients.frequencies),
            "jump_coupling": scn.coefficients.jump_coupling.value,
            "additive": scn.coefficients.additive,
        },
    }


def scenario_hash(scn: Scenario) -> str:
    """Short content hash of the resolved scenario."""
    canonical = json.dumps(scenario_to_dict(scn), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
