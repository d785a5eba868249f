"""
Tests for the truncated space and the diagonal semigroup.
"""

import numpy as np
import pytest
from scipy.integrate import quad

from mildlab.errors import ConfigurationError, InvalidArgumentError
from mildlab.spectral import (
    Semigroup,
    SpaceConfig,
    SpectralVector,
    from_physical,
    semigroup_apply,
    semigroup_integral_weights,
    sine_quadrature,
    to_physical,
    vector_norm,
)


class TestSemigroup:
    def test_dirichlet_rates_and_stability_constants(self):
        sg = Semigroup.dirichlet_sine(4)
        expected = (np.arange(1, 5) * np.pi) ** 2
        np.testing.assert_allclose(sg.decay_rates, expected)
        assert sg.stability_K == 1.0
        assert sg.stability_omega == pytest.approx(np.pi**2)

    def test_factors_at_zero_are_identity(self):
        sg = Semigroup.dirichlet_sine(8)
        np.testing.assert_array_equal(sg.factors(0.0), np.ones(8))

    def test_semigroup_property(self):
        sg = Semigroup.dirichlet_sine(8)
        v = SpectralVector(np.linspace(1.0, 2.0, 8))
        once = semigroup_apply(sg, 0.03, semigroup_apply(sg, 0.02, v))
        direct = semigroup_apply(sg, 0.05, v)
        np.testing.assert_allclose(once.coeffs, direct.coeffs, rtol=1e-13)

    @pytest.mark.parametrize("t", [0.0, 0.01, 0.3, 2.0])
    def test_norm_respects_stability_bound(self, t):
        sg = Semigroup.dirichlet_sine(16)
        v = SpectralVector(np.ones(16))
        assert vector_norm(semigroup_apply(sg, t, v)) <= sg.bound(t) * vector_norm(v) + 1e-15

    @pytest.mark.parametrize("t", [0.0, 0.02, 0.7])
    def test_semigroup_is_linear(self, t):
        sg = Semigroup.dirichlet_sine(16)
        rng = np.random.default_rng(5)
        v, w = (SpectralVector(row) for row in rng.standard_normal((2, 16)))
        alpha, beta = 1.7, -0.4
        combined = semigroup_apply(sg, t, alpha * v + beta * w)
        separate = alpha * semigroup_apply(sg, t, v) + beta * semigroup_apply(sg, t, w)
        np.testing.assert_allclose(combined.coeffs, separate.coeffs, rtol=0, atol=1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(InvalidArgumentError):
            Semigroup.dirichlet_sine(2).factors(-1e-3)

    def test_mode_mismatch_rejected(self):
        with pytest.raises(InvalidArgumentError):
            semigroup_apply(Semigroup.dirichlet_sine(4), 0.1, SpectralVector.zeros(3))

    def test_abstract_diagonal_defaults_omega_to_slowest_rate(self):
        sg = Semigroup.abstract_diagonal([3.0, 1.5, 4.0])
        assert sg.stability_omega == 1.5

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"rates": [1.0, -2.0]},
            {"rates": [1.0, 2.0], "stability_K": 0.5},
            {"rates": [1.0, 2.0], "stability_omega": 1.5},
        ],
    )
    def test_invalid_abstract_semigroups(self, kwargs):
        with pytest.raises(ConfigurationError):
            Semigroup.abstract_diagonal(**kwargs)

    def test_integral_weights_match_closed_form(self):
        sg = Semigroup.abstract_diagonal([2.0])
        weight = semigroup_integral_weights(sg, 0.5)[0]
        assert weight == pytest.approx((1.0 - np.exp(-1.0)) / 2.0, rel=1e-14)


class TestSpectralVector:
    def test_arithmetic(self):
        a = SpectralVector.unit(3, 0, 2.0)
        b = SpectralVector.unit(3, 2)
        np.testing.assert_array_equal((a + b).coeffs, [2.0, 0.0, 1.0])
        np.testing.assert_array_equal((a - b).coeffs, [2.0, 0.0, -1.0])
        np.testing.assert_array_equal((3 * b).coeffs, [0.0, 0.0, 3.0])

    def test_coefficients_are_read_only(self):
        v = SpectralVector.zeros(2)
        with pytest.raises(ValueError):
            v.coeffs[0] = 1.0

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidArgumentError):
            SpectralVector(np.array([1.0, np.nan]))

    def test_space_config_rejects_zero_modes(self):
        with pytest.raises(ConfigurationError):
            SpaceConfig(modes=0)


class TestSineQuadrature:
    def test_synthesis_is_orthonormal(self):
        _, synthesis = sine_quadrature(16, 64)
        np.testing.assert_allclose(synthesis.T @ synthesis / 64, np.eye(16), atol=1e-12)

    def test_projection_inverts_synthesis(self):
        coeffs = np.random.default_rng(0).standard_normal((3, 16))
        values = to_physical(coeffs, 128)
        np.testing.assert_allclose(from_physical(values, 16, 128), coeffs, atol=1e-12)

    def test_first_mode_matches_sine(self):
        nodes, _ = sine_quadrature(1, 32)
        values = to_physical(np.array([1.0]), 32)
        np.testing.assert_allclose(values, np.sqrt(2.0) * np.sin(np.pi * nodes))

    def test_too_few_nodes_rejected(self):
        with pytest.raises(InvalidArgumentError):
            sine_quadrature(8, 8)


def test_vector_norm_matches_physical_quadrature():
    coeffs = np.random.default_rng(3).standard_normal(6)

    def squared(r):
        n = np.arange(1, 7)
        return float(np.sum(coeffs * np.sqrt(2.0) * np.sin(n * np.pi * r)) ** 2)

    integral, _ = quad(squared, 0.0, 1.0, limit=200, epsabs=1e-13, epsrel=1e-13)
    assert vector_norm(SpectralVector(coeffs)) == pytest.approx(np.sqrt(integral), abs=1e-6)
