"""
Tests for Levy noise sampling and jump measure moments.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from mildlab.errors import ConfigurationError, InvalidArgumentError
from mildlab.noise import (
    AtomParameters,
    DirectionMode,
    JumpFamily,
    JumpMeasureConfig,
    PowerLawParameters,
    Purpose,
    QWienerConfig,
    Region,
    StreamId,
    compensator_drift,
    config_summary,
    intensity_condition,
    jump_moment,
    large_jump_mass,
    levy_path_values,
    sample_jumps,
    sample_levy_segment,
    sample_two_sided_segment,
    sample_wiener_increments,
    validate_grid,
)


@pytest.fixture
def atoms():
    return JumpMeasureConfig(
        family=JumpFamily.FINITE_ATOMS,
        small_cutoff=0.1,
        parameters=AtomParameters(sizes=(0.5, -0.5, 2.0, 0.05), rates=(1.0, 1.0, 0.5, 3.0)),
        direction=DirectionMode.RANDOM_MODE,
        direction_modes=4,
    )


@pytest.fixture
def power_law():
    return JumpMeasureConfig(
        family=JumpFamily.TRUNCATED_POWER_LAW,
        small_cutoff=0.1,
        parameters=PowerLawParameters(alpha=0.5, scale=1.0, max_size=2.0, symmetric=True),
    )


class TestJumpMoments:
    def test_atom_moments(self, atoms):
        assert large_jump_mass(atoms) == pytest.approx(0.5)
        assert jump_moment(atoms, 2.0, Region.SMALL) == pytest.approx(0.25 + 0.25 + 3 * 0.0025)
        assert jump_moment(atoms, 2.0, Region.LARGE) == pytest.approx(2.0)
        assert jump_moment(atoms, 1.0, Region.SAMPLED_SMALL, signed=True) == pytest.approx(0.0)
        assert intensity_condition(atoms) == pytest.approx(0.5075 + 0.5)

    def test_power_law_moments_in_closed_form(self, power_law):
        # scale * s^(-1.5) on both sides of (0, 2].
        assert large_jump_mass(power_law) == pytest.approx(2 * 2 * (1 - 2**-0.5))
        small_second = jump_moment(power_law, 2.0, Region.SMALL)
        assert small_second == pytest.approx(2 * (1.0 / 1.5))
        assert math.isfinite(intensity_condition(power_law))

    @pytest.mark.parametrize("alpha, symmetric", [(0.5, False), (1.2, False), (0.5, True)])
    def test_power_law_compensator_matches_quadrature(self, alpha, symmetric):
        params = PowerLawParameters(alpha=alpha, scale=1.3, max_size=2.0, symmetric=symmetric)
        cfg = JumpMeasureConfig(
            family=JumpFamily.TRUNCATED_POWER_LAW, small_cutoff=0.1, parameters=params
        )
        one_side, _ = quad(lambda s: s * 1.3 * s ** (-1.0 - alpha), 0.1, 1.0, epsabs=1e-13)
        expected = 0.0 if symmetric else one_side
        drift = compensator_drift(cfg, 2)
        assert drift[0] == pytest.approx(expected, abs=1e-8)
        assert drift[1] == 0.0

        second, _ = quad(lambda s: s**2 * 1.3 * s ** (-1.0 - alpha), 0.0, 1.0, epsabs=1e-13)
        sides = 2.0 if symmetric else 1.0
        assert jump_moment(cfg, 2.0, Region.SMALL) == pytest.approx(sides * second, abs=1e-8)
        large, _ = quad(lambda s: 1.3 * s ** (-1.0 - alpha), 1.0, 2.0, epsabs=1e-13)
        assert large_jump_mass(cfg) == pytest.approx(sides * large, abs=1e-8)

    def test_power_law_small_first_moment_diverges_for_large_alpha(self):
        cfg = JumpMeasureConfig(
            family=JumpFamily.TRUNCATED_POWER_LAW,
            parameters=PowerLawParameters(alpha=1.5),
        )
        assert jump_moment(cfg, 1.0, Region.SMALL) == math.inf
        assert math.isfinite(jump_moment(cfg, 2.0, Region.SMALL))

    def test_compensator_spreads_over_direction_modes(self):
        cfg = JumpMeasureConfig(
            parameters=AtomParameters(sizes=(0.4,), rates=(2.0,)),
            direction=DirectionMode.RANDOM_MODE,
            direction_modes=2,
        )
        np.testing.assert_allclose(compensator_drift(cfg, 3), [0.4, 0.4, 0.0])

    def test_config_summary_keys(self, atoms):
        summary = config_summary(QWienerConfig.power_decay(4), atoms)
        assert summary["q_trace"] == pytest.approx(1 + 1 / 4 + 1 / 9 + 1 / 16)
        assert summary["b"] == pytest.approx(0.5)


class TestConfigValidation:
    def test_mismatched_atoms(self):
        with pytest.raises(ConfigurationError):
            AtomParameters(sizes=(1.0,), rates=())

    def test_cutoff_must_lie_in_unit_interval(self):
        with pytest.raises(ConfigurationError):
            JumpMeasureConfig(small_cutoff=1.0)

    def test_parameters_must_match_family(self):
        with pytest.raises(ConfigurationError):
            JumpMeasureConfig(
                family=JumpFamily.TRUNCATED_POWER_LAW, parameters=AtomParameters()
            )

    def test_alpha_range(self):
        with pytest.raises(ConfigurationError):
            PowerLawParameters(alpha=2.0)

    def test_q_eigenvalues_positive(self):
        with pytest.raises(ConfigurationError):
            QWienerConfig(np.array([1.0, 0.0]))

    def test_stream_rejects_negative_seed(self):
        with pytest.raises(InvalidArgumentError):
            StreamId(seed=-1)


class TestSampling:
    def test_same_stream_is_reproducible(self):
        cfg = QWienerConfig.power_decay(4)
        grid = np.linspace(0.0, 1.0, 11)
        first = sample_wiener_increments(cfg, grid, StreamId(7, 3))
        second = sample_wiener_increments(cfg, grid, StreamId(7, 3))
        np.testing.assert_array_equal(first, second)

    def test_streams_differ_by_path_and_purpose(self):
        a = StreamId(7, 0).generator().random(4)
        b = StreamId(7, 1).generator().random(4)
        c = StreamId(7, 0, Purpose.JUMPS).generator().random(4)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_zero_length_steps_give_zero_increments(self):
        cfg = QWienerConfig.power_decay(2)
        increments = sample_wiener_increments(cfg, [0.0, 0.5, 0.5, 1.0], StreamId(1))
        np.testing.assert_array_equal(increments[1], np.zeros(2))

    def test_wiener_variance_matches_q_dt(self):
        cfg = QWienerConfig(np.array([1.0, 0.25]))
        grid = np.arange(20001) * 0.01
        increments = sample_wiener_increments(cfg, grid, StreamId(3))
        np.testing.assert_allclose(increments.var(axis=0), [0.01, 0.0025], rtol=0.05)

    def test_decreasing_grid_rejected(self):
        with pytest.raises(InvalidArgumentError):
            validate_grid([0.0, 1.0, 0.5])

    def test_jumps_are_split_by_norm_and_never_below_cutoff(self, atoms):
        grid = np.linspace(0.0, 50.0, 501)
        small, large = sample_jumps(atoms, grid, StreamId(11, purpose=Purpose.JUMPS))
        assert len(small) > 0 and len(large) > 0
        assert np.all(small.norms() < 1.0)
        assert np.all(small.norms() >= 0.1)
        assert np.all(large.norms() >= 1.0)
        assert np.all(np.diff(small.times) >= 0)
        assert np.all(grid[small.cells] <= small.times)
        assert np.all(small.times <= grid[small.cells + 1])
        assert set(np.unique(small.modes)) <= {0, 1, 2, 3}

    def test_jump_rate_matches_intensity(self, atoms):
        grid = np.linspace(0.0, 2000.0, 2001)
        small, large = sample_jumps(atoms, grid, StreamId(5, purpose=Purpose.JUMPS))
        assert (len(small) + len(large)) / 2000.0 == pytest.approx(2.5, rel=0.05)

    def test_power_law_sizes_stay_in_support(self, power_law):
        grid = np.linspace(0.0, 100.0, 101)
        small, large = sample_jumps(power_law, grid, StreamId(2, purpose=Purpose.JUMPS))
        sizes = np.concatenate([small.norms(), large.norms()])
        assert sizes.size > 0
        assert np.all((sizes >= 0.1 - 1e-12) & (sizes <= 2.0 + 1e-12))

    def test_no_jump_measure_yields_no_events(self):
        small, large = sample_jumps(JumpMeasureConfig.none(), [0.0, 1.0], StreamId(0))
        assert len(small) == 0 and len(large) == 0


class TestSegments:
    def test_translated_grid_shares_realization(self, atoms):
        q = QWienerConfig.power_decay(4)
        base = np.arange(101) * 0.1
        steps = np.full(100, 0.1)
        a = sample_levy_segment(q, atoms, base, seed=9, steps=steps)
        b = sample_levy_segment(q, atoms, base + 12.3, seed=9, steps=steps)
        np.testing.assert_array_equal(a.wiener_increments, b.wiener_increments)
        np.testing.assert_array_equal(a.large_jumps.sizes, b.large_jumps.sizes)
        np.testing.assert_allclose(b.large_jumps.times - a.large_jumps.times, 12.3)

    def test_coarsen_sums_increments(self, atoms):
        q = QWienerConfig.power_decay(2)
        segment = sample_levy_segment(q, atoms, np.linspace(0.0, 1.0, 9), seed=1)
        coarse = segment.coarsen(4)
        assert coarse.steps == 2
        np.testing.assert_allclose(
            coarse.wiener_increments[0], segment.wiener_increments[:4].sum(axis=0)
        )
        np.testing.assert_array_equal(coarse.small_jumps.cells, segment.small_jumps.cells // 4)

    def test_coarsen_needs_divisible_steps(self, atoms):
        q = QWienerConfig.power_decay(2)
        segment = sample_levy_segment(q, atoms, np.linspace(0.0, 1.0, 10), seed=1)
        with pytest.raises(InvalidArgumentError):
            segment.coarsen(2)

    def test_path_values_start_at_zero_and_accumulate_jumps(self, atoms):
        q = QWienerConfig(np.full(4, 1e-30))
        segment = sample_levy_segment(q, atoms, np.linspace(0.0, 20.0, 201), seed=4)
        values = levy_path_values(segment, atoms)
        np.testing.assert_array_equal(values[0], np.zeros(4))
        total = segment.small_jumps.vectors(4).sum(axis=0) + segment.large_jumps.vectors(
            4
        ).sum(axis=0)
        np.testing.assert_allclose(values[-1], total, atol=1e-9)

    def test_two_sided_segment_is_anchored_at_zero(self, atoms):
        q = QWienerConfig.power_decay(4)
        segment = sample_two_sided_segment(q, atoms, horizon=5.0, dt=0.1, seed=3)
        assert segment.grid[0] == pytest.approx(-5.0)
        assert segment.grid[-1] == pytest.approx(5.0)
        assert segment.steps == 100
        values = levy_path_values(segment, atoms)
        zero = int(np.flatnonzero(segment.grid == 0.0)[0])
        np.testing.assert_array_equal(values[zero], np.zeros(4))
        for events in (segment.small_jumps, segment.large_jumps):
            cells = events.cells
            assert np.all(segment.grid[cells] <= events.times + 1e-12)
            assert np.all(events.times <= segment.grid[cells + 1] + 1e-12)

    def test_two_sided_halves_are_exchangeable(self, atoms):
        q = QWienerConfig.power_decay(4)
        dt, horizon = 0.1, 400.0
        segment = sample_two_sided_segment(q, atoms, horizon=horizon, dt=dt, seed=8)
        n_steps = int(round(horizon / dt))
        past = segment.wiener_increments[:n_steps]
        future = segment.wiener_increments[n_steps:]
        assert past.shape == future.shape == (n_steps, 4)
        target = q.q_eigenvalues * dt
        np.testing.assert_allclose(past.var(axis=0) / future.var(axis=0), 1.0, atol=0.15)
        for half in (past, future):
            np.testing.assert_allclose(half.var(axis=0), target, rtol=0.15)
            assert np.all(np.abs(half.mean(axis=0)) <= 4 * np.sqrt(target / n_steps))

        times = np.concatenate([segment.small_jumps.times, segment.large_jumps.times])
        sizes = np.concatenate([segment.small_jumps.sizes, segment.large_jumps.sizes])
        before, after = times < 0, times >= 0
        # 2.5 sampled jumps per unit time on each side.
        assert abs(before.sum() - after.sum()) <= 4 * math.sqrt(2 * 2.5 * horizon)
        assert sizes[before].mean() == pytest.approx(sizes[after].mean(), abs=0.2)

    def test_unknown_anchor_rejected(self, atoms):
        q = QWienerConfig.power_decay(4)
        segment = sample_levy_segment(q, atoms, np.linspace(0.0, 1.0, 5), seed=0)
        with pytest.raises(InvalidArgumentError):
            levy_path_values(segment, atoms, anchor=0.3)
