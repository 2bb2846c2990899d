"""
Tests for the profile RK4 solver and the split-step oracle
"""

import logging

import numpy as np
import pytest
from pydantic import ValidationError

from resonance_lab.errors import BlowUpError, UsageError
from resonance_lab.propagator import evolve_linear
from resonance_lab.solver import (
    SignConvention,
    SolverConfig,
    integrate_profile,
    profile_rhs,
    split_step_oracle,
)
from resonance_lab.spectral import Grid, gaussian_field


@pytest.fixture
def small_data(grid_1d):
    return gaussian_field(grid_1d, width=4.0, amplitude=0.1).to_frequency()


def _relative(a, b) -> float:
    return float(np.max(np.abs(a.values - b.values)) / np.max(np.abs(b.values)))


class TestSolverConfig:
    """Validation and checkpoint layout"""

    def test_end_must_follow_start(self, grid_1d):
        with pytest.raises(ValidationError, match="must exceed"):
            SolverConfig(grid=grid_1d, t_start=2.0, t_end=1.0)

    def test_checkpoints_inside_span(self, grid_1d):
        with pytest.raises(ValidationError, match="within"):
            SolverConfig(grid=grid_1d, t_end=5.0, checkpoints=[6.0])

    def test_positive_step(self, grid_1d):
        with pytest.raises(ValidationError):
            SolverConfig(grid=grid_1d, dt=0.0)

    def test_checkpoint_times(self, grid_1d):
        cfg = SolverConfig(grid=grid_1d, t_end=8.0, checkpoints=[4.0, 2.0])
        assert cfg.checkpoint_times() == [1.0, 2.0, 4.0, 8.0]
        assert not SolverConfig(grid=grid_1d, dt=0.1).adaptive

    def test_default_checkpoints_are_log_spaced(self, grid_1d):
        times = SolverConfig(grid=grid_1d, t_end=100.0, checkpoint_count=3).checkpoint_times()
        assert times == pytest.approx([1.0, 10.0, 100.0])


class TestProfileRhs:
    """Right-hand side of the profile equation"""

    def test_requires_frequency_space(self, grid_1d, small_data):
        cfg = SolverConfig(grid=grid_1d)
        with pytest.raises(UsageError, match="frequency-space"):
            profile_rhs(small_data.to_physical(), 1.0, cfg)

    def test_vanishes_without_nonlinearity(self, grid_1d, small_data):
        cfg = SolverConfig(grid=grid_1d, alpha_coeff=0.0, beta_coeff=0.0)
        assert not np.any(profile_rhs(small_data, 1.0, cfg).values)

    def test_quadratic_in_data(self, grid_1d, small_data):
        cfg = SolverConfig(grid=grid_1d, alpha_coeff=1.0, beta_coeff=0.5)
        base = profile_rhs(small_data, 2.0, cfg)
        doubled = profile_rhs(small_data * 2.0, 2.0, cfg)
        assert _relative(doubled, base * 4.0) < 1e-12


class TestFreeFlow:
    """Both methods are exact when the nonlinearity vanishes"""

    def test_rk4_keeps_profile(self, grid_1d, small_data):
        cfg = SolverConfig(grid=grid_1d, alpha_coeff=0.0, t_end=3.0, dt=0.1)
        record = integrate_profile(small_data, cfg)
        assert _relative(record.final_profile, small_data) < 1e-12

    def test_split_step_keeps_profile(self, grid_1d, small_data):
        cfg = SolverConfig(grid=grid_1d, alpha_coeff=0.0, t_end=3.0, dt=0.1, dealias=False)
        u1 = evolve_linear(small_data, -1.0)
        record = split_step_oracle(u1, cfg)
        assert _relative(record.final_profile, small_data) < 1e-12


class TestTrajectory:
    """Checkpoint recording and sign conventions"""

    def test_records_every_checkpoint(self, grid_1d, small_data):
        cfg = SolverConfig(grid=grid_1d, t_end=2.0, dt=0.05, checkpoints=[1.25, 1.5])
        record = integrate_profile(small_data, cfg)
        assert record.times == cfg.checkpoint_times()
        assert len(record.profiles) == len(record.sup_u) == len(record.l2) == 4
        assert record.steps == 20
        assert record.method == "profile-rk4"

    def test_abstract_convention_round_trip(self, grid_1d, small_data):
        cfg = SolverConfig(grid=grid_1d, t_end=1.5, dt=0.05, sign=SignConvention.ABSTRACT)
        record = integrate_profile(small_data, cfg)
        expected = evolve_linear(small_data, -1.0).to_physical()
        assert _relative(record.solution_at(0), expected) < 1e-12

    def test_adaptive_run_reaches_end(self, grid_1d, small_data):
        cfg = SolverConfig(grid=grid_1d, t_end=2.0)
        record = integrate_profile(small_data, cfg)
        assert record.times[-1] == 2.0
        assert record.steps > 0
        assert record.rejected_steps >= 0

    def test_grid_mismatch(self, small_data):
        cfg = SolverConfig(grid=Grid(dim=1, n_per_axis=64, box_length=64.0))
        with pytest.raises(UsageError, match="different grids"):
            integrate_profile(small_data, cfg)

    def test_large_data_warns(self, grid_1d, caplog):
        data = gaussian_field(grid_1d, width=4.0, amplitude=0.5)
        cfg = SolverConfig(grid=grid_1d, t_end=1.1, dt=0.05)
        with caplog.at_level(logging.WARNING):
            integrate_profile(data, cfg)
        assert "small-data threshold" in caplog.text

    def test_blow_up_is_reported(self, grid_1d):
        data = gaussian_field(grid_1d, width=1.0, amplitude=1e3)
        cfg = SolverConfig(grid=grid_1d, t_end=10.0, dt=0.5)
        with pytest.raises(BlowUpError) as info:
            integrate_profile(data, cfg)
        assert info.value.time > 1.0


class TestCrossValidation:
    """RK4 on the profile equation against Strang splitting"""

    def test_methods_agree(self, grid_1d, small_data):
        cfg = SolverConfig(grid=grid_1d, alpha_coeff=1.0, beta_coeff=0.5, t_end=2.0, dt=0.05)
        rk4 = integrate_profile(small_data, cfg)
        split = split_step_oracle(evolve_linear(small_data, -1.0), cfg)
        assert split.method == "split-step"
        assert split.times == rk4.times
        assert _relative(split.final_profile, rk4.final_profile) < 1e-4

    def test_data_outside_the_band_is_dropped_by_both(self, grid_1d, small_data, rng):
        outside = ~grid_1d.dealias_mask
        noise = rng.standard_normal(grid_1d.shape) + 1j * rng.standard_normal(grid_1d.shape)
        rough = small_data.with_values(small_data.values + 1e-3 * noise * outside)
        cfg = SolverConfig(grid=grid_1d, alpha_coeff=1.0, beta_coeff=0.5, t_end=2.0, dt=0.05)
        rk4 = integrate_profile(rough, cfg)
        split = split_step_oracle(evolve_linear(rough, -1.0), cfg)
        assert np.max(np.abs(rk4.profiles[0].values[outside])) == 0.0
        assert _relative(split.profiles[0], rk4.profiles[0]) < 1e-12
        assert _relative(split.final_profile, rk4.final_profile) < 1e-4

    def test_undealiased_run_keeps_the_band_edge(self, grid_1d, small_data):
        outside = ~grid_1d.dealias_mask
        rough = small_data.with_values(small_data.values + 1e-3 * outside)
        cfg = SolverConfig(grid=grid_1d, t_end=1.5, dt=0.05, dealias=False)
        record = integrate_profile(rough, cfg)
        assert np.allclose(record.profiles[0].values[outside], 1e-3)
