"""
Tests for the linear propagator, stationary phase and decay fits
"""

import logging

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import special

from resonance_lab.errors import UsageError
from resonance_lab.propagator import (
    ROTATION,
    NormKind,
    band_limited_bump,
    banded_times,
    evolve_linear,
    fit_power_law,
    measure_band_prefactors,
    measure_banded_decay,
    measure_linear_decay,
    phase_gradient,
    reliable_window,
    rho_cutoff,
    rho_kernel,
    stationary_point,
)
from resonance_lab.spectral import Space, gaussian_field, random_smooth_field


class TestEvolution:
    """e^{itΔ²} on the lattice"""

    def test_preserves_l2(self, grid_2d, rng):
        field = random_smooth_field(grid_2d, rng)
        evolved = evolve_linear(field, 7.5)
        assert abs(evolved.l2_norm() - field.l2_norm()) < 1e-12

    def test_forward_then_back(self, grid_1d, rng):
        field = random_smooth_field(grid_1d, rng).to_physical()
        back = evolve_linear(evolve_linear(field, 3.0), -3.0)
        assert back.space == Space.PHYSICAL
        assert np.max(np.abs(back.values - field.values)) < 1e-12

    def test_zero_time_is_identity(self, grid_1d):
        field = gaussian_field(grid_1d).to_frequency()
        assert np.array_equal(evolve_linear(field, 0.0).values, field.values)


class TestStationaryPhase:
    """Critical point of |xi|^4 + xi.x/t"""

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_gradient_vanishes(self, rng, dim):
        x = rng.uniform(-50.0, 50.0, size=(1000, dim))
        t = 37.5
        xi = stationary_point(x, t)
        residual = np.linalg.norm(phase_gradient(xi, x, t), axis=-1)
        scale = np.linalg.norm(x, axis=-1) / t
        assert np.max(residual / scale) < 1e-9

    def test_origin(self):
        assert np.array_equal(stationary_point(np.zeros(2), 5.0), np.zeros(2))

    def test_rejects_non_positive_time(self):
        with pytest.raises(UsageError):
            stationary_point([1.0], 0.0)


class TestPowerLawFit:
    """Weighted log-log fits"""

    def test_exact_power_law(self):
        t = np.logspace(0, 3, 13)
        fit = fit_power_law(t, 3.0 * t ** -0.5)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)
        assert fit.max_residual < 1e-12
        assert fit.predict(10.0) == pytest.approx(3.0 / np.sqrt(10.0))
        assert fit.trusted

    def test_transient_is_skipped(self):
        t = np.logspace(0, 3, 31)
        values = t ** -0.25
        values[t < 10.0] = 1.0
        fit = fit_power_law(t, values, skip_decades=1.0)
        assert fit.fit_start == pytest.approx(10.0)
        assert fit.slope == pytest.approx(-0.25, abs=1e-10)

    def test_too_much_skipped_falls_back(self):
        fit = fit_power_law([1.0, 2.0, 4.0], [1.0, 0.5, 0.25], skip_decades=3.0)
        assert not fit.trusted
        assert fit.slope == pytest.approx(-1.0)

    def test_times_must_increase(self):
        with pytest.raises(ValidationError):
            fit_power_law([2.0, 1.0], [1.0, 1.0])


class TestDecayMeasurement:
    """Norm series of the free flow and the wrap-around window"""

    def test_l2_is_flat(self, grid_1d):
        fit = measure_linear_decay(gaussian_field(grid_1d), [1.0, 2.0, 4.0, 8.0], NormKind.L2)
        assert abs(fit.slope) < 1e-10

    def test_reliable_window_flags(self, grid_1d):
        bump = band_limited_bump(grid_1d, bandwidth=1.0)
        limit, flags = reliable_window(bump, [1e-3, 1e3])
        assert 1e-3 < limit < 1e3
        assert flags == [True, False]

    def test_fit_beyond_window_is_untrusted(self, grid_1d, caplog):
        bump = band_limited_bump(grid_1d, bandwidth=1.0)
        with caplog.at_level(logging.WARNING):
            fit = measure_linear_decay(bump, [1.0, 10.0, 100.0], skip_decades=0.0)
        assert not fit.trusted
        assert "wrap-around" in caplog.text

    def test_banded_times_are_dimensionless(self):
        times = banded_times(1)
        assert times[0] == pytest.approx(1.0)
        assert times[-1] == pytest.approx(10.0)

    @pytest.mark.slow
    def test_banded_decay_slope(self):
        fit = measure_banded_decay(1, 1)
        assert fit.trusted
        assert fit.slope == pytest.approx(-0.5, abs=0.05)

    @pytest.mark.slow
    def test_band_prefactors_are_comparable(self):
        prefactors = measure_band_prefactors([1, 2, 3], 1)
        values = list(prefactors.values())
        assert max(values) / min(values) < 3.0


class TestRhoKernel:
    """Cut-off stationary-phase kernel"""

    def test_cutoff_limits(self):
        xi_star = np.array([0.5])
        assert rho_cutoff(np.array([0.0]), xi_star) == pytest.approx(1.0)
        assert rho_cutoff(2.0 * xi_star, xi_star) == pytest.approx(0.0)

    def test_value_at_origin(self):
        # integral of e^{i y^4} over R is 2 Gamma(5/4) e^{i pi/8}
        result = rho_kernel([0.0], 16.0)
        expected = 0.5 * 2.0 * special.gamma(1.25) * ROTATION
        assert result.converged
        assert abs(result.value - expected) < 1e-8

    def test_rejects_early_time(self):
        with pytest.raises(UsageError, match="t >= 1"):
            rho_kernel([1.0], 0.5)

    def test_rejects_high_dimension(self):
        with pytest.raises(UsageError, match="d <= 2"):
            rho_kernel([1.0, 0.0, 0.0], 10.0)
