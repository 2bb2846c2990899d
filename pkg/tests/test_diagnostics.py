"""
Tests for the profile decomposition, X-norm reports and growth fits
"""

import numpy as np
import pytest

from resonance_lab.diagnostics import (
    GROWTH_REFERENCES,
    XNORM_COMPONENTS,
    calibrate_duhamel_prefactor,
    compute_fstar,
    compute_g,
    compute_h,
    fit_growth_exponents,
    h_spot_check,
    monitor_trajectory,
    profile_state,
    xnorm_report,
)
from resonance_lab.solver import SolverConfig, integrate_profile
from resonance_lab.spectral import Grid, gaussian_field


@pytest.fixture
def grid() -> Grid:
    return Grid(dim=1, n_per_axis=64, box_length=64.0)


@pytest.fixture
def f1(grid):
    return gaussian_field(grid, width=4.0, amplitude=0.1).to_frequency()


@pytest.fixture
def cfg(grid) -> SolverConfig:
    return SolverConfig(grid=grid, alpha_coeff=1.0, t_end=1.5, dt=0.05, dealias=False)


def _sup(values) -> float:
    return float(np.max(np.abs(values)))


class TestCalibration:
    """Duhamel prefactor against the solver right-hand side"""

    def test_prefactor_matches_transform_convention(self, f1, cfg):
        result = calibrate_duhamel_prefactor(f1, cfg)
        assert result.relative_residual <= 1e-8
        assert abs(result.prefactor - result.expected) <= 1e-8 * result.expected
        assert result.expected == pytest.approx((2.0 * np.pi) ** -0.5)

    def test_vanishing_nonlinearity(self, f1, grid):
        cfg = SolverConfig(grid=grid, alpha_coeff=0.0, beta_coeff=0.0)
        result = calibrate_duhamel_prefactor(f1, cfg)
        assert result.prefactor == 0
        assert result.relative_residual == 0.0


class TestBilinearPieces:
    """Algebra of f* and g"""

    def test_g_scales_quadratically(self, f1):
        g = compute_g(f1, 3.0).values
        assert _sup(compute_g(f1 * 0.1, 3.0).values - 0.01 * g) <= 1e-12 * 0.01 * _sup(g)

    def test_g_parallelogram(self, f1, grid):
        other = gaussian_field(grid, width=3.0, amplitude=0.05, center=[2.0]).to_frequency()
        g, h = compute_g(f1, 2.0).values, compute_g(other, 2.0).values
        plus, minus = compute_g(f1 + other, 2.0).values, compute_g(f1 - other, 2.0).values
        assert _sup(plus + minus - 2.0 * (g + h)) <= 1e-12 * _sup(g)

    def test_g_at_unit_time_cancels_fstar(self, f1):
        assert _sup(compute_g(f1, 1.0).values + compute_fstar(f1).values) <= 1e-14 * _sup(compute_fstar(f1).values)

    def test_h_without_prefactor(self, f1):
        fstar = compute_fstar(f1)
        g = compute_g(f1, 2.0)
        h = compute_h(f1 * 2.0, f1, fstar, g, 0j)
        assert np.allclose(h.values, -fstar.values - g.values, rtol=0.0, atol=1e-15)


class TestDecomposition:
    """f = f1 + c (f* + g + h) along a trajectory"""

    def test_reconstruction(self, f1, cfg):
        prefactor = calibrate_duhamel_prefactor(f1, cfg).prefactor
        record = integrate_profile(f1, cfg)
        state = profile_state(record.final_profile, record.times[-1], f1, compute_fstar(f1), prefactor)
        assert state.reconstruction_error() <= 1e-12

    def test_residual_vanishes_at_start(self, f1, cfg):
        prefactor = calibrate_duhamel_prefactor(f1, cfg).prefactor
        state = profile_state(f1, 1.0, f1, compute_fstar(f1), prefactor)
        assert _sup(state.hhat.values) <= 1e-12 * _sup(state.fstar_hat.values)

    def test_monitor_rows(self, f1, cfg):
        prefactor = calibrate_duhamel_prefactor(f1, cfg).prefactor
        record = integrate_profile(f1, cfg.model_copy(update={"checkpoint_count": 4}))
        rows = monitor_trajectory(record, prefactor)
        assert len(rows) == len(record.times)
        for key in ("t", "xnorm_total", "g_x0", "g_x3", "h_x3", "g_decay_sup", "h_decay_sup"):
            assert key in rows[-1]
        assert max(row["reconstruction_error"] for row in rows) <= 1e-12

    @pytest.mark.slow
    def test_h_pieces_integrate_to_residual(self, grid, f1):
        cfg = SolverConfig(grid=grid, alpha_coeff=1.0, t_end=2.0, dt=0.0125,
                           checkpoints=np.linspace(1.0, 2.0, 41)[1:].tolist(), dealias=False)
        prefactor = calibrate_duhamel_prefactor(f1, cfg).prefactor
        spot = h_spot_check(integrate_profile(f1, cfg), prefactor)
        assert spot.sum_error <= 1e-4
        assert np.isfinite(spot.h3_share)


class TestXNorm:
    """X-norm components"""

    def test_components(self, f1):
        report = xnorm_report(f1, 4.0)
        assert set(report.components) == set(XNORM_COMPONENTS)
        assert report.total == max(report.components.values())
        assert report.components["l2"] == pytest.approx(f1.l2_norm())
        assert report.boundary_flags == []

    def test_linear_in_data(self, f1):
        base = xnorm_report(f1, 4.0).components
        doubled = xnorm_report(f1 * 2.0, 4.0).components
        for name in XNORM_COMPONENTS:
            assert doubled[name] == pytest.approx(2.0 * base[name], rel=1e-12)


class TestGrowthFits:
    """Growth exponents against their references"""

    def test_unknown_quantity(self):
        with pytest.raises(KeyError):
            fit_growth_exponents([1.0, 2.0], [1.0, 1.0], "nope", 1)

    def test_short_series_is_untrusted(self):
        times = np.geomspace(1.0, 1000.0, 5)
        growth = fit_growth_exponents(times, times ** 0.1, "l2", 1)
        assert not growth.fit.trusted
        assert growth.fit.slope == pytest.approx(0.1)

    def test_long_series(self):
        times = np.geomspace(1.0, 1000.0, 12)
        growth = fit_growth_exponents(times, times ** -0.25, "h_decay_sup", 1)
        assert growth.fit.trusted
        assert growth.expected == pytest.approx(-0.25)
        assert not growth.recorded_only

    def test_dimension_bound_references(self):
        reference = GROWTH_REFERENCES["g_x3"]
        assert reference.expected(1) is None
        assert reference.expected(5) == pytest.approx(0.5 + 1.0 / 47.0)
        assert GROWTH_REFERENCES["g_decay_sup"].expected(1) == pytest.approx(-0.5)
        assert GROWTH_REFERENCES["h_decay_sup"].expected(5) == pytest.approx(-1.25)
