"""
Tests for multiplier symbols, fractional integration and the pseudo-product operators
"""

import logging

import numpy as np
import pytest

from resonance_lab.errors import BudgetExceededError, UsageError
from resonance_lab.pseudoproduct import (
    bilinear_apply,
    bilinear_integral,
    cm_norm_probe,
    cutoff_families,
    derivative_product_constant,
    frac_integrate,
    fractional_integration_ratio,
    holder_smoke,
    oscillatory_bilinear_sup,
    trilinear_apply,
    trilinear_integral,
)
from resonance_lab.resonance import sample_homogeneity_error
from resonance_lab.spectral import Grid, SpectralField, random_smooth_field, transform
from resonance_lab.symbols import (
    MultiplierSymbol,
    SymbolCategory,
    monomial_over_a,
    symbol_registry,
)


def _pointwise(*fields: SpectralField) -> SpectralField:
    product = np.prod([f.to_physical().values for f in fields], axis=0)
    return transform(SpectralField.physical(fields[0].grid, product), "forward")


def _unit_trilinear() -> MultiplierSymbol:
    return MultiplierSymbol(
        name="unit_trilinear", arity=3,
        evaluate=lambda xi, eta, sigma, t: np.ones(np.broadcast_shapes(
            np.shape(xi)[:-1], np.shape(eta)[:-1], np.shape(sigma)[:-1])),
        homogeneity_degree=0.0, description="m = 1 without the pointwise fast path",
    )


class TestSymbolRegistry:
    """Named symbols and their schemas"""

    def test_core_symbols_registered(self):
        names = symbol_registry.get_symbol_names()
        for name in ("one", "g_symbol", "fstar_symbol", "one_over_A", "flag_A_C_B", "psi1", "phi3"):
            assert name in names
        assert len(symbol_registry.get_all_schemas()) == len(names)

    def test_unknown_symbol(self):
        assert symbol_registry.get_symbol("nope") is None
        with pytest.raises(UsageError, match="unknown symbol"):
            symbol_registry.require("nope")

    def test_categories(self):
        flags = symbol_registry.by_category(SymbolCategory.FLAG)
        assert {s.name for s in flags} >= {"flag_A_C", "flag_A_C_B"}
        assert all(s.arity == 3 for s in flags)

    def test_arity_is_enforced(self):
        with pytest.raises(UsageError, match="takes 2 frequency arguments"):
            symbol_registry.require("one")(np.ones((1, 1)))

    def test_invalid_arity_is_rejected(self):
        with pytest.raises(ValueError):
            MultiplierSymbol(name="bad", arity=4, evaluate=lambda *a: 1.0, description="bad")

    def test_fstar_is_g_at_unit_time(self, rng):
        xi, eta = rng.standard_normal((2, 50, 2))
        g = symbol_registry.require("g_symbol")(xi, eta, t=1.0)
        fstar = symbol_registry.require("fstar_symbol")(xi, eta, t=7.0)
        assert np.allclose(g, fstar, rtol=1e-14, atol=0.0)

    @pytest.mark.parametrize("name,degree", [("one_over_A", -4.0), ("Q4_over_A", 0.0), ("Q6_over_A", 2.0)])
    def test_homogeneous_limit(self, rng, name, degree):
        symbol = symbol_registry.require(name)
        assert symbol.homogeneity_degree == degree
        error = sample_homogeneity_error(lambda a, b: symbol(a, b), degree, 2, 2, rng=rng)
        assert error < 1e-10

    def test_monomial_family_bounds(self):
        assert monomial_over_a(3).homogeneity_degree == -1.0
        with pytest.raises(UsageError):
            monomial_over_a(5)


class TestCutoffFamilies:
    """Smooth partitions of frequency space"""

    @pytest.mark.parametrize("kind", ["Psi2", "PsiTilde2", "Phi3"])
    def test_partition_of_unity(self, rng, kind):
        family = cutoff_families(kind)
        arity = family[0].arity
        points = rng.standard_normal((arity, 500, 2))
        total = sum(symbol(*points) for symbol in family)
        assert np.max(np.abs(total - 1.0)) < 1e-12

    def test_psi1_support(self, rng):
        xi = rng.standard_normal((500, 1))
        eta = 0.8 * xi  # |eta| = 4 |xi - eta|
        assert np.max(np.abs(symbol_registry.require("psi1")(xi, eta))) == 0.0

    def test_phi_pieces_are_nonnegative(self, rng):
        points = rng.standard_normal((3, 500, 1))
        for symbol in cutoff_families("Phi3"):
            values = symbol(*points)
            assert np.all(values.real >= 0.0)
            assert np.all(values.real <= 1.0 + 1e-12)

    def test_unknown_kind(self):
        with pytest.raises(UsageError, match="unknown cutoff family"):
            cutoff_families("Psi3")


class TestFractionalIntegration:
    """(1/t + Δ²)^{-alpha/4}"""

    def test_alpha_zero_is_identity(self, grid_1d, rng):
        field = random_smooth_field(grid_1d, rng)
        assert np.array_equal(frac_integrate(field, 0.0, 3.0).values, field.values)

    def test_semigroup(self, grid_2d, rng):
        field = random_smooth_field(grid_2d, rng)
        twice = frac_integrate(frac_integrate(field, 1.0, 2.0), 2.0, 2.0)
        once = frac_integrate(field, 3.0, 2.0)
        assert np.max(np.abs(twice.values - once.values)) < 1e-12

    def test_physical_input_stays_physical(self, grid_1d, rng):
        field = random_smooth_field(grid_1d, rng).to_physical()
        assert frac_integrate(field, 1.0, 1.0).space == field.space

    def test_invalid_arguments(self, grid_1d, rng):
        field = random_smooth_field(grid_1d, rng)
        with pytest.raises(UsageError, match="alpha"):
            frac_integrate(field, -1.0, 1.0)
        with pytest.raises(UsageError, match="t must be"):
            frac_integrate(field, 1.0, 0.0)

    def test_inadmissible_triple_warns(self, grid_1d, rng, caplog):
        field = random_smooth_field(grid_1d, rng)
        with caplog.at_level(logging.WARNING):
            ratios = fractional_integration_ratio(field, 2.0, 1.0, 0.5, [1.0, 10.0])
        assert len(ratios) == 2
        assert "outside the admissible range" in caplog.text


class TestBilinear:
    """Frequency-side bilinear quadrature"""

    @pytest.mark.parametrize("grid", [
        Grid(dim=1, n_per_axis=64, box_length=32.0),
        Grid(dim=2, n_per_axis=16, box_length=16.0),
    ], ids=["1d", "2d"])
    def test_unit_symbol_matches_pointwise_product(self, grid, rng):
        f = random_smooth_field(grid, rng)
        g = random_smooth_field(grid, rng)
        expected = _pointwise(f, g).values
        raw = bilinear_integral(symbol_registry.require("one"), f, g, 1.0)
        quadrature = raw * (2.0 * np.pi) ** (-grid.dim / 2.0)
        assert np.max(np.abs(quadrature - expected)) < 1e-10 * np.max(np.abs(expected))

    def test_constant_symbol_fast_path(self, grid_1d, rng):
        f = random_smooth_field(grid_1d, rng)
        g = random_smooth_field(grid_1d, rng)
        out = bilinear_apply(symbol_registry.require("one"), f, g, 1.0)
        assert np.max(np.abs(out.values - _pointwise(f, g).values)) < 1e-14

    def test_bilinear_in_each_argument(self, rng):
        grid = Grid(dim=1, n_per_axis=32, box_length=32.0)
        symbol = symbol_registry.require("g_symbol")
        f, g, h = (random_smooth_field(grid, rng) for _ in range(3))
        left = bilinear_apply(symbol, f + h * 2.0, g, 3.0)
        right = bilinear_apply(symbol, f, g, 3.0) + bilinear_apply(symbol, h, g, 3.0) * 2.0
        assert np.max(np.abs(left.values - right.values)) < 1e-12

    def test_budget_is_enforced(self, rng):
        grid = Grid(dim=1, n_per_axis=1024, box_length=64.0)
        f = random_smooth_field(grid, rng)
        with pytest.raises(BudgetExceededError) as info:
            bilinear_apply(symbol_registry.require("one_over_A"), f, f, 1.0)
        assert info.value.estimated_cost > info.value.limit

    def test_unsupported_dimension(self, rng):
        grid = Grid(dim=3, n_per_axis=8, box_length=8.0)
        f = random_smooth_field(grid, rng)
        with pytest.raises(BudgetExceededError):
            bilinear_integral(symbol_registry.require("one_over_A"), f, f, 1.0)

    def test_wrong_arity(self, grid_1d, rng):
        f = random_smooth_field(grid_1d, rng)
        with pytest.raises(UsageError, match="not bilinear"):
            bilinear_apply(symbol_registry.require("flag_A_C"), f, f, 1.0)

    def test_different_grids(self, grid_1d, rng):
        other = Grid(dim=1, n_per_axis=64, box_length=64.0)
        with pytest.raises(UsageError, match="different grids"):
            bilinear_apply(symbol_registry.require("one_over_A"),
                           random_smooth_field(grid_1d, rng), random_smooth_field(other, rng), 1.0)

    def test_oscillatory_sup_series(self, rng):
        grid = Grid(dim=1, n_per_axis=32, box_length=32.0)
        f = random_smooth_field(grid, rng)
        fit = oscillatory_bilinear_sup(f, f, [1.0, 2.0, 4.0])
        assert len(fit.norms) == 3
        assert np.isfinite(fit.slope)


class TestTrilinear:
    """Trilinear quadrature (d = 1)"""

    def test_unit_symbol_matches_pointwise_product(self, rng):
        grid = Grid(dim=1, n_per_axis=32, box_length=16.0)
        f, g, h = (random_smooth_field(grid, rng) for _ in range(3))
        expected = _pointwise(f, g, h).values
        raw = trilinear_integral(_unit_trilinear(), f, g, h, 1.0)
        quadrature = raw * (2.0 * np.pi) ** -1.0
        assert np.max(np.abs(quadrature - expected)) < 1e-10 * np.max(np.abs(expected))

    def test_flag_symbol_runs(self, rng):
        grid = Grid(dim=1, n_per_axis=16, box_length=16.0)
        f = random_smooth_field(grid, rng)
        out = trilinear_apply(symbol_registry.require("flag_A_C"), f, f, f, 10.0)
        assert np.all(np.isfinite(out.values))

    def test_two_dimensions_refused(self, grid_2d, rng):
        f = random_smooth_field(grid_2d, rng)
        with pytest.raises(BudgetExceededError):
            trilinear_apply(symbol_registry.require("flag_A_C"), f, f, f, 1.0)


class TestCoifmanMeyerProbe:
    """Sampled symbol-norm estimates"""

    def test_unit_symbol(self, rng):
        probe = cm_norm_probe(symbol_registry.require("one"), max_order=3, samples=20, rng=rng)
        assert probe.value == pytest.approx(1.0)
        assert probe.shell_spread() == pytest.approx(1.0)

    def test_cutoff_is_finite(self, rng):
        probe = cm_norm_probe(symbol_registry.require("psi1"), samples=50, dim=2, rng=rng)
        assert np.isfinite(probe.value)
        assert set(probe.order_values) == {0, 1, 2}

    def test_order_limit(self, rng):
        with pytest.raises(UsageError, match="max_order"):
            cm_norm_probe(symbol_registry.require("one"), max_order=5, rng=rng)

    def test_normalized_symbol_is_uniform_in_t(self):
        symbol = symbol_registry.require("cm_normalized_Q4_over_A")
        values = [cm_norm_probe(symbol, samples=100, t=t, rng=np.random.default_rng(99)).value
                  for t in (1.0, 10.0, 100.0)]
        assert all(np.isfinite(values))
        assert max(values) / min(values) <= 2.0

    def test_finite_time_is_reported(self, rng):
        probe = cm_norm_probe(symbol_registry.require("Q4_over_Z"), samples=20, t=10.0, rng=rng)
        assert probe.t == 10.0
        assert np.isfinite(probe.value)


class TestProductBounds:
    """Recorded constants of the negative-degree products"""

    @pytest.mark.parametrize("k", range(5))
    def test_derivative_product_constant_is_stable_in_t(self, rng, k):
        grid = Grid(dim=1, n_per_axis=256, box_length=64.0)
        pairs = [(random_smooth_field(grid, rng), random_smooth_field(grid, rng)) for _ in range(2)]
        constants = [max(derivative_product_constant(k, f, g, t) for f, g in pairs) for t in (1.0, 10.0, 100.0)]
        assert all(c > 0.0 and np.isfinite(c) for c in constants)
        assert max(constants) / min(constants) <= 10.0

    def test_holder_smoke_over_a_hundred_pairs(self, rng):
        grid = Grid(dim=1, n_per_axis=64, box_length=32.0)
        ratio = holder_smoke(symbol_registry.require("Q4_over_A"), grid, pairs=100, t=10.0, rng=rng, bandwidth=0.4)
        assert 0.0 < ratio <= 1e3
