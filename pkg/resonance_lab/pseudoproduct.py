"""
Fractional integration and frequency-side pseudo-product operators

T_m(f, g)    = F^{-1} integral m(xi, eta) f_hat(xi - eta) g_hat(eta) d eta
T_m(f, g, h) = F^{-1} integral m(xi, eta, sigma) f_hat(xi - eta) g_hat(eta - sigma) h_hat(sigma)

The eta-sum runs over the whole lattice with periodic wrap of the difference
index. Symbols see the unwrapped lattice frequencies, so aliased pairs are only
exact for fields band-limited to half the Nyquist frequency.
"""

import concurrent.futures as cf
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from resonance_lab.config import settings
from resonance_lab.errors import BudgetExceededError, UsageError
from resonance_lab.propagator import DecayFit, fit_power_law
from resonance_lab.spectral import Grid, Space, SpectralField, lp_norm, random_smooth_field, transform
from resonance_lab.symbols import MultiplierSymbol, monomial_over_a, symbol_registry
from resonance_lab.utils import make_rng

logger = logging.getLogger(__name__)

CM_SHELLS = tuple(range(-5, 6))
CM_STEP = 1e-2
# Central difference stencils, offsets -2..2
FD_STENCILS = {
    1: np.array([0.0, -0.5, 0.0, 0.5, 0.0]),
    2: np.array([0.0, 1.0, -2.0, 1.0, 0.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}


class CMNormProbe(BaseModel):
    """Sampled estimate of sup |X|^n |D^n m(X)| over dyadic shells"""
    symbol: str = Field(description="Registry name of the probed symbol")
    max_order: int = Field(description="Highest derivative order probed")
    value: float = Field(description="Sup over samples, shells and orders")
    sample_count: int = Field(description="Sample points per shell")
    t: float = Field(description="Time at which the symbol was evaluated")
    shell_values: Dict[int, float] = Field(description="Sup per dyadic shell exponent")
    order_values: Dict[int, float] = Field(description="Sup per derivative order")

    def shell_spread(self) -> float:
        """Ratio of the largest to the smallest shell value (1 for a flat profile)"""
        values = np.array(list(self.shell_values.values()))
        low = values.min()
        return float(values.max() / low) if low > 0 else float("inf")


def frac_integrate(field: SpectralField, alpha: float, t: float) -> SpectralField:
    """
    Apply (1/t + Δ²)^{-alpha/4}, returning the input's space

    Raises:
        UsageError: For alpha < 0 or t <= 0
    """
    if alpha < 0:
        raise UsageError(f"alpha must be >= 0, got {alpha}")
    if t <= 0:
        raise UsageError(f"t must be > 0, got {t}")
    fhat = field.to_frequency()
    out = fhat.with_values(fhat.values * (1.0 / t + field.grid.k_fourth) ** (-alpha / 4.0))
    return out if field.space == Space.FREQUENCY else out.to_physical()


def _same_grid(*fields: SpectralField) -> Grid:
    grid = fields[0].grid
    for other in fields[1:]:
        if other.grid.key != grid.key:
            raise UsageError("pseudo-product arguments live on different grids")
    return grid


def _check_budget(grid: Grid, limit: int, kind: str) -> None:
    if limit == 0 or grid.n_per_axis > limit:
        power = 2 if kind == "bilinear" else 3
        raise BudgetExceededError(
            f"{kind} quadrature refused on d={grid.dim}, N={grid.n_per_axis}",
            estimated_cost=float(grid.size) ** power,
            limit=float(limit ** grid.dim) ** power if limit else 0.0,
        )


def _chunks(total: int, per_row: int) -> List[slice]:
    rows = max(1, settings.QUADRATURE_CHUNK_ELEMENTS // max(per_row, 1))
    return [slice(i, min(i + rows, total)) for i in range(0, total, rows)]


def _map_chunks(work, pieces: List[slice]) -> List[np.ndarray]:
    if settings.QUADRATURE_WORKERS == 1 or len(pieces) == 1:
        return [work(piece) for piece in pieces]
    with cf.ThreadPoolExecutor(max_workers=settings.QUADRATURE_WORKERS) as executor:
        return list(executor.map(work, pieces))


def bilinear_integral(symbol: MultiplierSymbol, f: SpectralField, g: SpectralField, t: float) -> np.ndarray:
    """
    Raw frequency-side sum  sum_eta m(xi, eta) f_hat[xi - eta] g_hat[eta] dxi^d

    Returns:
        Complex array on the frequency lattice (FFT order)

    Raises:
        BudgetExceededError: Above BILINEAR_MAX_N for the dimension
    """
    if symbol.arity != 2:
        raise UsageError(f"symbol '{symbol.name}' is not bilinear")
    grid = _same_grid(f, g)
    _check_budget(grid, settings.bilinear_limit(grid.dim), "bilinear")
    fflat = f.to_frequency().values.ravel()
    gflat = g.to_frequency().values.ravel()
    offsets = grid.lattice_offsets()
    freqs = offsets * grid.freq_spacing
    size = grid.size

    def work(rows: slice) -> np.ndarray:
        diff = offsets[rows, None, :] - offsets[None, :, :]
        index = np.ravel_multi_index(tuple(np.moveaxis(diff, -1, 0)), grid.shape, mode="wrap")
        weights = symbol(freqs[rows, None, :], freqs[None, :, :], t=t)
        return np.sum(weights * fflat[index] * gflat[None, :], axis=1)

    parts = _map_chunks(work, _chunks(size, size))
    return (np.concatenate(parts) * grid.freq_cell_volume).reshape(grid.shape)


def bilinear_apply(symbol: MultiplierSymbol, f: SpectralField, g: SpectralField, t: float) -> SpectralField:
    """
    T_m(f, g) as a frequency-space field

    The (2π)^{-d/2} factor makes m = 1 reproduce the pointwise product exactly;
    constant symbols take that pointwise fast path without a budget check.
    """
    if symbol.arity != 2:
        raise UsageError(f"symbol '{symbol.name}' is not bilinear")
    grid = _same_grid(f, g)
    if symbol.constant is not None:
        product = f.to_physical().values * g.to_physical().values * symbol.constant
        return transform(SpectralField.physical(grid, product), "forward")
    raw = bilinear_integral(symbol, f, g, t)
    return SpectralField.frequency_field(grid, raw * (2.0 * np.pi) ** (-grid.dim / 2.0))


def trilinear_integral(symbol: MultiplierSymbol, f: SpectralField, g: SpectralField, h: SpectralField,
                       t: float) -> np.ndarray:
    """
    Raw sum over (eta, sigma) of m f_hat[xi-eta] g_hat[eta-sigma] h_hat[sigma] dxi^{2d}, d = 1 only

    Raises:
        BudgetExceededError: For d > 1 or N above TRILINEAR_MAX_N_1D
    """
    if symbol.arity != 3:
        raise UsageError(f"symbol '{symbol.name}' is not trilinear")
    grid = _same_grid(f, g, h)
    _check_budget(grid, settings.trilinear_limit(grid.dim), "trilinear")
    n = grid.n_per_axis
    fh, gh, hh = (x.to_frequency().values for x in (f, g, h))
    k = grid.axis_offsets
    freqs = grid.axis_k[:, None]
    eta_sigma = (k[:, None] - k[None, :]) % n
    inner = gh[eta_sigma] * hh[None, :]

    def work(rows: slice) -> np.ndarray:
        xi_eta = (k[rows, None] - k[None, :]) % n
        weights = symbol(freqs[rows, None, None, :], freqs[None, :, None, :], freqs[None, None, :, :], t=t)
        return np.einsum("ceS,ce,eS->c", weights, fh[xi_eta], inner)

    parts = _map_chunks(work, _chunks(n, n * n))
    return np.concatenate(parts) * grid.freq_cell_volume ** 2


def trilinear_apply(symbol: MultiplierSymbol, f: SpectralField, g: SpectralField, h: SpectralField,
                    t: float) -> SpectralField:
    """T_m(f, g, h) as a frequency-space field; m = 1 reproduces f g h"""
    if symbol.arity != 3:
        raise UsageError(f"symbol '{symbol.name}' is not trilinear")
    grid = _same_grid(f, g, h)
    if symbol.constant is not None:
        product = np.prod([x.to_physical().values for x in (f, g, h)], axis=0) * symbol.constant
        return transform(SpectralField.physical(grid, product), "forward")
    raw = trilinear_integral(symbol, f, g, h, t)
    return SpectralField.frequency_field(grid, raw * (2.0 * np.pi) ** (-grid.dim))


def _shell_points(rng: np.random.Generator, count: int, dim: int, arity: int, radius: float):
    v = rng.standard_normal((count, arity * dim))
    v *= radius / np.linalg.norm(v, axis=1, keepdims=True)
    direction = rng.standard_normal((count, arity * dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return v, direction


def cm_norm_probe(symbol: MultiplierSymbol, max_order: int = 2, samples: int = 200, dim: int = 1,
                  t: float = np.inf, rng: Optional[np.random.Generator] = None) -> CMNormProbe:
    """
    Estimate the Coifman-Meyer norm by directional finite differences on shells 2^-5 .. 2^5

    At a point X = (xi, eta[, sigma]) and a random unit direction v the order-n
    derivative D_v^n m(X) is taken with step CM_STEP |X| and weighted by |X|^n.

    Raises:
        UsageError: For max_order outside 0..4
    """
    if not 0 <= max_order <= 4:
        raise UsageError(f"max_order must be in 0..4, got {max_order}")
    rng = rng or make_rng()
    arity = symbol.arity
    shell_values: Dict[int, float] = {}
    order_values: Dict[int, float] = {n: 0.0 for n in range(max_order + 1)}
    for s in CM_SHELLS:
        radius = 2.0 ** s
        points, direction = _shell_points(rng, samples, dim, arity, radius)
        step = CM_STEP * radius
        stencil_values = []
        for offset in range(-2, 3):
            shifted = points + offset * step * direction
            args = [shifted[:, i * dim:(i + 1) * dim] for i in range(arity)]
            stencil_values.append(symbol(*args, t=t))
        stencil_values = np.stack(stencil_values)
        best = float(np.max(np.abs(stencil_values[2])))
        order_values[0] = max(order_values[0], best)
        for n in range(1, max_order + 1):
            derivative = np.tensordot(FD_STENCILS[n], stencil_values, axes=1) / step ** n
            value = float(np.max(np.abs(derivative))) * radius ** n
            order_values[n] = max(order_values[n], value)
            best = max(best, value)
        shell_values[s] = best
    value = max(shell_values.values())
    if not np.isfinite(value):
        logger.warning("⚠️ CM probe of '%s' is not finite", symbol.name)
    return CMNormProbe(symbol=symbol.name, max_order=max_order, value=value, sample_count=samples,
                       t=float(t), shell_values=shell_values, order_values=order_values)


def cutoff_families(kind: str) -> List[MultiplierSymbol]:
    """
    The smooth degree-0 partitions

    Args:
        kind: "Psi2" (Psi_1, Psi_2), "PsiTilde2" (Psi~_1, Psi~_2) or "Phi3" (phi_1..phi_3)

    Raises:
        UsageError: For an unknown kind
    """
    names = {
        "Psi2": ["psi1", "psi2"],
        "PsiTilde2": ["psi_tilde1", "psi_tilde2"],
        "Phi3": ["phi1", "phi2", "phi3"],
    }
    if kind not in names:
        raise UsageError(f"unknown cutoff family '{kind}'; expected one of {sorted(names)}")
    return [symbol_registry.require(name) for name in names[kind]]


def fractional_integration_ratio(field: SpectralField, p: float, q: float, alpha: float,
                                 times: Sequence[float]) -> List[float]:
    """
    ||(1/t + Δ²)^{-alpha/4} f||_p / (t^{alpha/4 + d(1/p - 1/q)/4} ||f||_q) for each t

    Bounded in t when 0 <= 1/q - 1/p < alpha/d.
    """
    d = field.grid.dim
    inv_p = 0.0 if np.isinf(p) else 1.0 / p
    inv_q = 0.0 if np.isinf(q) else 1.0 / q
    if not 0.0 <= inv_q - inv_p < alpha / d:
        logger.warning("⚠️ (p, q, alpha) = (%s, %s, %s) is outside the admissible range", p, q, alpha)
    base = lp_norm(field, q)
    ratios = []
    for t in times:
        smoothed = frac_integrate(field, alpha, t)
        exponent = alpha / 4.0 + d * (inv_p - inv_q) / 4.0
        ratios.append(lp_norm(smoothed, p) / (t ** exponent * base))
    return ratios


def derivative_product_constant(k: int, f: SpectralField, g: SpectralField, t: float, p: float = 4.0) -> float:
    """
    ||T_{Q_k/A}(f, g)||_2 / (||∇_t^{k-4} f||_p ||g||_p + ||f||_p ||∇_t^{k-4} g||_p)

    Uses Q_k = xi_1^k and the exponent pair 1/2 = 1/p + 1/p.
    """
    symbol = monomial_over_a(k)
    out = bilinear_apply(symbol, f, g, t)
    fs, gs = frac_integrate(f, 4 - k, t), frac_integrate(g, 4 - k, t)
    bound = lp_norm(fs, p) * lp_norm(g, p) + lp_norm(f, p) * lp_norm(gs, p)
    return out.l2_norm() / bound


def holder_smoke(symbol: MultiplierSymbol, grid: Grid, pairs: int, t: float,
                 rng: Optional[np.random.Generator] = None, bandwidth: float = 1.0) -> float:
    """
    Largest ||T_m(f, g)||_2 / (probe ||f||_4 ||g||_4) over random smooth pairs (recorded only)
    """
    rng = rng or make_rng()
    probe = cm_norm_probe(symbol, max_order=2, samples=50, dim=grid.dim, t=t, rng=rng).value
    worst = 0.0
    for _ in range(pairs):
        f = random_smooth_field(grid, rng, bandwidth)
        g = random_smooth_field(grid, rng, bandwidth)
        ratio = bilinear_apply(symbol, f, g, t).l2_norm() / (probe * lp_norm(f, 4.0) * lp_norm(g, 4.0))
        worst = max(worst, ratio)
    return worst


def oscillatory_bilinear_sup(f: SpectralField, g: SpectralField, times: Sequence[float]) -> DecayFit:
    """
    Decay of sup_xi |integral e^{it phi(xi, eta)} f_hat(xi - eta) g_hat(eta) d eta| in t

    The stationary point in eta is eta = xi/2; the fitted exponent is dimension bound
    and only recorded.
    """
    phase = symbol_registry.require("duhamel_phase")
    values = [float(np.max(np.abs(bilinear_integral(phase, f, g, t)))) for t in times]
    return fit_power_law(times, values, skip_decades=0.0)