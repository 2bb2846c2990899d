"""
Linear propagator e^{itΔ²}, stationary-phase structure and decay-rate measurement
"""

import logging
import warnings
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import integrate, special

from resonance_lab.config import settings
from resonance_lab.errors import UsageError
from resonance_lab.spectral import (
    DyadicFamily,
    Grid,
    Space,
    SpectralField,
    lp_norm,
    smooth_step,
    sup_norm,
)

logger = logging.getLogger(__name__)

# Contour rotation angle: y = s e^{i pi/8} turns e^{i y^4} into e^{-s^4}
ROTATION = np.exp(1j * np.pi / 8.0)
# chi(r) = 1 for r <= CHI_FLAT, 0 for r >= 2
CHI_FLAT = 1.5


class NormKind(str, Enum):
    """Norm tracked by a decay measurement"""
    SUP = "sup"
    L2 = "L2"


class DecayFit(BaseModel):
    """A norm time series with its least-squares log-log slope"""
    times: List[float] = Field(description="Strictly increasing positive times")
    norms: List[float] = Field(description="Positive norm values")
    slope: float = Field(description="Fitted d log(norm) / d log(t)")
    intercept: float = Field(description="Fitted log(norm) at t = 1")
    max_residual: float = Field(description="Largest absolute log residual of the fit")
    fit_start: float = Field(description="First time included in the fit")
    trusted: bool = Field(default=True, description="False when a window or span rule is violated")
    notes: List[str] = Field(default_factory=list, description="Reasons a fit is untrusted")

    @model_validator(mode="after")
    def _check_series(self) -> "DecayFit":
        t = np.asarray(self.times)
        if len(self.times) != len(self.norms):
            raise ValueError("times and norms must have equal length")
        if t.size and (np.any(t <= 0) or np.any(np.diff(t) <= 0)):
            raise ValueError("times must be positive and strictly increasing")
        return self

    def predict(self, t: float) -> float:
        return float(np.exp(self.intercept) * t ** self.slope)


class RhoEvaluation(BaseModel):
    """Value of the cut-off stationary-phase kernel"""
    value: complex = Field(description="rho(x, t)")
    error: float = Field(description="Estimated absolute quadrature error")
    converged: bool = Field(description="False when the quadrature budget ran out")
    scaled_position: List[float] = Field(description="z = x t^{-1/4}")


def fit_power_law(times: Sequence[float], norms: Sequence[float], skip_decades: float = 0.0) -> DecayFit:
    """
    Weighted least-squares fit of log(norm) against log(t)

    Each point is weighted by its share of the log-time span so clustered
    samples do not dominate.

    Args:
        times: Strictly increasing positive times
        norms: Positive values
        skip_decades: Leading span (in decades of t) left out as transient

    Returns:
        DecayFit over the full series; the fit uses only the retained tail
    """
    t = np.asarray(times, dtype=float)
    n = np.asarray(norms, dtype=float)
    notes: List[str] = []
    keep = t >= t[0] * 10.0 ** skip_decades * (1.0 - 1e-12)
    if keep.sum() < 2:
        keep = np.ones_like(t, dtype=bool)
        notes.append("too few points after transient exclusion; fitted all points")
    lt, ln = np.log(t[keep]), np.log(np.maximum(n[keep], np.finfo(float).tiny))
    if lt.size >= 3:
        widths = np.gradient(lt)
        weights = np.sqrt(widths / widths.sum())
    else:
        weights = np.ones_like(lt)
    slope, intercept = np.polyfit(lt, ln, 1, w=weights)
    residual = ln - (slope * lt + intercept)
    return DecayFit(
        times=t.tolist(), norms=n.tolist(), slope=float(slope), intercept=float(intercept),
        max_residual=float(np.max(np.abs(residual))), fit_start=float(t[keep][0]),
        trusted=not notes, notes=notes,
    )


def evolve_linear(field: SpectralField, t: float) -> SpectralField:
    """Apply e^{itΔ²}: u_hat -> e^{it|xi|^4} u_hat, returning the input's space"""
    fhat = field.to_frequency()
    out = fhat.with_values(fhat.values * np.exp(1j * t * field.grid.k_fourth))
    return out if field.space == Space.FREQUENCY else out.to_physical()


def stationary_point(x, t: float) -> np.ndarray:
    """
    Critical point of phi_{t,x}(xi) = |xi|^4 + xi.x/t

    xi* = -(|x| / 4t)^(1/3) x/|x|, and xi* = 0 at x = 0.
    """
    if t <= 0:
        raise UsageError(f"stationary_point needs t > 0, got {t}")
    x = np.asarray(x, dtype=float)
    x = x.reshape(1) if x.ndim == 0 else x
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(r > 0, x / np.where(r > 0, r, 1.0), 0.0)
    return -np.cbrt(r / (4.0 * t)) * unit


def phase_gradient(xi, x, t: float) -> np.ndarray:
    """grad_xi phi_{t,x} = 4|xi|^2 xi + x/t"""
    xi = np.asarray(xi, dtype=float)
    return 4.0 * np.sum(xi * xi, axis=-1, keepdims=True) * xi + np.asarray(x, dtype=float) / t


def band_limited_bump(grid: Grid, bandwidth: float, amplitude: float = 1.0,
                      transition: float = 0.5) -> SpectralField:
    """
    Flat-top spectrum: amplitude for |xi| <= bandwidth, smooth decay to zero at
    (1 + transition) * bandwidth
    """
    profile = 1.0 - smooth_step((grid.k_abs / bandwidth - 1.0) / transition)
    return SpectralField.frequency_field(grid, amplitude * profile)


def banded_bump(grid: Grid, j: int) -> SpectralField:
    """Band-j bump phi_j normalized to unit L1 mass in physical space"""
    spectrum = DyadicFamily(grid=grid).phi(j)
    field = SpectralField.frequency_field(grid, spectrum)
    return field * (1.0 / lp_norm(field, 1.0))


def significant_radius(field: SpectralField, tolerance: Optional[float] = None) -> float:
    """Largest |xi| carrying spectral amplitude above tolerance * max amplitude"""
    tolerance = settings.BANDWIDTH_TOLERANCE if tolerance is None else tolerance
    amplitude = np.abs(field.to_frequency().values)
    peak = amplitude.max()
    if peak == 0:
        return 0.0
    return float(field.grid.k_abs[amplitude >= tolerance * peak].max())


def reliable_window(field: SpectralField, times: Sequence[float]) -> Tuple[float, List[bool]]:
    """
    Wrap-around safe window: the fastest significant packet must stay inside the half box

    Returns:
        (latest reliable time, per-time flags)
    """
    limit = field.grid.reliable_time(significant_radius(field))
    return limit, [t < limit for t in times]


def measure_linear_decay(initial: SpectralField, times: Sequence[float], norm: NormKind = NormKind.SUP,
                         skip_decades: float = 1.0, refine: bool = False) -> DecayFit:
    """
    Fit the decay of ||e^{itΔ²} initial|| over the given times

    Args:
        initial: Data at t = 0
        times: Strictly increasing positive times
        norm: SUP or L2
        skip_decades: Transient excluded from the fit
        refine: Polish sup norms with the band-limited maximizer

    Returns:
        DecayFit, untrusted when any time leaves the reliable window
    """
    norm = NormKind(norm)
    fhat = initial.to_frequency()
    values = []
    for t in times:
        u = evolve_linear(fhat, t)
        values.append(sup_norm(u, refine=refine) if norm == NormKind.SUP else u.l2_norm())
    fit = fit_power_law(times, values, skip_decades=skip_decades if norm == NormKind.SUP else 0.0)
    limit, flags = reliable_window(initial, times)
    if not all(flags):
        logger.warning("⚠️ times beyond the wrap-around window t < %.4g; fit flagged untrusted", limit)
        fit = fit.model_copy(update={
            "trusted": False,
            "notes": fit.notes + [f"times beyond reliable window t < {limit:.4g}"],
        })
    return fit


def banded_times(j: int, count: int = 10) -> np.ndarray:
    """Default window: dimensionless times t * 2^{4j} from 16 to 160"""
    return np.logspace(np.log10(16.0), np.log10(160.0), count) * 2.0 ** (-4 * j)


def band_grid(j: int, dim: int, t_max: float) -> Grid:
    """Grid that resolves band j and keeps it wrap-around safe up to t_max"""
    return Grid.auto_scaled(dim, k_max=8.0 * 2.0 ** j / 3.0, t_max=t_max, oversampling=1.05, margin=1.05)


def measure_banded_decay(j: int, dim: int, times: Optional[Sequence[float]] = None,
                         grid: Optional[Grid] = None) -> DecayFit:
    """
    Sup-norm decay of a band-j bump started from unit L1 mass

    Returns:
        DecayFit over all given times (no transient exclusion)
    """
    times = banded_times(j) if times is None else np.asarray(times, dtype=float)
    grid = grid or band_grid(j, dim, float(np.max(times)))
    initial = banded_bump(grid, j)
    logger.info("banded decay j=%d on grid N=%d L=%.4g", j, grid.n_per_axis, grid.box_length)
    return measure_linear_decay(initial, times, NormKind.SUP, skip_decades=0.0)


def measure_band_prefactors(bands: Sequence[int], dim: int, t_ref: float = 1.0) -> Dict[int, float]:
    """
    sup |e^{i t_ref Δ²} f_j| * 2^{dj} per band; constant across j when the 2^{-dj} law holds
    """
    out: Dict[int, float] = {}
    for j in bands:
        grid = band_grid(j, dim, t_ref)
        u = evolve_linear(banded_bump(grid, j), t_ref)
        out[j] = sup_norm(u) * 2.0 ** (dim * j)
    return out


def rho_cutoff(xi, xi_star) -> np.ndarray:
    """chi(|xi| / |xi - xi*|) with chi = 1 below 3/2 and 0 from 2 on"""
    xi = np.asarray(xi, dtype=float)
    xi_star = np.asarray(xi_star, dtype=float)
    num = np.linalg.norm(np.atleast_1d(xi), axis=-1) if xi.ndim else np.abs(xi)
    den = np.linalg.norm(np.atleast_1d(xi - xi_star), axis=-1) if xi.ndim else np.abs(xi - xi_star)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    return 1.0 - smooth_step((ratio - CHI_FLAT) / (2.0 - CHI_FLAT))


def _quad_complex(fn, lo: float, hi: float, limit: int) -> Tuple[complex, float, bool]:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        re, re_err = integrate.quad(lambda s: fn(s).real, lo, hi, limit=limit)
        im, im_err = integrate.quad(lambda s: fn(s).imag, lo, hi, limit=limit)
    ok = not any(issubclass(w.category, integrate.IntegrationWarning) for w in caught)
    return complex(re, im), float(abs(re_err) + abs(im_err)), ok


def _free_kernel(z: np.ndarray, budget: int) -> Tuple[complex, float, bool]:
    """K(z) = integral over R^d of e^{i(|y|^4 + z.y)} dy along the rotated contour"""
    d = z.size
    rz = float(np.linalg.norm(z))
    span = 4.0 + 2.0 * (0.4 * rz) ** (1.0 / 3.0)
    if d == 1:
        c = 1j * float(z[0]) * ROTATION
        value, error, ok = _quad_complex(lambda s: np.exp(-s ** 4 + c * s), -span, span, budget)
        return ROTATION * value, error, ok
    value, error, ok = _quad_complex(
        lambda s: np.exp(-s ** 4) * special.jv(0, rz * ROTATION * s) * s, 0.0, span, budget)
    factor = 2.0 * np.pi * ROTATION ** 2
    return factor * value, abs(factor) * error, ok


def _disk_correction(z: np.ndarray, y_star: np.ndarray, budget: int) -> Tuple[complex, float, bool]:
    """Integral of (1 - chi) e^{i(|y|^4 + z.y)} over the Apollonius disk where chi < 1"""
    r_star = float(np.linalg.norm(y_star))
    if r_star == 0.0:
        return 0j, 0.0, True
    center = 1.8 * y_star
    radius = 1.2 * r_star
    if z.size == 1:
        def integrand(y: float) -> complex:
            weight = 1.0 - rho_cutoff(np.array([y]), y_star)
            return complex(weight * np.exp(1j * (y ** 4 + z[0] * y)))

        lo, hi = sorted((center[0] - radius, center[0] + radius))
        return _quad_complex(integrand, lo, hi, budget)

    def polar(part: str):
        def fn(theta: float, rr: float) -> float:
            y = center + rr * np.array([np.cos(theta), np.sin(theta)])
            weight = 1.0 - rho_cutoff(y, y_star)
            value = weight * np.exp(1j * (np.dot(y, y) ** 2 + np.dot(z, y))) * rr
            return float(value.real if part == "re" else value.imag)
        return fn

    opts = {"limit": budget}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        re, re_err = integrate.nquad(polar("re"), [[0.0, 2.0 * np.pi], [0.0, radius]], opts=[opts, opts])
        im, im_err = integrate.nquad(polar("im"), [[0.0, 2.0 * np.pi], [0.0, radius]], opts=[opts, opts])
    ok = not any(issubclass(w.category, integrate.IntegrationWarning) for w in caught)
    return complex(re, im), float(abs(re_err) + abs(im_err)), ok


def rho_kernel(x, t: float, quad_budget: int = 200) -> RhoEvaluation:
    """
    rho(x, t) = integral of e^{it phi_{t,x}(xi)} chi(|xi| / |xi - xi*|) dxi

    The integral is self-similar: with y = t^{1/4} xi and z = x t^{-1/4},
    rho = t^{-d/4} [K(z) - D(z)], where K is the full oscillatory integral
    (computed on the rotated contour) and D integrates (1 - chi) e^{i(|y|^4 + z.y)}
    over the bounded disk where chi < 1.

    Raises:
        UsageError: For d > 2 or t < 1
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size > 2:
        raise UsageError("rho_kernel supports d <= 2")
    if t < 1.0:
        raise UsageError(f"rho_kernel needs t >= 1, got {t}")
    z = x * t ** (-0.25)
    y_star = stationary_point(z, 1.0)
    k_value, k_err, k_ok = _free_kernel(z, quad_budget)
    d_value, d_err, d_ok = _disk_correction(z, y_star, quad_budget)
    scale = t ** (-x.size / 4.0)
    if not (k_ok and d_ok):
        logger.warning("⚠️ rho quadrature budget %d exhausted at x=%s t=%g", quad_budget, x.tolist(), t)
    return RhoEvaluation(
        value=complex(scale * (k_value - d_value)),
        error=float(scale * (k_err + d_err)),
        converged=bool(k_ok and d_ok),
        scaled_position=z.tolist(),
    )


def rho_sup(t: float, scaled_positions: Sequence[float], quad_budget: int = 200) -> float:
    """Largest |rho(x, t)| over x = z t^{1/4} for the given scaled positions (d = 1)"""
    return max(abs(rho_kernel([z * t ** 0.25], t, quad_budget).value) for z in scaled_positions)
