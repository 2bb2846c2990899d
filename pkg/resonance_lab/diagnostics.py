"""
Profile diagnostics: the decomposition f = f1 + c (f* + g + h), X-norm reports and growth fits

Bilinear pieces use the raw frequency integral (no (2π) factors):
    f*_hat = -i integral e^{i phi} / (1 + iZ) f1_hat f1_hat
    g_hat  =  i integral e^{it phi} / (1/t + iZ) f_hat f_hat
and h is the residual (f_hat - f1_hat)/c - f*_hat - g_hat, where c is the
Duhamel prefactor calibrated against profile_rhs.
"""

import logging
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate

from resonance_lab.config import settings
from resonance_lab.propagator import DecayFit, evolve_linear, fit_power_law
from resonance_lab.pseudoproduct import bilinear_integral
from resonance_lab.solver import SolverConfig, TrajectoryRecord, profile_rhs
from resonance_lab.spectral import SpectralField, sobolev_norm, sup_norm, weighted_norm
from resonance_lab.symbols import MultiplierSymbol, SymbolCategory, symbol_registry
from resonance_lab.resonance import phase2

logger = logging.getLogger(__name__)

XNORM_COMPONENTS = ("fhat_sup", "l2", "x1", "x2_over_log", "x3_over_t_alpha", "decay_sup", "sobolev")
MIN_FIT_POINTS = 8
MIN_FIT_DECADES = 1.5


class ProfileState(BaseModel):
    """Decomposition of the profile at one time"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: float
    fhat: SpectralField
    f1hat: SpectralField
    fstar_hat: SpectralField
    ghat: SpectralField
    hhat: SpectralField
    prefactor: complex = Field(description="Duhamel prefactor c in f = f1 + c B")

    def reconstruction_error(self) -> float:
        """sup |f_hat - f1_hat - c (f* + g + h)| relative to sup |f_hat|"""
        rebuilt = self.f1hat.values + self.prefactor * (
            self.fstar_hat.values + self.ghat.values + self.hhat.values)
        scale = max(float(np.max(np.abs(self.fhat.values))), np.finfo(float).tiny)
        return float(np.max(np.abs(self.fhat.values - rebuilt)) / scale)


class CalibrationResult(BaseModel):
    """Least-squares fit of profile_rhs against the raw Duhamel integrand at t = 1"""
    prefactor: complex = Field(description="Fitted c")
    expected: float = Field(description="alpha (2π)^{-d/2}, the value implied by the transform convention")
    relative_residual: float = Field(description="||rhs - c D|| / ||rhs||")


class XNormReport(BaseModel):
    """The seven X-norm components at one time"""
    t: float
    components: Dict[str, float] = Field(description="Component name -> value")
    total: float = Field(description="Largest component")
    boundary_flags: List[str] = Field(default_factory=list, description="Weighted components truncated by the box")


class GrowthScaling(str, Enum):
    """How a reference exponent carries over to dimension d"""
    FIXED = "fixed"
    DECAY_QUARTER = "decay_quarter"            # -d/4
    DECAY_QUARTER_GAIN = "decay_quarter_gain"  # -(d/4 + 1/4)
    DIMENSION_BOUND = "dimension_bound"        # proved in d = 5 only


class GrowthReference(BaseModel):
    exponent: float = Field(description="Exponent in d = 5")
    scaling: GrowthScaling
    description: str

    def expected(self, dim: int) -> Optional[float]:
        if self.scaling == GrowthScaling.FIXED:
            return self.exponent
        if self.scaling == GrowthScaling.DECAY_QUARTER:
            return -dim / 4.0
        if self.scaling == GrowthScaling.DECAY_QUARTER_GAIN:
            return -(dim / 4.0 + 0.25)
        return self.exponent if dim == 5 else None


class GrowthFit(BaseModel):
    quantity: str
    fit: DecayFit
    expected: Optional[float] = Field(description="Reference exponent in this dimension, None when recorded only")
    recorded_only: bool


GROWTH_REFERENCES: Dict[str, GrowthReference] = {
    "g_x0": GrowthReference(exponent=0.0, scaling=GrowthScaling.FIXED, description="||g||_2 bounded"),
    "g_x1": GrowthReference(exponent=0.0, scaling=GrowthScaling.FIXED, description="||x g||_2 bounded"),
    "g_x2": GrowthReference(exponent=0.0, scaling=GrowthScaling.DIMENSION_BOUND, description="||x^2 g||_2 bounded"),
    "g_x3": GrowthReference(exponent=0.5 + 1.0 / 47.0, scaling=GrowthScaling.DIMENSION_BOUND,
                            description="||x^3 g||_2 <~ t^{1/2+1/47}"),
    "g_decay_sup": GrowthReference(exponent=-1.5, scaling=GrowthScaling.DECAY_QUARTER_GAIN,
                                   description="||e^{-itΔ²} g||_inf <~ t^{-(d/4+1/4)+}"),
    "h_x0": GrowthReference(exponent=0.0, scaling=GrowthScaling.DIMENSION_BOUND, description="||h||_2 bounded"),
    "h_x1": GrowthReference(exponent=0.0, scaling=GrowthScaling.DIMENSION_BOUND, description="||x h||_2 bounded"),
    "h_x2": GrowthReference(exponent=0.0, scaling=GrowthScaling.DIMENSION_BOUND, description="||x^2 h||_2 <~ log t"),
    "h_x3": GrowthReference(exponent=1.0 / 24.0, scaling=GrowthScaling.DIMENSION_BOUND,
                            description="||x^3 h||_2 <~ t^{1/24}"),
    "h_decay_sup": GrowthReference(exponent=-1.25, scaling=GrowthScaling.DECAY_QUARTER,
                                   description="||e^{-itΔ²} h||_inf <~ t^{-d/4}"),
    "bootstrap_g_x3": GrowthReference(exponent=0.5 + 1.0 / 45.0, scaling=GrowthScaling.DIMENSION_BOUND,
                                      description="bootstrap assumption ||x^3 g||_2 <~ t^{1/2+1/45}"),
    "bootstrap_h_x3": GrowthReference(exponent=1.0 / 16.0, scaling=GrowthScaling.DIMENSION_BOUND,
                                      description="bootstrap assumption ||x^3 h||_2 <~ t^{1/16}"),
    "decay_sup": GrowthReference(exponent=0.0, scaling=GrowthScaling.FIXED,
                                 description="t^{d/4} ||u||_inf bounded"),
    "l2": GrowthReference(exponent=0.0, scaling=GrowthScaling.FIXED, description="||f||_2 bounded"),
    "xnorm_total": GrowthReference(exponent=0.0, scaling=GrowthScaling.FIXED, description="X-norm bounded"),
}


def _raw(name: str, f: SpectralField, g: SpectralField, t: float) -> np.ndarray:
    return bilinear_integral(symbol_registry.require(name), f, g, t)


def compute_fstar(f1hat: SpectralField) -> SpectralField:
    """f*_hat = -i integral e^{i phi} / (1 + iZ) f1_hat(xi - eta) f1_hat(eta) d eta"""
    f1hat = f1hat.to_frequency()
    return SpectralField.frequency_field(f1hat.grid, -1j * _raw("fstar_symbol", f1hat, f1hat, 1.0))


def compute_g(fhat: SpectralField, t: float) -> SpectralField:
    """g_hat(t) = i integral e^{it phi} / (1/t + iZ) f_hat f_hat, recomputed for every t"""
    fhat = fhat.to_frequency()
    return SpectralField.frequency_field(fhat.grid, 1j * _raw("g_symbol", fhat, fhat, t))


def compute_h(fhat: SpectralField, f1hat: SpectralField, fstar_hat: SpectralField, ghat: SpectralField,
              prefactor: complex) -> SpectralField:
    """Residual h_hat = (f_hat - f1_hat)/c - f*_hat - g_hat; the first term is dropped when c = 0"""
    duhamel = (fhat.values - f1hat.values) / prefactor if prefactor != 0 else 0.0
    return fhat.with_values(duhamel - fstar_hat.values - ghat.values)


def profile_state(fhat: SpectralField, t: float, f1hat: SpectralField, fstar_hat: SpectralField,
                  prefactor: complex) -> ProfileState:
    fhat, f1hat = fhat.to_frequency(), f1hat.to_frequency()
    ghat = compute_g(fhat, t)
    hhat = compute_h(fhat, f1hat, fstar_hat, ghat, prefactor)
    return ProfileState(t=t, fhat=fhat, f1hat=f1hat, fstar_hat=fstar_hat, ghat=ghat, hhat=hhat,
                        prefactor=prefactor)


def calibrate_duhamel_prefactor(f1hat: SpectralField, cfg: SolverConfig) -> CalibrationResult:
    """
    Fit c in profile_rhs(f1, 1) = c * i * raw(e^{i phi}, f1, f1)

    Returns:
        CalibrationResult; prefactor 0 when the nonlinearity vanishes
    """
    f1hat = f1hat.to_frequency()
    rhs = profile_rhs(f1hat, 1.0, cfg).values.ravel()
    design = (1j * _raw("duhamel_phase", f1hat, f1hat, 1.0)).ravel()
    expected = cfg.alpha_coeff * (2.0 * np.pi) ** (-f1hat.grid.dim / 2.0)
    denominator = np.vdot(design, design)
    if denominator == 0 or not np.any(rhs):
        return CalibrationResult(prefactor=0j, expected=expected, relative_residual=0.0)
    prefactor = complex(np.vdot(design, rhs) / denominator)
    residual = float(np.linalg.norm(rhs - prefactor * design) / np.linalg.norm(rhs))
    logger.info("✓ Duhamel prefactor %.6g%+.2gi (expected %.6g, residual %.2g)",
                prefactor.real, prefactor.imag, expected, residual)
    return CalibrationResult(prefactor=prefactor, expected=expected, relative_residual=residual)


def _modulated(base: str) -> MultiplierSymbol:
    """e^{it phi} times a registered symbol"""
    symbol = symbol_registry.require(base)
    return MultiplierSymbol(
        name=f"{base}_modulated", arity=2,
        evaluate=lambda xi, eta, t: np.exp(1j * t * phase2(xi, eta)) * symbol(xi, eta, t=t),
        description=f"e^{{it phi}} * {symbol.description}", category=SymbolCategory.DUHAMEL,
    )


def h_integrands(record: TrajectoryRecord, index: int) -> Dict[str, np.ndarray]:
    """
    Integrands in s of the four h pieces at checkpoint index

        h1: -i s^{-2} raw(e^{is phi} / A^2, f, f)
        h2: -i [raw(e^{is phi} / A, d_s f, f) + raw(e^{is phi} / A, f, d_s f)]
        h3: g_hat(s) / s
        h4: -raw(e^{is phi} P.grad_eta phi / A, f, f)
    """
    s = record.times[index]
    f = record.profiles[index]
    df = profile_rhs(f, s, record.config)
    over_a = _modulated("one_over_A")
    return {
        "h1": -1j * bilinear_integral(_modulated("one_over_A_squared"), f, f, s) / s ** 2,
        "h2": -1j * (bilinear_integral(over_a, df, f, s) + bilinear_integral(over_a, f, df, s)),
        "h3": compute_g(f, s).values / s,
        "h4": -bilinear_integral(_modulated("P_dphi_over_A"), f, f, s),
    }


def h_components(record: TrajectoryRecord) -> Dict[str, SpectralField]:
    """Simpson time-quadrature of the four h integrands over the recorded checkpoints"""
    rows = [h_integrands(record, i) for i in range(len(record.times))]
    grid = record.profiles[0].grid
    out = {}
    for key in ("h1", "h2", "h3", "h4"):
        stacked = np.stack([row[key] for row in rows])
        out[key] = SpectralField.frequency_field(grid, integrate.simpson(stacked, x=record.times, axis=0))
    return out


class SpotCheck(BaseModel):
    """Agreement of direct h quadrature with the residual h at the last checkpoint"""
    sum_error: float = Field(description="sup |h1+h2+h3+h4 - h_residual| / sup |h_residual|")
    h3_share: float = Field(description="sup |h3| / sup |h_residual|")
    quadrature_error: float = Field(description="Simpson vs trapezoid disagreement of the sum, relative")


def h_spot_check(record: TrajectoryRecord, prefactor: complex) -> SpotCheck:
    """
    Compare the time-quadrature of h1..h4 with the residual h at the final checkpoint

    Needs a nonzero prefactor and densely spaced checkpoints.
    """
    f1hat = record.profiles[0]
    fstar = compute_fstar(f1hat)
    state = profile_state(record.final_profile, record.times[-1], f1hat, fstar, prefactor)
    pieces = h_components(record)
    direct = sum(p.values for p in pieces.values())
    rows = [h_integrands(record, i) for i in range(len(record.times))]
    summed = np.stack([sum(row.values()) for row in rows])
    trapezoid = integrate.trapezoid(summed, x=record.times, axis=0)
    scale = max(float(np.max(np.abs(state.hhat.values))), np.finfo(float).tiny)
    return SpotCheck(
        sum_error=float(np.max(np.abs(direct - state.hhat.values)) / scale),
        h3_share=float(np.max(np.abs(pieces["h3"].values)) / scale),
        quadrature_error=float(np.max(np.abs(direct - trapezoid)) / scale),
    )


def xnorm_report(fhat: SpectralField, t: float) -> XNormReport:
    """
    Components: ||f_hat||_inf, ||f||_2, ||x f||_2, ||x^2 f||_2 / max(log t, 1),
    ||x^3 f||_2 / t^alpha, t^{d/4} ||u||_inf, ||f||_{H^s}
    """
    fhat = fhat.to_frequency()
    f = fhat.to_physical()
    dim = fhat.grid.dim
    weighted = {k: weighted_norm(f, k, 2.0) for k in (1, 2, 3)}
    components = {
        "fhat_sup": float(np.max(np.abs(fhat.values))),
        "l2": fhat.l2_norm(),
        "x1": weighted[1].value,
        "x2_over_log": weighted[2].value / max(np.log(t), 1.0),
        "x3_over_t_alpha": weighted[3].value / t ** settings.XNORM_ALPHA,
        "decay_sup": t ** (dim / 4.0) * sup_norm(evolve_linear(fhat, -t)),
        "sobolev": sobolev_norm(fhat, settings.SOBOLEV_INDEX),
    }
    flags = [name for name, k in (("x1", 1), ("x2_over_log", 2), ("x3_over_t_alpha", 3))
             if weighted[k].boundary_flagged]
    for name in flags:
        logger.warning("⚠️ X-norm component %s at t=%.4g is truncated by the box", name, t)
    return XNormReport(t=t, components=components, total=max(components.values()), boundary_flags=flags)


def fit_growth_exponents(times: Sequence[float], values: Sequence[float], quantity: str,
                         dim: int) -> GrowthFit:
    """
    Fit the growth exponent of a monitored quantity and attach its reference

    Series with fewer than 8 points or under 1.5 decades are flagged untrusted.
    """
    if quantity not in GROWTH_REFERENCES:
        raise KeyError(f"no growth reference for '{quantity}'")
    fit = fit_power_law(times, values, skip_decades=0.0)
    span = np.log10(times[-1] / times[0]) if len(times) > 1 else 0.0
    if len(times) < MIN_FIT_POINTS or span < MIN_FIT_DECADES:
        fit = fit.model_copy(update={
            "trusted": False,
            "notes": fit.notes + [f"{len(times)} points over {span:.2f} decades is below the span rule"],
        })
    reference = GROWTH_REFERENCES[quantity]
    expected = reference.expected(dim)
    return GrowthFit(quantity=quantity, fit=fit, expected=expected, recorded_only=expected is None)


def monitor_trajectory(record: TrajectoryRecord, prefactor: complex) -> List[Dict[str, float]]:
    """
    One CSV row per checkpoint: t, X-norm components, ||x^k g||_2 and ||x^k h||_2 for k = 0..3,
    sup |e^{-itΔ²} g|, sup |e^{-itΔ²} h|, total X-norm and the reconstruction error
    """
    f1hat = record.profiles[0]
    fstar = compute_fstar(f1hat)
    rows = []
    for t, fhat in zip(record.times, record.profiles):
        state = profile_state(fhat, t, f1hat, fstar, prefactor)
        report = xnorm_report(fhat, t)
        row: Dict[str, float] = {"t": t, **report.components, "xnorm_total": report.total}
        for label, piece in (("g", state.ghat), ("h", state.hhat)):
            physical = piece.to_physical()
            for k in range(4):
                row[f"{label}_x{k}"] = weighted_norm(physical, k, 2.0).value
            row[f"{label}_decay_sup"] = sup_norm(evolve_linear(piece, -t))
        row["reconstruction_error"] = state.reconstruction_error()
        rows.append(row)
    logger.info("✓ monitored %d checkpoints", len(rows))
    return rows
