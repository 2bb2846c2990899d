"""
Nonlinear solver: RK4 on the profile equation and an independent Strang split-step oracle

Profile convention (the default): with u = e^{-itΔ²} f,
    i u_t = Δ² u - N(u),   N(u) = alpha u^2 + beta conj(u)^2,
    d/dt f_hat = i e^{it|xi|^4} N_hat.
Abstract convention: i u_t + Δ² u + N(u) = 0. It is solved through w = -conj(u),
which obeys the profile-convention equation with the same real coefficients;
records then hold the profile of w and map back with u = -conj(w).
"""

import logging
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from resonance_lab.config import settings
from resonance_lab.errors import BlowUpError, UsageError
from resonance_lab.propagator import evolve_linear
from resonance_lab.spectral import Grid, Space, SpectralField, sup_norm, transform

logger = logging.getLogger(__name__)

MIN_STEP = 1e-8
DEFAULT_INITIAL_STEP = 1e-2


class SignConvention(str, Enum):
    """Which sign convention the data and outputs are given in"""
    PROFILE = "profile"
    ABSTRACT = "abstract"


class SolverConfig(BaseModel):
    """Coefficients, time span, stepping and checkpoints of one run"""

    model_config = ConfigDict(frozen=True)

    grid: Grid
    alpha_coeff: float = Field(default=1.0, description="Coefficient of u^2")
    beta_coeff: float = Field(default=0.0, description="Coefficient of conj(u)^2")
    t_start: float = Field(default=1.0, gt=0.0, description="Initial time (data given at t = 1)")
    t_end: float = Field(default=10.0, description="Final time")
    dt: Optional[float] = Field(default=None, gt=0.0, description="Fixed step; None selects adaptive stepping")
    initial_dt: float = Field(default=DEFAULT_INITIAL_STEP, gt=0.0, description="First adaptive step")
    change_tolerance: float = Field(
        default_factory=lambda: settings.ADAPTIVE_CHANGE_TOLERANCE,
        gt=0.0, description="Relative profile change per step that triggers halving",
    )
    dealias: bool = Field(default=True, description="Apply the 2/3 rule to quadratic products")
    sign: SignConvention = Field(default=SignConvention.PROFILE)
    checkpoints: List[float] = Field(default_factory=list, description="Times to record; log-spaced when empty")
    checkpoint_count: int = Field(default=16, ge=2, description="Number of log-spaced checkpoints")

    @model_validator(mode="after")
    def _check_span(self) -> "SolverConfig":
        if self.t_end <= self.t_start:
            raise ValueError(f"t_end={self.t_end} must exceed t_start={self.t_start}")
        if any(not self.t_start <= c <= self.t_end for c in self.checkpoints):
            raise ValueError("checkpoints must lie within [t_start, t_end]")
        return self

    @property
    def adaptive(self) -> bool:
        return self.dt is None

    def checkpoint_times(self) -> List[float]:
        """Sorted checkpoints starting at t_start and ending at t_end"""
        base = self.checkpoints or np.geomspace(self.t_start, self.t_end, self.checkpoint_count).tolist()
        return sorted(set([self.t_start, *[float(c) for c in base], self.t_end]))

    def step_cap(self, t: float) -> float:
        return 0.01 * (1.0 + t)


class TrajectoryRecord(BaseModel):
    """Profiles and running norms at the checkpoints of one run"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: SolverConfig
    method: str = Field(description="profile-rk4 or split-step")
    times: List[float] = Field(default_factory=list)
    profiles: List[SpectralField] = Field(default_factory=list, description="Frequency-space profiles")
    sup_u: List[float] = Field(default_factory=list, description="sup |u(t)|")
    l2: List[float] = Field(default_factory=list, description="||f(t)||_2")
    steps: int = Field(default=0, description="Accepted steps")
    rejected_steps: int = Field(default=0, description="Halvings in adaptive mode")

    def record(self, t: float, fhat: SpectralField) -> None:
        u = evolve_linear(fhat, -t)
        self.times.append(float(t))
        self.profiles.append(fhat)
        self.sup_u.append(sup_norm(u))
        self.l2.append(fhat.l2_norm())

    def solution_at(self, index: int) -> SpectralField:
        """u at checkpoint index, physical space, in the configured sign convention"""
        u = evolve_linear(self.profiles[index], -self.times[index]).to_physical()
        if self.config.sign == SignConvention.ABSTRACT:
            return u.with_values(-np.conj(u.values))
        return u

    @property
    def final_profile(self) -> SpectralField:
        return self.profiles[-1]


def _nonlinearity(u: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    out = cfg.alpha_coeff * u * u
    if cfg.beta_coeff:
        conj = np.conj(u)
        out = out + cfg.beta_coeff * conj * conj
    return out


def profile_rhs(fhat: SpectralField, t: float, cfg: SolverConfig) -> SpectralField:
    """
    i e^{it|xi|^4} F[alpha u^2 + beta conj(u)^2] with u_hat = e^{-it|xi|^4} f_hat

    Raises:
        UsageError: If fhat is not a frequency-space field
        BlowUpError: If the result is not finite
    """
    if fhat.space != Space.FREQUENCY:
        raise UsageError("profile_rhs expects a frequency-space profile")
    grid = fhat.grid
    if cfg.alpha_coeff == 0.0 and cfg.beta_coeff == 0.0:
        return SpectralField.zeros(grid)
    phase = np.exp(1j * t * grid.k_fourth)
    uhat = fhat.values / phase
    if cfg.dealias:
        uhat = uhat * grid.dealias_mask
    u = transform(SpectralField.frequency_field(grid, uhat), "inverse")
    nhat = transform(u.with_values(_nonlinearity(u.values, cfg)), "forward").values
    if cfg.dealias:
        nhat = nhat * grid.dealias_mask
    rhs = 1j * phase * nhat
    if not np.all(np.isfinite(rhs)):
        raise BlowUpError("profile right-hand side is not finite", time=t)
    return SpectralField.frequency_field(grid, rhs)


def _rk4_step(fhat: SpectralField, t: float, h: float, cfg: SolverConfig) -> SpectralField:
    k1 = profile_rhs(fhat, t, cfg)
    k2 = profile_rhs(fhat + k1 * (h / 2.0), t + h / 2.0, cfg)
    k3 = profile_rhs(fhat + k2 * (h / 2.0), t + h / 2.0, cfg)
    k4 = profile_rhs(fhat + k3 * h, t + h, cfg)
    return fhat.with_values(fhat.values + (h / 6.0) * (k1.values + 2.0 * k2.values + 2.0 * k3.values + k4.values))


def _uniform_steps(span: float, dt: float) -> List[float]:
    count = max(1, int(np.ceil(span / dt - 1e-9)))
    return [span / count] * count


def _check_finite(fhat: SpectralField, t: float, record: TrajectoryRecord) -> None:
    peak = float(np.max(np.abs(fhat.values)))
    if not np.isfinite(peak) or peak > settings.BLOWUP_THRESHOLD:
        logger.error("❌ blow-up at t=%.6g (max |f_hat| = %.3g)", t, peak)
        raise BlowUpError("profile left the finite range", time=t, partial=record)


def _to_convention(field: SpectralField, cfg: SolverConfig, t: float) -> SpectralField:
    """Profile used internally: the given one, or that of w = -conj(u) in the abstract convention"""
    fhat = field.to_frequency()
    if cfg.sign == SignConvention.PROFILE:
        return fhat
    u = evolve_linear(fhat, -t).to_physical()
    return evolve_linear(u.with_values(-np.conj(u.values)), t).to_frequency()


def _dealiased(fhat: SpectralField, cfg: SolverConfig) -> SpectralField:
    """Initial profile restricted to the 2/3 band when dealiasing"""
    if not cfg.dealias:
        return fhat
    return fhat.with_values(fhat.values * fhat.grid.dealias_mask)


def _warn_if_large(fhat: SpectralField) -> None:
    size = max(float(np.max(np.abs(fhat.values))), fhat.l2_norm())
    if size > settings.SMALL_DATA_THRESHOLD:
        logger.warning("⚠️ initial data size %.3g exceeds the small-data threshold %.3g",
                       size, settings.SMALL_DATA_THRESHOLD)


def _march(f0: SpectralField, cfg: SolverConfig, method: str,
           step: Callable[[SpectralField, float, float], SpectralField]) -> TrajectoryRecord:
    """Shared checkpoint loop: fixed uniform steps per interval or adaptive halving/doubling"""
    if f0.grid.key != cfg.grid.key:
        raise UsageError("initial data and SolverConfig live on different grids")
    record = TrajectoryRecord(config=cfg, method=method)
    t = cfg.t_start
    fhat = f0
    record.record(t, fhat)
    dt = cfg.dt if cfg.dt is not None else cfg.initial_dt
    for target in cfg.checkpoint_times()[1:]:
        if not cfg.adaptive:
            for h in _uniform_steps(target - t, dt):
                fhat = step(fhat, t, h)
                t += h
                record.steps += 1
                _check_finite(fhat, t, record)
            t = target
        else:
            while t < target - 1e-12:
                h = min(dt, cfg.step_cap(t), target - t)
                candidate = step(fhat, t, h)
                _check_finite(candidate, t + h, record)
                scale = fhat.l2_norm()
                change = (candidate - fhat).l2_norm() / scale if scale > 0 else 0.0
                if change > cfg.change_tolerance and h > MIN_STEP:
                    dt = h / 2.0
                    record.rejected_steps += 1
                    continue
                fhat, t = candidate, t + h
                record.steps += 1
                if change < cfg.change_tolerance / 4.0 and h == dt:
                    dt = min(2.0 * dt, cfg.step_cap(t))
            t = target
        record.record(t, fhat)
        logger.debug("checkpoint t=%.6g after %d steps", t, record.steps)
    logger.info("✓ %s reached t=%.6g in %d steps (%d rejected)", method, t, record.steps, record.rejected_steps)
    return record


def integrate_profile(f1: SpectralField, cfg: SolverConfig) -> TrajectoryRecord:
    """
    Classical RK4 on d/dt f_hat = profile_rhs from t_start to t_end

    Args:
        f1: Profile at t_start (u(t_start) = e^{-i t_start Δ²} f1)
        cfg: Solver configuration

    Returns:
        TrajectoryRecord with a profile at every checkpoint

    Raises:
        BlowUpError: With the partial record attached
    """
    fhat = _dealiased(_to_convention(f1, cfg, cfg.t_start), cfg)
    _warn_if_large(fhat)
    return _march(fhat, cfg, "profile-rk4", lambda f, t, h: _rk4_step(f, t, h, cfg))


def _nonlinear_substep(u: np.ndarray, h: float, cfg: SolverConfig) -> np.ndarray:
    """One RK4 step of the pointwise flow u_t = i N(u)"""
    def rate(v: np.ndarray) -> np.ndarray:
        return 1j * _nonlinearity(v, cfg)

    k1 = rate(u)
    k2 = rate(u + 0.5 * h * k1)
    k3 = rate(u + 0.5 * h * k2)
    k4 = rate(u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def split_step_oracle(u1: SpectralField, cfg: SolverConfig) -> TrajectoryRecord:
    """
    Strang splitting of i u_t = Δ² u - N(u): half nonlinear, full linear, half nonlinear

    Args:
        u1: Solution at t_start in the configured sign convention
        cfg: Solver configuration; adaptive configs run with the fixed step initial_dt

    Returns:
        TrajectoryRecord holding profiles e^{itΔ²}u, comparable with integrate_profile
    """
    grid = u1.grid
    u = u1.to_physical()
    if cfg.sign == SignConvention.ABSTRACT:
        u = u.with_values(-np.conj(u.values))
    fixed = cfg if cfg.dt is not None else cfg.model_copy(update={"dt": cfg.initial_dt})
    mask = grid.dealias_mask if cfg.dealias else None

    def filtered(values: np.ndarray) -> np.ndarray:
        if mask is None:
            return values
        spectrum = transform(SpectralField.physical(grid, values), "forward")
        return transform(spectrum.with_values(spectrum.values * mask), "inverse").values

    def step(fhat: SpectralField, t: float, h: float) -> SpectralField:
        v = evolve_linear(fhat, -t).to_physical().values
        v = filtered(_nonlinear_substep(v, h / 2.0, cfg))
        vhat = transform(SpectralField.physical(grid, v), "forward")
        vhat = vhat.with_values(vhat.values * np.exp(-1j * h * grid.k_fourth))
        v = filtered(_nonlinear_substep(transform(vhat, "inverse").values, h / 2.0, cfg))
        return evolve_linear(SpectralField.physical(grid, v), t + h).to_frequency()

    f0 = _dealiased(evolve_linear(u, cfg.t_start).to_frequency(), cfg)
    return _march(f0, fixed, "split-step", step)
