"""
Pydantic models shared by the study runner, the CLI and the service
Study specs are flat key=value documents validated into StudySpec
"""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, Field, field_validator, model_validator

from resonance_lab.config import settings
from resonance_lab.solver import SignConvention


class Verdict(str, Enum):
    """Outcome of one check"""
    PASS = "PASS"
    FAIL = "FAIL"
    UNTRUSTED = "UNTRUSTED"
    RECORDED = "RECORDED"  # measured and reported, never asserted


class StudyName(str, Enum):
    """Named studies"""
    LINEAR_DECAY = "linear-decay"
    BANDED_DECAY = "banded-decay"
    RESONANCE_AUDIT = "resonance-audit"
    OPERATOR_SUITE = "operator-suite"
    NONLINEAR_SCATTER = "nonlinear-scatter"
    PROFILE_MONITOR = "profile-monitor"


class DataRecipe(str, Enum):
    """How initial data is generated"""
    GAUSSIAN = "gaussian"
    BAND_LIMITED = "band_limited"
    RANDOM = "random"


# Studies that run frequency-side bilinear quadrature on the study grid
BILINEAR_STUDIES = {StudyName.OPERATOR_SUITE, StudyName.NONLINEAR_SCATTER, StudyName.PROFILE_MONITOR}
LIST_FIELDS = ("times", "bands")


class StudySpec(BaseModel):
    """Complete, seed-determined description of one study run"""

    name: StudyName = Field(..., description="Study to run")
    dim: int = Field(default=1, ge=1, le=5, description="Spatial dimension")
    n_per_axis: Optional[int] = Field(default=None, description="Grid points per axis; study default when omitted")
    box_length: Optional[float] = Field(default=None, gt=0.0, description="Box period L; study default when omitted")
    times: List[float] = Field(default_factory=list, description="Explicit measurement times")
    t_min: Optional[float] = Field(default=None, gt=0.0, description="First time of a log-spaced series")
    t_max: Optional[float] = Field(default=None, gt=0.0, description="Last time of a log-spaced series")
    time_count: int = Field(default=17, ge=2, description="Points in a log-spaced series")
    recipe: DataRecipe = Field(default=DataRecipe.GAUSSIAN, description="Initial data recipe")
    amplitude: float = Field(default=1.0, gt=0.0, description="Data size (delta for nonlinear runs)")
    width: float = Field(default=1.0, gt=0.0, description="Gaussian width or spectral bandwidth")
    bands: List[int] = Field(default_factory=lambda: [1, 2, 3], description="Dyadic bands for banded studies")
    samples: int = Field(default=100_000, ge=1, description="Sample budget for audits and probes")
    alpha_coeff: float = Field(default=1.0, description="Coefficient of u^2")
    beta_coeff: float = Field(default=0.0, description="Coefficient of conj(u)^2")
    dt: Optional[float] = Field(default=None, gt=0.0, description="Fixed step; adaptive when omitted")
    checkpoint_count: int = Field(default=16, ge=2, description="Log-spaced solver checkpoints")
    sign: SignConvention = Field(default=SignConvention.PROFILE, description="Sign convention of the data")
    expected_slope: Optional[float] = Field(default=None, description="Override of the reference slope")
    tolerance: Optional[float] = Field(default=None, gt=0.0, description="Override of the slope tolerance")
    smoke: bool = Field(default=False, description="Coarse 5-D smoke mode, every verdict recorded")
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, description="64-bit seed for all randomness")

    @field_validator(*LIST_FIELDS, mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("n_per_axis")
    @classmethod
    def _power_of_two(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and (value < 2 or value & (value - 1)):
            raise ValueError(f"n_per_axis must be a power of two >= 2, got {value}")
        return value

    @model_validator(mode="after")
    def _check_budgets(self) -> "StudySpec":
        if self.n_per_axis is not None:
            points = self.n_per_axis ** self.dim
            if points > settings.MAX_GRID_POINTS:
                raise ValueError(
                    f"grid of {points} points exceeds MAX_GRID_POINTS={settings.MAX_GRID_POINTS}; "
                    f"lower --grid or --dim"
                )
            if self.name in BILINEAR_STUDIES and not self.smoke_mode:
                limit = settings.bilinear_limit(self.dim)
                if self.n_per_axis > limit:
                    hint = f"use --grid {limit} or smaller" if limit else "bilinear quadrature needs dim <= 2"
                    raise ValueError(f"{self.name.value} in d={self.dim} exceeds the bilinear budget; {hint}")
        if self.smoke and self.name != StudyName.NONLINEAR_SCATTER:
            raise ValueError("smoke mode exists only for nonlinear-scatter")
        if self.t_min is not None and self.t_max is not None and self.t_max <= self.t_min:
            raise ValueError(f"t_max={self.t_max} must exceed t_min={self.t_min}")
        if any(t <= 0 for t in self.times):
            raise ValueError("times must be positive")
        return self

    @classmethod
    def from_config(cls, path: Union[str, Path], **overrides: Any) -> "StudySpec":
        """
        Load a flat key=value study document and apply overrides

        Keys are case-insensitive, empty values are dropped and comma-separated
        values become lists.

        Raises:
            FileNotFoundError: If the file does not exist
            pydantic.ValidationError: If the result does not validate
        """
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"study config not found: {path}")
        raw = {key.lower(): value for key, value in dotenv_values(path).items() if value not in (None, "")}
        raw.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**raw)

    @property
    def smoke_mode(self) -> bool:
        """Coarse 5-D variant: requested explicitly or implied by nonlinear-scatter in d >= 3"""
        return self.smoke or (self.name == StudyName.NONLINEAR_SCATTER and self.dim >= 3)

    def config_payload(self) -> Dict[str, Any]:
        """Plain JSON-able form used for hashing and manifests"""
        return self.model_dump(mode="json")


class CheckResult(BaseModel):
    """One named check inside a study"""
    name: str = Field(description="Check name")
    verdict: Verdict
    measured: Optional[float] = Field(default=None, description="Measured value")
    expected: Optional[float] = Field(default=None, description="Reference value")
    tolerance: Optional[float] = Field(default=None, description="Allowed deviation")
    detail: str = Field(default="", description="Human-readable context")


def overall_verdict(checks: List[CheckResult]) -> Verdict:
    """FAIL dominates UNTRUSTED, which dominates PASS; RECORDED counts as PASS"""
    verdicts = {check.verdict for check in checks}
    if Verdict.FAIL in verdicts:
        return Verdict.FAIL
    if Verdict.UNTRUSTED in verdicts:
        return Verdict.UNTRUSTED
    return Verdict.PASS


EXIT_CODES = {Verdict.PASS: 0, Verdict.FAIL: 2, Verdict.UNTRUSTED: 3}
EXIT_INVALID_SPEC = 1


class StudyOutcome(BaseModel):
    """Everything a study produced: CSV rows, checks and a JSON-able summary"""
    study: StudyName
    checks: List[CheckResult] = Field(default_factory=list)
    rows: List[Dict[str, Any]] = Field(default_factory=list, description="data.csv rows")
    summary: Dict[str, Any] = Field(default_factory=dict, description="Study-specific measurements")
    prefactor: Optional[List[float]] = Field(default=None, description="Calibrated Duhamel prefactor (re, im)")

    @property
    def verdict(self) -> Verdict:
        return overall_verdict(self.checks)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]


class FitVerdict(BaseModel):
    """Result of fit_and_verdict"""
    verdict: Verdict
    slope: Optional[float] = Field(default=None, description="Fitted log-log slope")
    intercept: Optional[float] = Field(default=None, description="Fitted log value at t = 1")
    rows: int = Field(description="Rows read")
    expected_slope: float
    tolerance: float
    notes: List[str] = Field(default_factory=list)


# ===== Service models =====

class HealthCheckResponse(BaseModel):
    """Response for health check endpoint"""
    status: str = Field(description="Application status (healthy)")
    version: str = Field(description="Application version")
    studies_available: int = Field(description="Number of registered studies")
    symbols_available: int = Field(description="Number of registered multiplier symbols")


class FitRequest(BaseModel):
    """Request body for fitting a posted series"""
    times: List[float] = Field(..., description="Strictly increasing positive times")
    values: List[float] = Field(..., description="Positive values, same length as times")
    expected_slope: float = Field(..., description="Reference slope")
    tolerance: float = Field(default=0.05, gt=0.0, description="Allowed slope deviation")


class StudyRunResponse(BaseModel):
    """Response for a study run"""
    study: str = Field(description="Study name")
    verdict: Verdict = Field(description="Overall verdict")
    exit_code: int = Field(description="CLI-equivalent exit code")
    checks: List[CheckResult]
    summary: Dict[str, Any]
    processing_time_seconds: float = Field(description="Wall time of the run")


class ErrorResponse(BaseModel):
    """Response for error cases"""
    error: str = Field(description="Error type/title")
    detail: Optional[str] = Field(default=None, description="Detailed error message")
    timestamp: str = Field(description="ISO format timestamp of error")
