from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from resonance_lab.models import CheckResult, DataRecipe, StudyOutcome, StudySpec, Verdict
from resonance_lab.propagator import DecayFit, band_limited_bump
from resonance_lab.spectral import Grid, SpectralField, gaussian_field, random_smooth_field


class StudySchema(BaseModel):
    """Description of a study for listings and the service"""
    name: str = Field(..., description="Study name (kebab-case)")
    display_name: str = Field(..., description="Human-readable name")
    description: str = Field(..., description="What this study measures")
    defaults: Dict[str, Any] = Field(default_factory=dict, description="Spec defaults applied by the study")
    checks: List[str] = Field(default_factory=list, description="Checks reported in summary.json")
    columns: List[str] = Field(default_factory=list, description="data.csv columns")


class BaseStudy(ABC):
    """Base class for all studies"""

    def __init__(self):
        self.schema: Optional[StudySchema] = None
        self._setup_schema()

    @abstractmethod
    def _setup_schema(self) -> None:
        """Override this to define the study schema"""

    @abstractmethod
    def run(self, spec: StudySpec, rng: np.random.Generator) -> StudyOutcome:
        """Override this to implement the study"""

    def get_schema(self) -> Dict[str, Any]:
        if not self.schema:
            raise NotImplementedError("Schema not defined")
        return self.schema.model_dump()

    @staticmethod
    def times(spec: StudySpec, t_min: float, t_max: float, count: Optional[int] = None) -> np.ndarray:
        """Explicit spec times, or a log-spaced series with spec overrides of the study defaults"""
        if spec.times:
            return np.asarray(sorted(spec.times), dtype=float)
        lo = spec.t_min if spec.t_min is not None else t_min
        hi = spec.t_max if spec.t_max is not None else t_max
        return np.geomspace(lo, hi, count or spec.time_count)

    @staticmethod
    def slope_check(name: str, fit: DecayFit, expected: float, tolerance: float,
                    recorded: bool = False) -> CheckResult:
        """PASS when |slope - expected| <= tolerance on a trusted fit"""
        deviation = abs(fit.slope - expected)
        if recorded:
            verdict = Verdict.RECORDED
        elif not fit.trusted:
            verdict = Verdict.UNTRUSTED
        else:
            verdict = Verdict.PASS if deviation <= tolerance else Verdict.FAIL
        return CheckResult(name=name, verdict=verdict, measured=fit.slope, expected=expected,
                           tolerance=tolerance, detail="; ".join(fit.notes))

    @staticmethod
    def bound_check(name: str, measured: float, limit: float, detail: str = "",
                    recorded: bool = False) -> CheckResult:
        """PASS when measured <= limit"""
        if recorded:
            verdict = Verdict.RECORDED
        elif not np.isfinite(measured):
            verdict = Verdict.UNTRUSTED
        else:
            verdict = Verdict.PASS if measured <= limit else Verdict.FAIL
        return CheckResult(name=name, verdict=verdict, measured=float(measured), expected=limit, detail=detail)

    @staticmethod
    def recorded(name: str, measured: float, detail: str = "") -> CheckResult:
        return CheckResult(name=name, verdict=Verdict.RECORDED, measured=float(measured), detail=detail)

    @staticmethod
    def rows_from_series(**columns: Sequence[float]) -> List[Dict[str, Any]]:
        """Zip equal-length columns into CSV rows"""
        names = list(columns)
        return [dict(zip(names, map(float, values))) for values in zip(*columns.values())]

    @staticmethod
    def option(spec: StudySpec, field: str, default: Any) -> Any:
        """The StudySpec value when it was set explicitly, otherwise the study default"""
        return getattr(spec, field) if field in spec.model_fields_set else default

    def grid_for(self, spec: StudySpec, n_per_axis: int, box_length: float) -> Grid:
        return Grid(
            dim=spec.dim,
            n_per_axis=spec.n_per_axis or n_per_axis,
            box_length=spec.box_length or box_length,
        )

    def initial_data(self, spec: StudySpec, grid: Grid, rng: np.random.Generator,
                     width: float, amplitude: float = 1.0,
                     recipe: DataRecipe = DataRecipe.GAUSSIAN) -> SpectralField:
        """Data from the StudySpec recipe; width is a Gaussian width or a spectral bandwidth"""
        width = self.option(spec, "width", width)
        amplitude = self.option(spec, "amplitude", amplitude)
        recipe = self.option(spec, "recipe", recipe)
        if recipe == DataRecipe.BAND_LIMITED:
            return band_limited_bump(grid, width, amplitude)
        if recipe == DataRecipe.RANDOM:
            return random_smooth_field(grid, rng, width, amplitude)
        return gaussian_field(grid, width, amplitude).to_frequency()
