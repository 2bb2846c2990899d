import logging

import numpy as np

from resonance_lab.models import DataRecipe, StudyOutcome, StudySpec, StudyName
from resonance_lab.propagator import (
    NormKind,
    banded_times,
    measure_band_prefactors,
    measure_banded_decay,
    measure_linear_decay,
    phase_gradient,
    reliable_window,
    rho_sup,
    stationary_point,
)
from .base_study import BaseStudy, StudySchema

logger = logging.getLogger(__name__)

# (n_per_axis, box_length) per dimension; other dimensions run the coarse recorded variant
LINEAR_GRIDS = {1: (16384, 4096.0), 2: (1024, 4096.0)}
COARSE_GRID = (16, 64.0)
LINEAR_TOLERANCE = {1: 0.03, 2: 0.05}
RHO_TIMES = (10.0, 1000.0, 5)
RHO_POSITIONS = np.linspace(-3.0, 3.0, 13)
STATIONARY_SAMPLES = 10_000


class LinearDecayStudy(BaseStudy):
    """Sup-norm decay of the free flow, stationary-point accuracy and the rho kernel envelope"""

    def _setup_schema(self) -> None:
        self.schema = StudySchema(
            name=StudyName.LINEAR_DECAY.value,
            display_name="Linear Dispersive Decay",
            description="Fit ||e^{itΔ²} u0||_inf against t^{-d/4} inside the wrap-around safe window",
            defaults={
                "recipe": DataRecipe.BAND_LIMITED.value, "width": 0.5, "t_min": 10.0, "t_max": 1000.0,
                "time_count": 17, "grid_1d": list(LINEAR_GRIDS[1]), "grid_2d": list(LINEAR_GRIDS[2]),
            },
            checks=["sup_slope", "l2_conservation", "stationary_point", "rho_envelope"],
            columns=["t", "sup", "l2", "reliable"],
        )

    def run(self, spec: StudySpec, rng: np.random.Generator) -> StudyOutcome:
        coarse = spec.dim not in LINEAR_GRIDS
        grid = self.grid_for(spec, *LINEAR_GRIDS.get(spec.dim, COARSE_GRID))
        initial = self.initial_data(spec, grid, rng, width=0.5, recipe=DataRecipe.BAND_LIMITED)
        times = self.times(spec, 10.0, 1000.0)
        logger.info("linear decay d=%d on N=%d L=%g over t in [%g, %g]",
                    spec.dim, grid.n_per_axis, grid.box_length, times[0], times[-1])

        sup_fit = measure_linear_decay(initial, times, NormKind.SUP, skip_decades=1.0 if not coarse else 0.0)
        l2_fit = measure_linear_decay(initial, times, NormKind.L2)
        limit, flags = reliable_window(initial, times)
        expected = spec.expected_slope if spec.expected_slope is not None else -spec.dim / 4.0
        tolerance = spec.tolerance or LINEAR_TOLERANCE.get(spec.dim, 0.05)

        checks = [
            self.slope_check("sup_slope", sup_fit, expected, tolerance, recorded=coarse),
            self.bound_check("l2_conservation", abs(l2_fit.slope), 1e-8, "free flow is unitary"),
            self._stationary_check(spec.dim, rng),
        ]
        summary = {
            "sup_slope": sup_fit.slope, "sup_intercept": sup_fit.intercept, "fit_start": sup_fit.fit_start,
            "max_residual": sup_fit.max_residual, "l2_slope": l2_fit.slope, "reliable_time": limit,
            "grid": {"n_per_axis": grid.n_per_axis, "box_length": grid.box_length},
        }
        if spec.dim == 1:
            envelope = self._rho_envelope()
            summary["rho_envelope"] = envelope
            spread = max(envelope.values()) / min(envelope.values())
            checks.append(self.bound_check("rho_envelope", spread, 3.0, "max/min of t^{1/4} sup|rho| over t"))

        rows = self.rows_from_series(
            t=times, sup=sup_fit.norms, l2=l2_fit.norms,
            reliable=[float(flag) for flag in flags],
        )
        return StudyOutcome(study=StudyName.LINEAR_DECAY, checks=checks, rows=rows, summary=summary)

    def _stationary_check(self, dim: int, rng: np.random.Generator):
        """Relative |grad phi_{t,x}(xi*)| over random positions and log-uniform times in [1, 1000]"""
        x = rng.standard_normal((STATIONARY_SAMPLES, dim)) * 100.0
        t = 10.0 ** rng.uniform(0.0, 3.0, size=(STATIONARY_SAMPLES, 1))
        # phi_{t,x} depends on x and t only through x / t
        xi = stationary_point(x / t, 1.0)
        residual = np.linalg.norm(phase_gradient(xi, x / t, 1.0), axis=-1)
        scale = np.linalg.norm(x / t, axis=-1)
        worst = float(np.max(residual / np.where(scale > 0, scale, 1.0)))
        return self.bound_check("stationary_point", worst, 1e-9, f"{STATIONARY_SAMPLES} random (x, t)")

    @staticmethod
    def _rho_envelope() -> dict:
        lo, hi, count = RHO_TIMES
        return {float(t): rho_sup(float(t), RHO_POSITIONS) * t ** 0.25 for t in np.geomspace(lo, hi, count)}


class BandedDecayStudy(BaseStudy):
    """Decay of single dyadic bands: t^{-d/2} in time and 2^{-dj} in frequency"""

    def _setup_schema(self) -> None:
        self.schema = StudySchema(
            name=StudyName.BANDED_DECAY.value,
            display_name="Band-Limited Decay",
            description="Fit sup |e^{itΔ²} phi_j| against t^{-d/2} per band and compare 2^{dj}-scaled prefactors",
            defaults={"bands": [1, 2, 3], "time_count": 10, "dimensionless_window": [16.0, 160.0]},
            checks=[f"slope_j{j}" for j in (1, 2, 3)] + ["prefactor_spread"],
            columns=["j", "t", "sup", "t_scaled"],
        )

    def run(self, spec: StudySpec, rng: np.random.Generator) -> StudyOutcome:
        expected = spec.expected_slope if spec.expected_slope is not None else -spec.dim / 2.0
        tolerance = spec.tolerance or 0.05
        count = self.option(spec, "time_count", 10)
        checks, rows, slopes = [], [], {}
        for j in spec.bands:
            times = np.asarray(spec.times, dtype=float) if spec.times else banded_times(j, count)
            fit = measure_banded_decay(j, spec.dim, times)
            slopes[j] = fit.slope
            checks.append(self.slope_check(f"slope_j{j}", fit, expected, tolerance))
            rows.extend({"j": float(j), "t": t, "sup": n, "t_scaled": t * 2.0 ** (4 * j)}
                        for t, n in zip(fit.times, fit.norms))
            logger.info("✓ band j=%d slope %.4f", j, fit.slope)

        prefactors = measure_band_prefactors(spec.bands, spec.dim)
        spread = max(prefactors.values()) / min(prefactors.values())
        checks.append(self.bound_check("prefactor_spread", spread, 3.0, "max/min of 2^{dj} sup at t = 1"))
        summary = {"slopes": slopes, "prefactors": prefactors, "expected_slope": expected}
        return StudyOutcome(study=StudyName.BANDED_DECAY, checks=checks, rows=rows, summary=summary)
