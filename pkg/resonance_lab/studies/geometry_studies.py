import logging
from typing import List

import numpy as np

from resonance_lab.models import CheckResult, StudyName, StudyOutcome, StudySpec
from resonance_lab.resonance import (
    Z_DUAL_TOLERANCE,
    ResonanceAudit,
    audit_resonance_sets,
    audit_trilinear_bounds,
    audit_z_lower_bound,
    completed_square_discrepancy,
    phase_hessian,
    sample_homogeneity_error,
    z_quantity,
)
from .base_study import BaseStudy, StudySchema

logger = logging.getLogger(__name__)

AUDIT_DIMENSIONS = (1, 2, 5)
HESSIAN_SAMPLES = 10_000


class ResonanceAuditStudy(BaseStudy):
    """Sampled audits of the lower bounds of Z, Y, X and of the space-time resonance sets"""

    def _setup_schema(self) -> None:
        self.schema = StudySchema(
            name=StudyName.RESONANCE_AUDIT.value,
            display_name="Resonance Audit",
            description="Sample the unit sphere and report the smallest margin of every resonance bound",
            defaults={"dims": list(AUDIT_DIMENSIONS), "samples": 100_000},
            checks=["z_dual_d{d}", "z_lower_bound_d{d}", "y_lower_bound_d{d}", "x_lower_bound_d{d}",
                    "space_time_resonance_d{d}", "hessian_lower_bound_d{d}", "z_homogeneity_d{d}",
                    "completed_square_d{d}"],
            columns=["audit", "dim", "sample_count", "min_margin", "violation_count", "consistency_error"],
        )

    def run(self, spec: StudySpec, rng: np.random.Generator) -> StudyOutcome:
        dims = [spec.dim] if "dim" in spec.model_fields_set else list(AUDIT_DIMENSIONS)
        samples = max(spec.samples, 10 ** 4)
        checks: List[CheckResult] = []
        rows, audits = [], []
        for dim in dims:
            z_audit = audit_z_lower_bound(dim, samples, rng)
            y_audit, x_audit = audit_trilinear_bounds(dim, samples, rng)
            st_audit = audit_resonance_sets(dim, samples, rng)
            for audit in (z_audit, y_audit, x_audit, st_audit):
                audits.append(audit)
                rows.append(self._row(audit))
                checks.append(self._violations(audit))
            checks.append(self.bound_check(f"z_dual_d{dim}", z_audit.max_consistency_error or 0.0,
                                           Z_DUAL_TOLERANCE, "expanded vs direct Z, relative"))
            checks.append(self.bound_check(f"hessian_lower_bound_d{dim}", self._hessian_gap(dim, rng), 1e-12,
                                           "4|xi|^2 minus the smallest Hessian eigenvalue, relative"))
            checks.append(self.bound_check(
                f"z_homogeneity_d{dim}",
                sample_homogeneity_error(lambda a, b: z_quantity(a, b, check=False), 4.0, dim, 2, rng=rng),
                1e-10, "Z(a xi, a eta) = a^4 Z(xi, eta)",
            ))
            checks.append(self.recorded(f"completed_square_d{dim}", completed_square_discrepancy(1000, dim, rng),
                                        "printed completed-square form vs Z, absolute on the unit sphere"))
        summary = {"audits": [audit.model_dump() for audit in audits], "samples_per_audit": samples}
        return StudyOutcome(study=StudyName.RESONANCE_AUDIT, checks=checks, rows=rows, summary=summary)

    def _violations(self, audit: ResonanceAudit) -> CheckResult:
        check = self.bound_check(f"{audit.name}_d{audit.dim}", float(audit.violation_count), 0.0,
                                 f"min margin {audit.min_margin:.4g} over {audit.sample_count} samples")
        return check

    @staticmethod
    def _row(audit: ResonanceAudit) -> dict:
        return {
            "audit": audit.name, "dim": audit.dim, "sample_count": audit.sample_count,
            "min_margin": audit.min_margin, "violation_count": audit.violation_count,
            "consistency_error": audit.max_consistency_error or 0.0,
        }

    @staticmethod
    def _hessian_gap(dim: int, rng: np.random.Generator) -> float:
        xi = rng.standard_normal((HESSIAN_SAMPLES, dim))
        smallest = np.linalg.eigvalsh(phase_hessian(xi))[:, 0]
        bound = 4.0 * np.sum(xi * xi, axis=-1)
        return float(np.max((bound - smallest) / bound))
