import logging
from typing import Any, Dict, List, Optional

from resonance_lab.errors import UsageError
from .base_study import BaseStudy
from .decay_studies import BandedDecayStudy, LinearDecayStudy
from .geometry_studies import ResonanceAuditStudy
from .nonlinear_studies import NonlinearScatterStudy, ProfileMonitorStudy
from .operator_studies import OperatorSuiteStudy

logger = logging.getLogger(__name__)


class StudyRegistry:
    """Registry and lookup of all named studies"""

    def __init__(self):
        self.studies: Dict[str, BaseStudy] = {}
        self._initialize_studies()

    def _initialize_studies(self) -> None:
        """Initialize all available studies"""
        self.register_study(LinearDecayStudy())
        self.register_study(BandedDecayStudy())
        self.register_study(ResonanceAuditStudy())
        self.register_study(OperatorSuiteStudy())
        self.register_study(NonlinearScatterStudy())
        self.register_study(ProfileMonitorStudy())

    def register_study(self, study: BaseStudy) -> None:
        if study.schema:
            self.studies[study.schema.name] = study
            logger.debug("✓ Registered study: %s", study.schema.display_name)

    def get_study(self, name: str) -> Optional[BaseStudy]:
        return self.studies.get(name)

    def require(self, name: str) -> BaseStudy:
        """
        Get a study by name

        Raises:
            UsageError: If the name is not registered
        """
        study = self.get_study(name)
        if study is None:
            raise UsageError(f"unknown study '{name}'; known: {', '.join(self.get_study_names())}")
        return study

    def get_all_schemas(self) -> List[Dict[str, Any]]:
        return [study.get_schema() for study in self.studies.values()]

    def get_study_names(self) -> List[str]:
        return list(self.studies.keys())


# Global registry instance
study_registry = StudyRegistry()
