from .registry import study_registry
from .executor import fit_and_verdict, fit_series, json_ready, jsonable, run_study

__all__ = ["study_registry", "run_study", "fit_and_verdict", "fit_series", "json_ready", "jsonable"]
