"""
Study execution: seeded run, CSV/JSON emission and log-log fit verdicts

Every run writes three files into its output directory:
  data.csv       one row per measurement, columns from the study schema
  summary.json   checks, overall verdict and study-specific measurements
  manifest.json  spec, spec hash, seed, library versions, provenance, budgets
"""

import json
import logging
import math
import time
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from resonance_lab.config import settings
from resonance_lab.models import FitVerdict, StudyOutcome, StudySpec, Verdict
from resonance_lab.propagator import fit_power_law
from resonance_lab.utils import library_versions, make_rng, provenance_string, sha256_hex, timestamp
from .registry import study_registry

logger = logging.getLogger(__name__)

MIN_FIT_ROWS = 8


def output_directory(spec: StudySpec, out_dir: Optional[Union[str, Path]] = None) -> Path:
    """out_dir when given, else OUTPUT_DIRECTORY/<study>-d<dim>-s<seed>"""
    if out_dir is not None:
        return Path(out_dir)
    return Path(settings.OUTPUT_DIRECTORY) / f"{spec.name.value}-d{spec.dim}-s{spec.seed}"


def build_manifest(spec: StudySpec, outcome: StudyOutcome, elapsed: float) -> dict:
    config_hash = sha256_hex(spec.config_payload())
    return {
        "study": spec.name.value,
        "spec": spec.config_payload(),
        "config_hash": config_hash,
        "seed": spec.seed,
        "generator": "numpy.random.default_rng (PCG64)",
        "versions": library_versions(),
        "provenance": provenance_string(config_hash),
        "created_at": timestamp(),
        "budgets": settings.get_budget_summary(),
        "prefactor": outcome.prefactor,
        "verdict": outcome.verdict.value,
        "elapsed_seconds": round(elapsed, 3),
    }


def run_study(spec: StudySpec, out_dir: Optional[Union[str, Path]] = None,
              write: bool = True) -> Tuple[StudyOutcome, Optional[Path]]:
    """
    Run one study from its spec and emit its report files

    Args:
        spec: Validated study spec
        out_dir: Output directory; created when missing
        write: Skip file emission when False (service use)

    Returns:
        (outcome, output directory or None)

    Raises:
        UsageError: Unknown study
        BlowUpError: A nonlinear trajectory left the finite range
    """
    study = study_registry.require(spec.name.value)
    logger.info("Running %s (d=%d, seed=%d)", spec.name.value, spec.dim, spec.seed)
    start = time.time()
    outcome = study.run(spec, make_rng(spec.seed))
    elapsed = time.time() - start

    for check in outcome.checks:
        marker = {Verdict.FAIL: "❌", Verdict.UNTRUSTED: "⚠️"}.get(check.verdict, "✓")
        logger.info("%s %s: %s (measured %s)", marker, check.name, check.verdict.value, check.measured)
    logger.info("Study %s finished with %s in %.2fs", spec.name.value, outcome.verdict.value, elapsed)
    if not write:
        return outcome, None

    target = output_directory(spec, out_dir)
    target.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(outcome.rows).to_csv(target / "data.csv", index=False, float_format="%.17g")
    summary = {
        "study": spec.name.value,
        "verdict": outcome.verdict.value,
        "exit_code": outcome.exit_code,
        "checks": [check.model_dump(mode="json") for check in outcome.checks],
        "summary": outcome.summary,
    }
    _write_json(target / "summary.json", summary)
    _write_json(target / "manifest.json", build_manifest(spec, outcome, elapsed))
    logger.info("✓ Wrote data.csv, summary.json and manifest.json to %s", target)
    return outcome, target


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(json_ready(payload), f, indent=2, sort_keys=True, allow_nan=False)


def jsonable(value):
    """json.dump fallback for numpy scalars, arrays and complex numbers"""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return str(value)


def json_ready(value):
    """
    Recursively convert a summary into strict JSON values

    Non-finite floats become None so both the written files and API responses
    stay valid JSON (an unbounded CM norm is reported as inf).
    """
    if isinstance(value, dict):
        return {str(k): json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_ready(value.tolist())
    if isinstance(value, np.generic):
        return json_ready(value.item())
    if isinstance(value, complex):
        return [json_ready(value.real), json_ready(value.imag)]
    if isinstance(value, Enum):
        return json_ready(value.value)
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if value is None or isinstance(value, (bool, int, str)):
        return value
    return jsonable(value)


def fit_series(times: Sequence[float], values: Sequence[float], expected_slope: float,
               tolerance: float) -> FitVerdict:
    """Log-log least-squares slope of a series against a reference slope"""
    rows = len(times)
    if rows != len(values):
        raise ValueError(f"times and values differ in length ({rows} vs {len(values)})")
    if rows < 2:
        return FitVerdict(verdict=Verdict.UNTRUSTED, rows=rows, expected_slope=expected_slope,
                          tolerance=tolerance, notes=["fewer than two rows"])
    if np.any(np.asarray(times) <= 0) or np.any(np.asarray(values) <= 0):
        raise ValueError("times and values must be positive for a log-log fit")
    fit = fit_power_law(times, values)
    notes = list(fit.notes)
    if rows < MIN_FIT_ROWS:
        verdict = Verdict.UNTRUSTED
        notes.append(f"{rows} rows is below the minimum of {MIN_FIT_ROWS}")
    else:
        verdict = Verdict.PASS if abs(fit.slope - expected_slope) <= tolerance else Verdict.FAIL
    return FitVerdict(verdict=verdict, slope=fit.slope, intercept=fit.intercept, rows=rows,
                      expected_slope=expected_slope, tolerance=tolerance, notes=notes)


def fit_and_verdict(csv_path: Union[str, Path], expected_slope: float, tolerance: float,
                    t_column: str = "t", value_column: Optional[str] = None) -> FitVerdict:
    """
    Fit log(value) against log(t) from a data.csv and return the verdict

    Args:
        csv_path: CSV file with a time column
        expected_slope: Reference slope
        tolerance: Allowed deviation
        t_column: Time column name
        value_column: Value column; the first numeric non-time column when omitted

    Raises:
        FileNotFoundError: Missing file
        ValueError: Unreadable file or missing columns
    """
    path = Path(csv_path)
    if not path.is_file():
        raise FileNotFoundError(f"CSV not found: {path}")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ValueError(f"could not read {path}: {e}") from e
    if t_column not in frame.columns:
        raise ValueError(f"{path} has no '{t_column}' column; columns: {list(frame.columns)}")
    if value_column is None:
        numeric = [c for c in frame.select_dtypes("number").columns if c != t_column]
        if not numeric:
            raise ValueError(f"{path} has no numeric value column")
        value_column = numeric[0]
    if value_column not in frame.columns:
        raise ValueError(f"{path} has no '{value_column}' column")
    series = frame[[t_column, value_column]].dropna().sort_values(t_column)
    result = fit_series(series[t_column].tolist(), series[value_column].tolist(), expected_slope, tolerance)
    logger.info("Fit of %s against %s: slope %s -> %s", value_column, t_column, result.slope, result.verdict.value)
    return result
