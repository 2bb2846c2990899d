"""
Tests for study specs, the study registry, the executor and the log-log verdicts
"""

import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from resonance_lab.errors import UsageError
from resonance_lab.models import (
    EXIT_CODES,
    CheckResult,
    StudyName,
    StudyOutcome,
    StudySpec,
    Verdict,
    overall_verdict,
)
from resonance_lab.propagator import fit_power_law
from resonance_lab.spectral import Grid, random_smooth_field
from resonance_lab.studies import fit_and_verdict, fit_series, json_ready, jsonable, run_study, study_registry
from resonance_lab.studies.base_study import BaseStudy
from resonance_lab.studies.nonlinear_studies import dimension_note, reflect, richardson_order
from resonance_lab.utils import sha256_hex


def _check(verdict: Verdict) -> CheckResult:
    return CheckResult(name=verdict.value.lower(), verdict=verdict)


class TestStudyRegistry:
    """Named studies and their schemas"""

    def test_all_studies_registered(self):
        assert set(study_registry.get_study_names()) == {name.value for name in StudyName}

    def test_schemas_describe_checks_and_columns(self):
        for schema in study_registry.get_all_schemas():
            assert schema["checks"]
            assert schema["columns"]
            assert schema["display_name"]

    def test_unknown_study(self):
        assert study_registry.get_study("nope") is None
        with pytest.raises(UsageError, match="unknown study"):
            study_registry.require("nope")


class TestStudySpec:
    """Validation of study documents"""

    def test_grid_must_be_power_of_two(self):
        with pytest.raises(ValidationError, match="power of two"):
            StudySpec(name="linear-decay", n_per_axis=100)

    def test_smoke_only_for_scatter(self):
        with pytest.raises(ValidationError, match="smoke mode"):
            StudySpec(name="linear-decay", smoke=True)
        assert StudySpec(name="nonlinear-scatter", dim=5).smoke_mode

    def test_bilinear_budget(self):
        with pytest.raises(ValidationError, match="bilinear budget"):
            StudySpec(name="profile-monitor", n_per_axis=1024)
        with pytest.raises(ValidationError, match="dim <= 2"):
            StudySpec(name="operator-suite", dim=3, n_per_axis=8)

    def test_time_window(self):
        with pytest.raises(ValidationError, match="must exceed"):
            StudySpec(name="linear-decay", t_min=10.0, t_max=5.0)

    def test_comma_separated_lists(self):
        spec = StudySpec(name="banded-decay", bands="1, 2", times="1,10")
        assert spec.bands == [1, 2]
        assert spec.times == [1.0, 10.0]

    def test_from_config(self, tmp_path):
        path = tmp_path / "audit.conf"
        path.write_text("# audit\nNAME=resonance-audit\nSAMPLES=20000\nDIM=\nSEED=7\n", encoding="utf-8")
        spec = StudySpec.from_config(path, seed=11)
        assert spec.name == StudyName.RESONANCE_AUDIT
        assert spec.samples == 20000
        assert spec.seed == 11
        assert "dim" not in spec.model_fields_set

    def test_missing_config(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            StudySpec.from_config(tmp_path / "missing.conf")


class TestVerdicts:
    """Overall verdicts and exit codes"""

    def test_fail_dominates(self):
        checks = [_check(Verdict.PASS), _check(Verdict.UNTRUSTED), _check(Verdict.FAIL)]
        assert overall_verdict(checks) == Verdict.FAIL

    def test_untrusted_dominates_pass(self):
        assert overall_verdict([_check(Verdict.PASS), _check(Verdict.UNTRUSTED)]) == Verdict.UNTRUSTED

    def test_recorded_counts_as_pass(self):
        outcome = StudyOutcome(study=StudyName.NONLINEAR_SCATTER, checks=[_check(Verdict.RECORDED)])
        assert outcome.verdict == Verdict.PASS
        assert outcome.exit_code == 0

    def test_exit_codes(self):
        assert EXIT_CODES == {Verdict.PASS: 0, Verdict.FAIL: 2, Verdict.UNTRUSTED: 3}


class TestStudyHelpers:
    """BaseStudy helpers shared by every study"""

    def test_bound_check(self):
        assert BaseStudy.bound_check("x", 0.5, 1.0).verdict == Verdict.PASS
        assert BaseStudy.bound_check("x", 1.5, 1.0).verdict == Verdict.FAIL
        assert BaseStudy.bound_check("x", float("nan"), 1.0).verdict == Verdict.UNTRUSTED
        assert BaseStudy.bound_check("x", 1.5, 1.0, recorded=True).verdict == Verdict.RECORDED

    def test_slope_check(self):
        t = np.geomspace(1.0, 100.0, 9)
        fit = fit_power_law(t, t ** -0.25)
        assert BaseStudy.slope_check("s", fit, -0.25, 0.01).verdict == Verdict.PASS
        assert BaseStudy.slope_check("s", fit, -0.5, 0.01).verdict == Verdict.FAIL
        untrusted = fit.model_copy(update={"trusted": False})
        assert BaseStudy.slope_check("s", untrusted, -0.25, 0.01).verdict == Verdict.UNTRUSTED

    def test_times(self):
        spec = StudySpec(name="linear-decay", t_max=100.0, time_count=3)
        assert BaseStudy.times(spec, 1.0, 1000.0).tolist() == pytest.approx([1.0, 10.0, 100.0])
        explicit = StudySpec(name="linear-decay", times=[5.0, 2.0])
        assert BaseStudy.times(explicit, 1.0, 10.0).tolist() == [2.0, 5.0]

    def test_rows_from_series(self):
        rows = BaseStudy.rows_from_series(t=[1, 2], value=[0.5, 0.25])
        assert rows == [{"t": 1.0, "value": 0.5}, {"t": 2.0, "value": 0.25}]

    def test_option_prefers_explicit_values(self):
        spec = StudySpec(name="linear-decay", width=3.0)
        assert BaseStudy.option(spec, "width", 0.5) == 3.0
        assert BaseStudy.option(spec, "amplitude", 0.1) == 0.1

    def test_richardson_order(self, grid_1d, rng):
        field = random_smooth_field(grid_1d, rng)
        finals = [field * (1.0 + 0.1 * 4.0 ** -k) for k in range(3)]
        assert richardson_order(finals) == pytest.approx(2.0)

    def test_reflect(self):
        values = np.arange(8.0)
        # FFT order: index k holds frequency k, index 8 - k holds -k
        assert reflect(values).tolist() == [0.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]

    def test_dimension_note(self):
        assert dimension_note(5) == ""
        assert "time resonant" in dimension_note(1)
        assert "d=2" in dimension_note(2)


class TestFitVerdict:
    """Log-log slope verdicts from series and CSV files"""

    def test_exact_series(self):
        t = np.geomspace(1.0, 1000.0, 16)
        result = fit_series(t.tolist(), (1.0 / t).tolist(), -1.0, 0.05)
        assert result.verdict == Verdict.PASS
        assert result.slope == pytest.approx(-1.0, abs=1e-6)
        assert result.rows == 16

    def test_perturbed_series(self):
        t = np.geomspace(1.0, 1000.0, 32)
        values = t ** -0.25 * (1.0 + 0.1 * np.sin(np.log(t)))
        assert fit_series(t.tolist(), values.tolist(), -0.25, 0.05).verdict == Verdict.PASS

    def test_too_few_rows(self):
        result = fit_series([1.0, 2.0, 4.0], [1.0, 0.5, 0.25], -1.0, 0.05)
        assert result.verdict == Verdict.UNTRUSTED
        assert fit_series([1.0], [1.0], -1.0, 0.05).slope is None

    def test_invalid_series(self):
        with pytest.raises(ValueError, match="differ in length"):
            fit_series([1.0, 2.0], [1.0], -1.0, 0.05)
        with pytest.raises(ValueError, match="positive"):
            fit_series([1.0, 2.0], [1.0, -1.0], -1.0, 0.05)

    def test_from_csv(self, tmp_path):
        t = np.geomspace(10.0, 1000.0, 12)
        path = tmp_path / "data.csv"
        pd.DataFrame({"t": t, "reliable": 1.0, "sup": 2.0 * t ** -0.25}).to_csv(path, index=False)
        result = fit_and_verdict(path, -0.25, 0.03, value_column="sup")
        assert result.verdict == Verdict.PASS
        assert fit_and_verdict(path, 0.0, 0.03).verdict == Verdict.PASS  # first numeric column is 'reliable'

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            fit_and_verdict(tmp_path / "missing.csv", -0.25, 0.05)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "data.csv"
        pd.DataFrame({"time": [1.0, 2.0], "sup": [1.0, 0.5]}).to_csv(path, index=False)
        with pytest.raises(ValueError, match="no 't' column"):
            fit_and_verdict(path, -1.0, 0.05)
        with pytest.raises(ValueError, match="no 'l2' column"):
            fit_and_verdict(path, -1.0, 0.05, t_column="time", value_column="l2")


class TestExecutor:
    """Seeded runs and their report files"""

    @pytest.fixture
    def audit_spec(self) -> StudySpec:
        return StudySpec(name="resonance-audit", dim=1, samples=10_000, seed=42)

    def test_writes_report_files(self, audit_spec, tmp_path):
        outcome, target = run_study(audit_spec, tmp_path / "audit")
        assert outcome.verdict == Verdict.PASS
        assert sorted(p.name for p in target.iterdir()) == ["data.csv", "manifest.json", "summary.json"]

        summary = json.loads((target / "summary.json").read_text(encoding="utf-8"))
        assert summary["verdict"] == "PASS"
        assert summary["exit_code"] == 0

        manifest = json.loads((target / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["config_hash"] == sha256_hex(audit_spec.config_payload())
        assert manifest["seed"] == 42
        assert "numpy" in manifest["versions"]

        frame = pd.read_csv(target / "data.csv")
        assert len(frame) == len(outcome.rows)

    def test_same_seed_same_bytes(self, audit_spec, tmp_path):
        _, first = run_study(audit_spec, tmp_path / "a")
        _, second = run_study(audit_spec, tmp_path / "b")
        assert (first / "data.csv").read_bytes() == (second / "data.csv").read_bytes()

    def test_service_mode_writes_nothing(self, audit_spec):
        outcome, target = run_study(audit_spec, write=False)
        assert target is None
        assert outcome.checks

    def test_smoke_run_is_recorded(self):
        outcome, _ = run_study(StudySpec(name="nonlinear-scatter", smoke=True), write=False)
        assert {check.verdict for check in outcome.checks} == {Verdict.RECORDED}
        assert outcome.exit_code == 0

    def test_jsonable(self):
        assert jsonable(np.float64(1.5)) == 1.5
        assert jsonable(np.arange(2)) == [0, 1]
        assert jsonable(1 + 2j) == [1.0, 2.0]

    def test_json_ready_maps_non_finite_to_null(self):
        payload = {"cm": {"t": np.float64(np.inf)}, "shells": np.array([1.0, np.nan]),
                   "z": complex(1.0, np.inf), "verdict": Verdict.PASS, 3: (1, "a")}
        assert json_ready(payload) == {"cm": {"t": None}, "shells": [1.0, None], "z": [1.0, None],
                                       "verdict": "PASS", "3": [1, "a"]}
        json.dumps(json_ready(payload), allow_nan=False)

    def test_non_finite_summary_is_written_as_strict_json(self, monkeypatch, tmp_path):
        outcome = StudyOutcome(
            study=StudyName.OPERATOR_SUITE,
            checks=[CheckResult(name="cm_norm", verdict=Verdict.RECORDED, measured=float("inf"))],
            summary={"cm_norm": {"Q4_over_Z": float("inf")}},
        )
        stub = type("Stub", (), {"run": lambda self, spec, rng: outcome})()
        monkeypatch.setattr(study_registry, "require", lambda name: stub)
        _, target = run_study(StudySpec(name="operator-suite", seed=7), tmp_path / "ops")
        text = (target / "summary.json").read_text(encoding="utf-8")
        assert "Infinity" not in text
        summary = json.loads(text)
        assert summary["summary"]["cm_norm"]["Q4_over_Z"] is None
        assert summary["checks"][0]["measured"] is None

    @pytest.mark.slow
    def test_linear_decay_passes(self):
        outcome, _ = run_study(StudySpec(name="linear-decay", dim=1), write=False)
        assert outcome.verdict == Verdict.PASS

    @pytest.mark.slow
    def test_five_dimensional_smoke(self):
        outcome, _ = run_study(StudySpec(name="nonlinear-scatter", dim=5), write=False)
        assert {check.verdict for check in outcome.checks} == {Verdict.RECORDED}

    @pytest.mark.slow
    def test_profile_monitor(self):
        outcome, _ = run_study(StudySpec(name="profile-monitor", dim=1), write=False)
        assert outcome.verdict == Verdict.PASS

    @pytest.mark.slow
    def test_nonlinear_scatter(self):
        outcome, _ = run_study(StudySpec(name="nonlinear-scatter", dim=1), write=False)
        assert outcome.verdict == Verdict.PASS
        assert outcome.prefactor is not None
        gap_checks = {c.name: c for c in outcome.checks if c.name in ("scattering_proxy", "g_gain")}
        assert {c.verdict for c in gap_checks.values()} == {Verdict.RECORDED}
        assert all("time resonant" in c.detail for c in gap_checks.values())
