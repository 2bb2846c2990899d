"""
Tests for the FastAPI service
"""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from resonance_lab import main
from resonance_lab.main import app
from resonance_lab.models import CheckResult, StudyName, StudyOutcome, Verdict


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


class TestReadEndpoints:
    """Registry and status endpoints"""

    def test_root(self, client):
        response = client.get("/")
        assert response.status_code == 200
        assert response.json()["health"] == "/health"

    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "healthy"
        assert body["studies_available"] == len(StudyName)
        assert body["symbols_available"] > 0

    def test_stats(self, client):
        body = client.get("/stats").json()
        assert "default_seed" in body
        assert "output_directory" in body

    def test_symbols(self, client):
        body = client.get("/symbols").json()
        assert body["total_symbols"] == len(body["schemas"])
        assert "g_symbol" in body["symbols"]

    def test_studies(self, client):
        body = client.get("/studies").json()
        assert set(body["studies"]) == {name.value for name in StudyName}


class TestStudyRuns:
    """POST /studies/{name}"""

    def test_unknown_study(self, client):
        assert client.post("/studies/nope", json={}).status_code == 404

    def test_invalid_spec(self, client):
        response = client.post("/studies/linear-decay", json={"n_per_axis": 100})
        assert response.status_code == 400
        assert "power of two" in response.json()["detail"]

    def test_audit_run(self, client):
        response = client.post("/studies/resonance-audit", json={"dim": 1, "samples": 10_000})
        assert response.status_code == 200
        body = response.json()
        assert body["study"] == "resonance-audit"
        assert body["verdict"] == "PASS"
        assert body["exit_code"] == 0
        assert body["checks"]

    def test_name_comes_from_path(self, client):
        response = client.post("/studies/resonance-audit",
                               json={"name": "linear-decay", "dim": 1, "samples": 10_000})
        assert response.json()["study"] == "resonance-audit"


class TestFit:
    """POST /fit"""

    def test_fit_pass(self, client):
        t = np.geomspace(10.0, 1000.0, 12)
        payload = {"times": t.tolist(), "values": (t ** -0.5).tolist(), "expected_slope": -0.5}
        body = client.post("/fit", json=payload).json()
        assert body["verdict"] == "PASS"
        assert body["slope"] == pytest.approx(-0.5, abs=1e-9)

    def test_length_mismatch(self, client):
        payload = {"times": [1.0, 2.0, 3.0], "values": [1.0, 0.5], "expected_slope": -1.0}
        assert client.post("/fit", json=payload).status_code == 400

    def test_invalid_tolerance(self, client):
        payload = {"times": [1.0, 2.0], "values": [1.0, 0.5], "expected_slope": -1.0, "tolerance": 0.0}
        assert client.post("/fit", json=payload).status_code == 422


class TestStrictJson:
    """Non-finite measurements must not break the response"""

    def test_non_finite_values_become_null(self, client, monkeypatch):
        outcome = StudyOutcome(
            study=StudyName.RESONANCE_AUDIT,
            checks=[CheckResult(name="x_margin", verdict=Verdict.RECORDED, measured=float("nan"))],
            summary={"cm": {"t": float("inf"), "shells": [1.0, float("-inf")]}},
        )
        monkeypatch.setattr(main, "run_study", lambda spec, write=False: (outcome, None))
        response = client.post("/studies/resonance-audit", json={"dim": 1, "samples": 10_000})
        assert response.status_code == 200
        body = response.json()
        assert body["summary"]["cm"] == {"t": None, "shells": [1.0, None]}
        assert body["checks"][0]["measured"] is None
        assert body["verdict"] == "PASS"

    @pytest.mark.slow
    def test_operator_suite_round_trips(self, client):
        response = client.post("/studies/operator-suite", json={"dim": 1, "samples": 200})
        assert response.status_code == 200
        assert response.json()["checks"]
