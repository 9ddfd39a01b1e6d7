"""HTTP facade: submission, polling, roster, idempotency, persistence."""

import time

import pytest
from fastapi.testclient import TestClient

from ebsopt.service import create_app


@pytest.fixture(scope="module")
def client(small_data_dir):
    app = create_app(small_data_dir, workers=1)
    with TestClient(app) as tc:
        yield tc


def wait_done(client, job_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        payload = client.get(f"/api/jobs/{job_id}").json()
        if payload["status"] in ("done", "failed"):
            return payload
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} did not finish")


def test_health(client):
    payload = client.get("/api/health").json()
    assert payload["ready"] is True


def test_submit_and_poll_done(client):
    resp = client.post("/api/queries", json={
        "text": "increase available e-bikes at spots 1 and 2",
        "max_parameterized": 3,
    })
    assert resp.status_code == 202
    job_id = resp.json()["job_id"]
    payload = wait_done(client, job_id)
    assert payload["status"] == "done"
    assert payload["agent_status"] == "satisfied"
    assert payload["satisfaction"] is not None
    assert payload["qr_objective"] is not None and payload["cost_objective"] is not None
    assert payload["decisions"]
    assert payload["trace"]["iterations"]
    assert payload["metrics"]["solver_invocations"] == \
        2 * payload["metrics"]["iterations"]


def test_submit_empty_text_rejected(client):
    resp = client.post("/api/queries", json={"text": "   "})
    assert resp.status_code == 400


def test_submit_unknown_spot_rejected(client):
    resp = client.post("/api/queries", json={
        "text": "bikes please", "declared_spots": [99],
    })
    assert resp.status_code == 400
    assert "99" in resp.json()["detail"]


def test_unknown_adapter_rejected(client):
    resp = client.post("/api/queries", json={"text": "bikes", "adapter": "psychic"})
    assert resp.status_code == 400


def test_unknown_job_404(client):
    assert client.get("/api/jobs/nope").status_code == 404


def test_idempotency_key_reuses_job(client):
    body = {"text": "increase available e-bikes at spot 1",
            "max_parameterized": 3, "idempotency_key": "same-key"}
    first = client.post("/api/queries", json=body).json()["job_id"]
    second = client.post("/api/queries", json=body).json()["job_id"]
    assert first == second


def test_failed_job_reports_reason(client):
    resp = client.post("/api/queries", json={
        "text": "more bikes at spot number 9000 outside roster",
    })
    job_id = resp.json()["job_id"]
    payload = wait_done(client, job_id)
    assert payload["status"] == "failed"
    assert payload["reason"]


def test_spots_roster(client, small_world):
    store, _forest, _config = small_world
    payload = client.get("/api/spots").json()
    assert len(payload) == store.n_spots
    entry = payload[0]
    assert {"id", "name", "lat", "lon", "capacity", "stock"} <= set(entry)
    assert set(entry["stock"]) == {"k1", "k2", "k3"}


def test_done_trace_is_byte_stable(client):
    resp = client.post("/api/queries", json={
        "text": "increase available e-bikes at spots 1 and 2",
        "max_parameterized": 2,
    })
    job_id = resp.json()["job_id"]
    wait_done(client, job_id)
    a = client.get(f"/api/jobs/{job_id}").content
    b = client.get(f"/api/jobs/{job_id}").content
    assert a == b


def test_restart_restores_completed_jobs(small_data_dir, client):
    resp = client.post("/api/queries", json={
        "text": "increase available e-bikes at spot 2",
        "max_parameterized": 2, "idempotency_key": "restore-me",
    })
    job_id = resp.json()["job_id"]
    wait_done(client, job_id)
    fresh = create_app(small_data_dir, workers=1)
    with TestClient(fresh) as tc:
        payload = tc.get(f"/api/jobs/{job_id}").json()
        assert payload["status"] == "done"


def test_not_ingested_503(tmp_path):
    app = create_app(str(tmp_path), workers=1)
    with TestClient(app) as tc:
        assert tc.get("/api/spots").status_code == 503
        resp = tc.post("/api/queries", json={"text": "bikes"})
        assert resp.status_code == 503
