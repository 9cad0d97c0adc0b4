import pytest
from fastapi.testclient import TestClient

from app.data import SAMPLE_FANS, sample_subdivision
from app.main import app
from app.models import FunctionSpec, SubdivisionSpec


@pytest.fixture
def client():
    with TestClient(app) as c:
        yield c


def _fan(name: str) -> dict:
    return SAMPLE_FANS[name].model_dump(mode="json")


def test_ping(client):
    r = client.get("/api/ping")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_samples(client):
    r = client.get("/api/samples/octahedron")
    assert r.status_code == 200
    assert len(r.json()["rays"]) == 6
    assert client.get("/api/samples/nope").status_code == 404


def test_ih(client):
    r = client.post("/api/ih", json=_fan("cone_over_square"))
    assert r.status_code == 200
    body = r.json()
    assert body["betti"] == "0:1 2:1"
    assert body["relative"] == {"4": 1, "6": 1}


def test_ih_rejects_bad_fans(client):
    r = client.post("/api/ih", json={"dim": 2, "rays": [[0, 0]], "cones": [[0]]})
    assert r.status_code == 400
    assert r.json()["detail"].startswith("DegenerateRay")


def test_local_h(client):
    spec = SubdivisionSpec.from_subdivision(sample_subdivision("edge_split").subdivision)
    r = client.post("/api/local-h", json=spec.model_dump(mode="json"))
    assert r.status_code == 200
    body = r.json()
    assert body["perverse"]["semi_small"] is True
    assert len(body["w"]["cones"]) == 2


def test_verify_and_runs(client):
    sample = sample_subdivision("edge_split")
    payload = {
        "subdivision": SubdivisionSpec.from_subdivision(sample.subdivision).model_dump(mode="json"),
        "l_hat": FunctionSpec.from_function(sample.l_hat).model_dump(mode="json"),
    }
    r = client.post("/api/verify/rhl", json=payload)
    assert r.status_code == 200
    assert r.json()["passed"] is True

    runs = client.get("/api/runs", params={"command": "verify:rhl"}).json()
    assert runs and runs[0]["status"] == "passed"
    run_id = runs[0]["run_id"]
    detail = client.get(f"/api/runs/{run_id}").json()
    assert detail["report"]["passed"] is True
    events = client.get(f"/api/runs/{run_id}/events").json()
    assert {e["action"] for e in events} >= {"check.started", "check.completed"}


def test_uncertified_hypothesis_is_unprocessable(client):
    payload = {"fan": _fan("four_quadrants"), "l": {"linear": [1, 0]}}
    r = client.post("/api/verify/hl", json=payload)
    assert r.status_code == 422
    assert "NotStrictlyConvex" in r.json()["detail"]
    run = client.get("/api/runs", params={"command": "verify:hl"}).json()[0]
    assert run["status"] == "error"
    assert run["exit_code"] == 4


def test_missing_inputs_are_bad_requests(client):
    r = client.post("/api/verify/complete", json={"fan": _fan("four_quadrants")})
    assert r.status_code == 400


def test_unknown_run(client):
    assert client.get("/api/runs/run-missing").status_code == 404
    assert client.get("/api/runs/run-missing/events").status_code == 404
