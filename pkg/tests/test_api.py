import pytest
from fastapi.testclient import TestClient

from app import __version__
from app.main import app

K4 = {"kind": "graph", "n": 4, "edges": [[a, b, 1.0] for a in range(4) for b in range(a + 1, 4)]}
SIGNED_TRIANGLE = {
    "kind": "signed",
    "n": 3,
    "edges": [[0, 1, 1.0, 0.0], [1, 2, 1.0, 0.0], [0, 2, 0.0, 1.0]],
}


@pytest.fixture
def client():
    return TestClient(app)


def test_root_and_health(client):
    assert client.get("/").json()["version"] == __version__
    assert client.get("/health").json() == {"status": "healthy"}


def test_status(client):
    body = client.get("/api/status").json()
    assert body["version"] == __version__
    assert body["settings"]["maxcut_exact_limit"] == 28


def test_random_graph(client):
    response = client.post("/api/graphs/random", json={"n": 50, "delta_exp": 0.5, "rng_seed": 1})
    assert response.status_code == 200
    body = response.json()
    assert body["kind"] == "graph"
    assert body["n"] == 50
    assert all(a < b for a, b, _ in body["edges"])


def test_random_graph_rejects_bad_exponent(client):
    response = client.post("/api/graphs/random", json={"n": 50, "delta_exp": 1.5})
    assert response.status_code == 400


def test_planted_clustering(client):
    body = client.post("/api/graphs/planted-cc", json={"n": 6, "k": 2}).json()
    assert body["kind"] == "signed"
    assert len(body["edges"]) == 15


def test_coreset(client):
    graph = client.post("/api/graphs/random", json={"n": 60, "delta_exp": 0.5, "rng_seed": 2}).json()
    response = client.post("/api/coreset", json={"graph": graph, "epsilon": 0.5, "rng_seed": 2})
    assert response.status_code == 200
    body = response.json()
    assert body["metadata"]["n_original"] == 60
    assert len(body["metadata"]["original_ids"]) == body["graph"]["n"]


def test_estimate_maxcut(client):
    response = client.post("/api/estimate/maxcut", json={"graph": K4, "gamma": [1, 1, 1, 1]})
    assert response.status_code == 200
    body = response.json()
    assert body["value"] == pytest.approx(4.0, abs=1e-6)
    assert body["partitions_evaluated"] == 8


def test_estimate_cc(client):
    response = client.post("/api/estimate/cc", json={"graph": SIGNED_TRIANGLE, "gamma": [1, 1, 1], "k": 2})
    assert response.status_code == 200
    assert response.json()["value"] == pytest.approx(2.0, abs=1e-6)


def test_estimate_wrong_graph_kind(client):
    response = client.post("/api/estimate/cc", json={"graph": K4})
    assert response.status_code == 400


def test_solve(client):
    body = client.post("/api/solve/maxcut", json={"graph": K4}).json()
    assert body["value"] == 4.0
    assert body["assignment"] == [0, 1, 1, 0]
    body = client.post("/api/solve/cc", json={"graph": SIGNED_TRIANGLE, "solver": "local-search", "rng_seed": 3}).json()
    assert body["value"] == 2.0
    assert body["seed"] == 3


def test_solve_rejects_estimator(client):
    response = client.post("/api/solve/maxcut", json={"graph": K4, "solver": "est"})
    assert response.status_code == 400
    assert "/api/estimate" in response.json()["detail"]


def test_malformed_payloads(client):
    bad_row = {"kind": "graph", "n": 3, "edges": [[0, 1]]}
    assert client.post("/api/solve/maxcut", json={"graph": bad_row}).status_code == 400
    out_of_range = {"kind": "graph", "n": 2, "edges": [[0, 5, 1.0]]}
    assert client.post("/api/solve/maxcut", json={"graph": out_of_range}).status_code == 400
    assert client.post("/api/solve/maxcut", json={"graph": {"n": 0}}).status_code == 422


def test_stream_run(client):
    graph = client.post("/api/graphs/random", json={"n": 80, "delta_exp": 0.5, "rng_seed": 5}).json()
    response = client.post(
        "/api/stream/run", json={"graph": graph, "order": "insert-delete-mix", "epsilon": 0.5, "rng_seed": 5}
    )
    assert response.status_code == 200
    body = response.json()
    assert body["problem"] == "maxcut"
    assert body["sampler_backend"] == "sketch"
    assert body["space"]["peak_stored_items"] > 0
