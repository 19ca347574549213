import numpy as np
import pytest
from fastapi.testclient import TestClient

from warmup import TokenEmbeddingSet, formats
from warmup.service.app import create_app


@pytest.fixture
def client():
    return TestClient(create_app())


@pytest.fixture
def scored_dir(client, tmp_path):
    spec = {"N": 60, "L": 8, "d": 6, "clusters": 2, "fg_fraction": 0.5, "fg_jitter": 0.3}
    synth = client.post(
        "/v1/synth", json={"spec": spec, "seed": 5, "out": str(tmp_path / "toy.tokemb")}
    )
    assert synth.status_code == 200
    score = client.post(
        "/v1/score",
        json={
            "input": str(tmp_path / "toy.tokemb"),
            "out": str(tmp_path / "run"),
            "config": {"K": 6, "seed": 1},
        },
    )
    assert score.status_code == 200
    return tmp_path


def test_health(client):
    response = client.get("/v1/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "ok"


def test_score_response_shape(scored_dir, client):
    summary = client.post(
        "/v1/score",
        json={
            "input": str(scored_dir / "toy.tokemb"),
            "out": str(scored_dir / "again"),
            "config": {"K": 6, "seed": 1},
        },
    ).json()["summary"]
    assert summary["n_images"] == 60
    assert summary["k_clusters"] == 6
    assert len(summary["omega_deciles"]) == 11
    records = formats.read_scores(scored_dir / "again" / "scores.jsonl", expected_count=60)
    assert len(records) == 60


def test_simulate_and_stats_endpoints(scored_dir, client):
    simulate = client.post(
        "/v1/simulate",
        json={
            "scores": str(scored_dir / "run" / "scores.jsonl"),
            "iters": 80,
            "batch": 32,
            "config": {"T_w": 50, "D0": 0.2, "seed": 1},
            "out": str(scored_dir / "sim"),
        },
    )
    assert simulate.status_code == 200
    report = simulate.json()
    assert report["iterations"] == 80
    assert (scored_dir / "sim" / "trace.csv").exists()

    stats = client.post("/v1/stats", json={"scores": str(scored_dir / "run" / "scores.jsonl")})
    assert stats.status_code == 200
    assert stats.json()["n_records"] == 60


def test_config_error_maps_to_400(client, tmp_path, scored_dir):
    response = client.post(
        "/v1/score",
        json={
            "input": str(scored_dir / "toy.tokemb"),
            "out": str(tmp_path / "out"),
            "config": {"K": 5000},
        },
    )
    assert response.status_code == 400
    assert response.json()["error"]["kind"] == "config"


def test_io_error_maps_to_422(client, tmp_path):
    response = client.post(
        "/v1/score", json={"input": str(tmp_path / "missing.tokemb"), "out": str(tmp_path / "out")}
    )
    assert response.status_code == 422
    assert response.json()["error"]["kind"] == "io"


def test_numeric_error_maps_to_500(client, tmp_path):
    flat = TokenEmbeddingSet(data=np.full((4, 4, 4), 2.0, dtype=np.float32))
    formats.write_embeddings(flat, tmp_path / "flat.tokemb")
    response = client.post(
        "/v1/score",
        json={
            "input": str(tmp_path / "flat.tokemb"),
            "out": str(tmp_path / "out"),
            "config": {"K": 2},
        },
    )
    assert response.status_code == 500
    assert response.json()["error"]["kind"] == "numeric"


def test_unknown_config_key_rejected_by_schema(client, tmp_path):
    response = client.post(
        "/v1/score",
        json={
            "input": str(tmp_path / "x.tokemb"),
            "out": str(tmp_path / "out"),
            "config": {"bogus": 1},
        },
    )
    assert response.status_code == 422  # pydantic extra=forbid


def test_synth_error_propagates(client, tmp_path):
    response = client.post(
        "/v1/synth",
        json={
            "spec": {"N": 0, "L": 4, "d": 4, "clusters": 1, "fg_fraction": 0.5},
            "seed": 0,
            "out": str(tmp_path / "x.tokemb"),
        },
    )
    assert response.status_code == 400
    assert response.json()["error"]["kind"] == "config"
