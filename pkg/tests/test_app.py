import pytest
from fastapi.testclient import TestClient

from app.dependencies import _load, get_predictor
from app.main import app
from inference.predictor import Predictor
from network.checkpoint import save_checkpoint
from network.model import init_params
from settings import settings


@pytest.fixture
def client(tiny_config):
    predictor = Predictor(init_params(tiny_config))
    app.dependency_overrides[get_predictor] = lambda: predictor
    yield TestClient(app)
    app.dependency_overrides.clear()


@pytest.fixture
def scan(rng) -> list:
    return rng.uniform(-0.5, 0.5, size=(64, 3)).tolist()


def test_model_info(client, tiny_config):
    response = client.get("/api/model")
    assert response.status_code == 200
    body = response.json()
    assert body["config"]["width"] == tiny_config.width
    assert body["parameters"] == init_params(tiny_config).size
    assert body["threshold"] == 0.5


def test_infer(client, scan):
    response = client.post("/api/primitives/infer", json={"points": scan, "threshold": 0.0, "project": True})
    assert response.status_code == 200
    for record in response.json()["primitives"]:
        assert record["type"] != "null"
        assert len(record["coeffs"]) == 10
        assert 0.0 <= record["score"] <= 1.0


def test_too_few_points(client, scan):
    response = client.post("/api/primitives/infer", json={"points": scan[:15]})
    assert response.status_code == 422


def test_threshold_out_of_range(client, scan):
    response = client.post("/api/primitives/infer", json={"points": scan, "threshold": 1.5})
    assert response.status_code == 422


def test_no_checkpoint(monkeypatch):
    monkeypatch.setattr(settings, "checkpoint", None)
    response = TestClient(app).get("/api/model")
    assert response.status_code == 503


def test_checkpoint_from_settings(monkeypatch, tmp_path, tiny_config):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, init_params(tiny_config))
    monkeypatch.setattr(settings, "checkpoint", str(path))
    _load.cache_clear()
    response = TestClient(app).get("/api/model")
    assert response.status_code == 200
    assert response.json()["config"]["proxies"] == tiny_config.proxies


def test_unreadable_checkpoint(monkeypatch, tmp_path):
    monkeypatch.setattr(settings, "checkpoint", str(tmp_path / "missing.ckpt"))
    _load.cache_clear()
    assert TestClient(app).get("/api/model").status_code == 503
