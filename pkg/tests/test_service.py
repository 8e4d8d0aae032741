import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from helpers import canonical_pair, perfect_rollout
from prodmap.config import ServiceConfig
from prodmap.dataset import ProductPair
from prodmap.judges import JudgeError, JudgeKind, JudgeScore, mock_judge_score
from prodmap.pipelines import score_rollout_batch
from prodmap.reward import RewardWeights
from prodmap.service import create_app


PAIR = canonical_pair()


@pytest.fixture()
def client():
    return TestClient(create_app(ServiceConfig(mock_mode=True)))


def _item(pair, gold, rollouts):
    return {"pair": {"base_title": pair.base_title, "compared_title": pair.compared_title,
                     "brand": pair.brand},
            "gold": gold, "rollouts": rollouts}


def test_health_mock_mode(client):
    first = client.get("/v1/health")
    second = client.get("/v1/health")
    assert first.status_code == 200
    body = first.json()
    assert body["healthy"] is True
    assert body["mock_mode"] is True
    assert body == second.json()  # side-effect free


def test_health_reports_unreachable_judge_backend():
    from prodmap.backends import ChatBackend

    config = ServiceConfig(
        mock_mode=False,
        judge_backend=ChatBackend(endpoint="http://127.0.0.1:9/v1/chat",
                                  model_name="judge", timeout=0.5, max_retries=0))
    resp = TestClient(create_app(config)).get("/v1/health")
    body = resp.json()
    assert body["healthy"] is False
    assert body["judge_backend"]["reachable"] is False
    assert body["judge_backend"]["reason"]


def test_single_perfect_rollout_k1(client):
    resp = client.post("/v1/score", json={
        "items": [_item(PAIR, 1, [perfect_rollout(PAIR, 1)])]})
    assert resp.status_code == 200
    item = resp.json()["items"][0]
    assert item["rewards"] == [1.0]
    assert item["advantages"] == [0.0]
    assert item["breakdowns"][0]["judge_scores"] == {
        "core": 1.0, "identifier": 1.0, "variant": 1.0}


def test_perfect_vs_garbage(client):
    resp = client.post("/v1/score", json={
        "items": [_item(PAIR, 1, [perfect_rollout(PAIR, 1), "garbage"])]})
    item = resp.json()["items"][0]
    assert item["rewards"] == [1.0, 0.0]
    assert item["advantages"][0] == pytest.approx(1.0, abs=1e-6)
    assert item["advantages"][1] == pytest.approx(-1.0, abs=1e-6)


def test_malformed_json_is_400(client):
    resp = client.post("/v1/score", content="{not json",
                       headers={"content-type": "application/json"})
    assert resp.status_code == 400
    assert "error" in resp.json()


@pytest.mark.parametrize("mutate", [
    lambda body: body.pop("items"),
    lambda body: body["items"][0].pop("rollouts"),
    lambda body: body["items"][0].update(gold=2),
    lambda body: body["items"][0].update(rollouts=[]),
    lambda body: body["items"][0]["pair"].update(base_title=""),
])
def test_schema_violations_are_400(client, mutate):
    body = {"items": [_item(PAIR, 1, ["x"])]}
    mutate(body)
    resp = client.post("/v1/score", json=body)
    assert resp.status_code == 400


def test_judge_failure_is_502():
    def failing(kind, pair, reasoning):
        raise JudgeError("backend down")

    app = create_app(ServiceConfig(mock_mode=True), judge_provider=failing)
    client = TestClient(app)
    resp = client.post("/v1/score", json={
        "items": [_item(PAIR, 1, [perfect_rollout(PAIR, 1)])]})
    assert resp.status_code == 502


def test_request_weights_override():
    client = TestClient(create_app(ServiceConfig(mock_mode=True)))
    body = {"items": [_item(PAIR, 1, ["<reason></reason><label>1</label>"])],
            "weights": {"format": 0.0, "correctness": 1.0, "judge": 0.0}}
    resp = client.post("/v1/score", json=body)
    assert resp.json()["items"][0]["rewards"] == [1.0]  # correctness-only weighting


def test_in_process_equivalence_sample(client):
    items = [
        (PAIR, 1, [perfect_rollout(PAIR, 1), "garbage", "<label>1</label>"]),
        (ProductPair("Bmax pods 12 cans", "Bmax pods 24 cans", pair_id="q"), 0,
         ["<reason>pods bmax cans</reason><label>0</label>"]),
    ]
    direct = score_rollout_batch(items, mock_judge_score, RewardWeights())
    resp = client.post("/v1/score", json={
        "items": [_item(pair, gold, rollouts) for pair, gold, rollouts in items]})
    got = resp.json()["items"]
    for direct_group, wire in zip(direct, got):
        assert wire["rewards"] == direct_group.rewards
        assert wire["advantages"] == direct_group.advantages


def test_capacity_cap_yields_503():
    release = threading.Event()
    started = threading.Event()

    def slow(kind, pair, reasoning):
        started.set()
        release.wait(timeout=5)
        return mock_judge_score(kind, pair, reasoning)

    app = create_app(ServiceConfig(mock_mode=True, concurrency_cap=1), judge_provider=slow)
    client = TestClient(app)
    body = {"items": [_item(PAIR, 1, [perfect_rollout(PAIR, 1)])]}

    results = {}

    def first():
        results["first"] = client.post("/v1/score", json=body).status_code

    worker = threading.Thread(target=first)
    worker.start()
    assert started.wait(timeout=5)
    results["second"] = client.post("/v1/score", json=body).status_code
    release.set()
    worker.join(timeout=5)
    assert results["second"] == 503
    assert results["first"] == 200


def test_capacity_recovers_after_release():
    app = create_app(ServiceConfig(mock_mode=True, concurrency_cap=1))
    client = TestClient(app)
    body = {"items": [_item(PAIR, 1, ["x"])]}
    assert client.post("/v1/score", json=body).status_code == 200
    assert client.post("/v1/score", json=body).status_code == 200
