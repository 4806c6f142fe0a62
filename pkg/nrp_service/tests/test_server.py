"""Wire protocol conformance and serving behavior.

The golden transcript is the summarization toolkit's published conformance
artifact; this suite locates the installed data file (never importing that
package's code) and replays it with its documented semantics: statuses and
JSON key sets match exactly, pinned values match, probabilities are numbers
in [0, 1], and batch scores match re-queried singles within the stated
tolerance.
"""

from __future__ import annotations

import dataclasses
import importlib.util
import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from nrp_service.modeling import CheckpointScorer
from nrp_service.server import create_app


def golden_transcript_path() -> Path | None:
    spec = importlib.util.find_spec("convsum")
    if spec is None or not spec.submodule_search_locations:
        return None
    path = Path(list(spec.submodule_search_locations)[0]) / "data" / "golden_transcripts.json"
    return path if path.exists() else None


@pytest.fixture(scope="module")
def scorers(served_checkpoints):
    return {
        "fw": CheckpointScorer.load(served_checkpoints["fw"]["checkpoint"]),
        "bw": CheckpointScorer.load(served_checkpoints["bw"]["checkpoint"]),
    }


@pytest.fixture(scope="module")
def client(scorers):
    return TestClient(create_app(scorers), raise_server_exceptions=False)


def _request(client, method, path, content):
    headers = {"Content-Type": "application/json"} if content is not None else None
    response = client.request(method, path, content=content, headers=headers)
    return response.status_code, response.text


def _check_probability(value) -> str | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return f"probability has type {type(value).__name__}"
    if not 0.0 <= value <= 1.0:
        return f"probability {value} outside [0, 1]"
    return None


def replay(client, transcript) -> list[str]:
    failures: list[str] = []
    for entry in transcript["entries"]:
        name = entry["name"]
        if "raw_body" in entry:
            content = entry["raw_body"].encode("utf-8")
        elif entry.get("body") is not None:
            content = json.dumps(entry["body"]).encode("utf-8")
        else:
            content = None
        status, text = _request(client, entry["method"], entry["path"], content)
        expect = entry["expect"]
        if status != expect["status"]:
            failures.append(f"{name}: status {status} != {expect['status']}")
            continue
        try:
            payload = json.loads(text)
        except json.JSONDecodeError:
            failures.append(f"{name}: response is not JSON")
            continue
        if not isinstance(payload, dict):
            failures.append(f"{name}: response is not an object")
            continue
        if set(payload) != set(expect["keys"]):
            failures.append(f"{name}: keys {sorted(payload)} != {sorted(expect['keys'])}")
            continue
        for key, value in expect.get("values", {}).items():
            if payload.get(key) != value:
                failures.append(f"{name}: {key} {payload.get(key)!r} != {value!r}")
        if "probability" in payload:
            problem = _check_probability(payload["probability"])
            if problem:
                failures.append(f"{name}: {problem}")
        if "probabilities" in payload:
            items = entry["body"]["items"]
            if len(payload["probabilities"]) != len(items):
                failures.append(f"{name}: {len(payload['probabilities'])} probabilities "
                                f"for {len(items)} items")
                continue
            for i, value in enumerate(payload["probabilities"]):
                problem = _check_probability(value)
                if problem:
                    failures.append(f"{name}: item {i}: {problem}")
            tolerance = entry.get("batch_singles_tolerance")
            if tolerance is not None:
                for i, item in enumerate(items):
                    single = {
                        "direction": entry["body"]["direction"],
                        "context": item["context"],
                        "candidate": item["candidate"],
                    }
                    status_i, text_i = _request(
                        client, "POST", "/score", json.dumps(single).encode("utf-8")
                    )
                    if status_i != 200:
                        failures.append(f"{name}: single re-query {i} gave {status_i}")
                        continue
                    p = json.loads(text_i)["probability"]
                    if abs(p - payload["probabilities"][i]) > tolerance:
                        failures.append(
                            f"{name}: item {i} batch {payload['probabilities'][i]} "
                            f"vs single {p} beyond {tolerance}"
                        )
    return failures


def test_golden_transcript_conformance(client):
    path = golden_transcript_path()
    if path is None:
        pytest.skip("summarization toolkit not installed, transcript artifact unavailable")
    transcript = json.loads(path.read_text(encoding="utf-8"))
    assert len(transcript["entries"]) >= 8
    assert replay(client, transcript) == []


def test_health_names_the_model(client, scorers):
    response = client.get("/health")
    assert response.status_code == 200
    payload = response.json()
    assert set(payload) == {"status", "model_id"}
    assert payload["status"] == "ok"
    assert scorers["fw"].fingerprint in payload["model_id"]


def test_training_positive_scores_above_half(client, served_checkpoints):
    for direction in ("fw", "bw"):
        row = served_checkpoints[direction]["positive"]
        response = client.post("/score", json={
            "direction": direction,
            "context": row["context"],
            "candidate": row["candidate"],
        })
        assert response.status_code == 200
        assert response.json()["probability"] > 0.5


def test_batch_matches_singles(client):
    items = [
        {"context": ["router billing again", "billing refund now"], "candidate": "router refund soon"},
        {"context": [], "candidate": "outage login please"},
        {"context": ["signal signal signal"], "candidate": "completely unrelated words"},
        {"context": ["phone charger battery", "charger battery phone"], "candidate": "battery phone today"},
    ]
    batch = client.post("/score_batch", json={"direction": "fw", "items": items})
    assert batch.status_code == 200
    probabilities = batch.json()["probabilities"]
    assert len(probabilities) == len(items)
    for item, expected in zip(items, probabilities):
        single = client.post("/score", json={"direction": "fw", **item})
        assert abs(single.json()["probability"] - expected) <= 1e-6


def test_batch_preserves_order(client):
    items = [
        {"context": ["router billing"], "candidate": "router refund"},
        {"context": ["outage login"], "candidate": "signal today"},
        {"context": ["phone charger"], "candidate": "battery now"},
    ]
    forward = client.post("/score_batch", json={"direction": "fw", "items": items})
    reversed_ = client.post("/score_batch", json={"direction": "fw", "items": items[::-1]})
    assert forward.json()["probabilities"] == pytest.approx(
        reversed_.json()["probabilities"][::-1], abs=1e-9
    )


def test_repeated_request_is_stateless(client):
    body = {"direction": "fw", "context": ["router billing"], "candidate": "refund order"}
    first = client.post("/score", json=body).json()["probability"]
    second = client.post("/score", json=body).json()["probability"]
    assert first == second


def test_empty_batch(client):
    response = client.post("/score_batch", json={"direction": "fw", "items": []})
    assert response.status_code == 200
    assert response.json() == {"probabilities": []}


def test_truncated_flag_only_when_truncation_happened(scorers):
    squeezed = CheckpointScorer(
        scorers["fw"].model,
        scorers["fw"].encoder.tokenizer,
        dataclasses.replace(scorers["fw"].config, max_seq_length=12),
        scorers["fw"].fingerprint,
    )
    client = TestClient(create_app({"fw": squeezed}), raise_server_exceptions=False)

    short = client.post("/score", json={
        "direction": "fw", "context": ["router"], "candidate": "billing",
    })
    assert set(short.json()) == {"probability"}

    long = client.post("/score", json={
        "direction": "fw",
        "context": ["router billing refund order signal login outage phone"] * 3,
        "candidate": "charger battery screen",
    })
    assert set(long.json()) == {"probability", "truncated"}
    assert long.json()["truncated"] is True

    mixed = client.post("/score_batch", json={
        "direction": "fw",
        "items": [
            {"context": ["router"], "candidate": "billing"},
            {"context": ["router billing refund order signal login outage phone"] * 3,
             "candidate": "charger battery screen"},
        ],
    })
    payload = mixed.json()
    assert set(payload) == {"probabilities", "truncated"}
    assert payload["truncated"] == [False, True]


@pytest.mark.parametrize(
    "body",
    [
        {"direction": "sideways", "context": ["a"], "candidate": "b"},
        {"context": ["a"], "candidate": "b"},
        {"direction": "fw", "context": ["a"]},
        {"direction": "fw", "candidate": "b"},
        {"direction": "fw", "context": "not a list", "candidate": "b"},
        {"direction": "fw", "context": [1, 2], "candidate": "b"},
        {"direction": "fw", "context": ["a"], "candidate": 7},
    ],
)
def test_bad_score_requests_get_400(client, body):
    response = client.post("/score", json=body)
    assert response.status_code == 400
    assert set(response.json()) == {"error"}


def test_malformed_json_gets_400(client):
    response = client.post("/score", content=b"{this is not json",
                           headers={"Content-Type": "application/json"})
    assert response.status_code == 400
    assert set(response.json()) == {"error"}


def test_non_object_body_gets_400(client):
    response = client.post("/score", json=["not", "an", "object"])
    assert response.status_code == 400
    assert set(response.json()) == {"error"}


def test_batch_requires_items_list(client):
    response = client.post("/score_batch", json={"direction": "fw", "items": "nope"})
    assert response.status_code == 400
    assert set(response.json()) == {"error"}
    response = client.post("/score_batch", json={"direction": "fw"})
    assert response.status_code == 400


def test_unknown_paths_get_404(client):
    for method in ("GET", "POST"):
        response = client.request(method, "/no-such-endpoint")
        assert response.status_code == 404
        assert set(response.json()) == {"error"}


def test_scorer_failure_gets_500():
    class Boom:
        model_id = "boom"

        def score_pairs(self, items):
            raise RuntimeError("kaput")

    client = TestClient(create_app({"fw": Boom()}), raise_server_exceptions=False)
    response = client.post("/score", json={
        "direction": "fw", "context": ["a"], "candidate": "b",
    })
    assert response.status_code == 500
    assert set(response.json()) == {"error"}
    batch = client.post("/score_batch", json={"direction": "fw", "items": [
        {"context": ["a"], "candidate": "b"},
    ]})
    assert batch.status_code == 500


def test_app_requires_a_scorer():
    with pytest.raises(ValueError):
        create_app({})


def test_direction_not_hosted_gets_400(scorers):
    client = TestClient(create_app({"fw": scorers["fw"]}), raise_server_exceptions=False)
    response = client.post("/score", json={
        "direction": "bw", "context": ["a"], "candidate": "b",
    })
    assert response.status_code == 400
    assert "bw" in response.json()["error"]
