"""Next-response prediction: triples, scorers, influence, and recall@k.

A ResponseScorer estimates p(candidate | context) for a direction (forward:
candidate follows the context; backward: candidate precedes it). The
built-in scorer is a deterministic logistic model over lexical features, so
the whole pipeline runs without a neural runtime; remote_scorer speaks the
HTTP wire protocol served by the neural service or by serve_stub.
"""

from __future__ import annotations

import json
import logging
import random
import time
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from math import sqrt
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import requests

from convsum.corpus import Dialog
from convsum.textproc import rouge_tokenize

__all__ = [
    "Direction",
    "NrpTriple",
    "ResponseScorer",
    "InfluenceScore",
    "ScorerError",
    "TransportError",
    "ProtocolError",
    "build_nrp_triples",
    "BuiltinScorer",
    "train_builtin_scorer",
    "RemoteScorer",
    "remote_scorer",
    "sentence_influence_scores",
    "evaluate_recall_at_k",
    "save_triples",
    "load_triples",
    "group_triples",
    "serve_stub",
    "load_golden_transcript",
    "replay_transcript",
]

log = logging.getLogger(__name__)


class Direction(str, Enum):
    FORWARD = "fw"
    BACKWARD = "bw"


@dataclass(frozen=True)
class NrpTriple:
    group_id: str
    direction: Direction
    context: tuple[str, ...]
    candidate: str
    label: int  # 1 = true response, 0 = sampled negative


class ScorerError(RuntimeError):
    """Base class for scorer failures."""


class TransportError(ScorerError):
    """Network-level failure after exhausting retries."""


class ProtocolError(ScorerError):
    """The service answered outside the wire contract."""


class ResponseScorer(ABC):
    """Probability oracle p(candidate | context); deterministic per instance."""

    direction: Direction
    shareable: bool = True  # safe to use from multiple workers

    @abstractmethod
    def score(self, context: Sequence[str], candidate: str) -> float:
        raise NotImplementedError

    def score_batch(self, items: Sequence[tuple[Sequence[str], str]]) -> list[float]:
        return [self.score(context, candidate) for context, candidate in items]


def _dialog_units(dialog: Dialog, unit: str) -> list[str]:
    if unit == "sentence":
        return [s.text for s in dialog.sentences]
    if unit == "utterance":
        return [u.text for u in dialog.utterances]
    raise ValueError(f"unknown unit {unit!r}")


def build_nrp_triples(
    dialogs: Sequence[Dialog],
    k_negatives: int = 5,
    direction: Direction = Direction.FORWARD,
    seed: int = 0,
    unit: str = "sentence",
) -> list[NrpTriple]:
    """One group per split point: the true response plus k negatives.

    Forward groups take context s_1..s_j with positive s_{j+1}; backward
    groups take context s_{j+1}..s_N with positive s_j. Negatives are drawn
    uniformly from other dialogs' units, never textually equal to the
    positive, and each group's candidate order is shuffled so a constant
    scorer gains nothing from position.
    """
    if len(dialogs) < 2:
        raise ValueError("need at least 2 dialogs to sample negatives from")
    units_by_dialog = [(d.dialog_id, _dialog_units(d, unit)) for d in dialogs]
    rng = random.Random(seed)
    triples: list[NrpTriple] = []
    for d_idx, (dialog_id, units) in enumerate(units_by_dialog):
        if len(units) < 2:
            continue
        pool = [
            text
            for other_idx, (_, other_units) in enumerate(units_by_dialog)
            if other_idx != d_idx
            for text in other_units
        ]
        for j in range(1, len(units)):
            if direction is Direction.FORWARD:
                context = tuple(units[:j])
                positive = units[j]
            else:
                context = tuple(units[j:])
                positive = units[j - 1]
            eligible = [text for text in pool if text != positive]
            if len(eligible) < k_negatives:
                raise ValueError(
                    f"only {len(eligible)} negative candidates available, "
                    f"need {k_negatives}"
                )
            group_id = f"{dialog_id}:{direction.value}:{j}"
            group = [
                NrpTriple(group_id, direction, context, positive, 1)
            ] + [
                NrpTriple(group_id, direction, context, text, 0)
                for text in rng.sample(eligible, k_negatives)
            ]
            rng.shuffle(group)
            triples.extend(group)
    return triples


def group_triples(triples: Iterable[NrpTriple]) -> dict[str, list[NrpTriple]]:
    """Group by group_id, preserving input order within each group."""
    groups: dict[str, list[NrpTriple]] = {}
    for triple in triples:
        groups.setdefault(triple.group_id, []).append(triple)
    return groups


def save_triples(triples: Iterable[NrpTriple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(
                json.dumps(
                    {
                        "group_id": t.group_id,
                        "direction": t.direction.value,
                        "context": list(t.context),
                        "candidate": t.candidate,
                        "label": t.label,
                    },
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def load_triples(path: str | Path) -> list[NrpTriple]:
    triples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            triples.append(
                NrpTriple(
                    group_id=str(obj["group_id"]),
                    direction=Direction(obj["direction"]),
                    context=tuple(obj["context"]),
                    candidate=obj["candidate"],
                    label=int(obj["label"]),
                )
            )
    return triples


_CUSTOMER_MARK = "@Customer_id"


def _speaker_signature(text: str) -> int:
    # Masked mentions give a crude side indicator: agent turns address the
    # customer mask, customer turns do not.
    return 1 if _CUSTOMER_MARK in text else 0


def _cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(count * b[token] for token, count in a.items())
    if dot == 0:
        return 0.0
    norm_a = sqrt(sum(c * c for c in a.values()))
    norm_b = sqrt(sum(c * c for c in b.values()))
    return dot / (norm_a * norm_b)


def _features(context: Sequence[str], candidate: str) -> np.ndarray:
    """Fixed lexical features shared by training and scoring."""
    cand_tokens = rouge_tokenize(candidate)
    last_tokens = rouge_tokenize(context[-1]) if context else []
    ctx_tokens = [t for sentence in context for t in rouge_tokenize(sentence)]

    cand_set = set(cand_tokens)
    overlap_last = (
        len(cand_set & set(last_tokens)) / len(cand_set) if cand_set else 0.0
    )
    cos_ctx = _cosine(Counter(cand_tokens), Counter(ctx_tokens))
    mean_len = len(ctx_tokens) / len(context) if context else 0.0
    if cand_tokens and mean_len > 0:
        ratio = min(len(cand_tokens), mean_len) / max(len(cand_tokens), mean_len)
    else:
        ratio = 0.0
    alternation = (
        1.0
        if context and _speaker_signature(candidate) != _speaker_signature(context[-1])
        else 0.0
    )
    return np.array([overlap_last, cos_ctx, ratio, alternation])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class BuiltinScorer(ResponseScorer):
    """Logistic model over the fixed lexical features."""

    shareable = True  # read-only after training
    model_id = "builtin-lexical-logistic"

    def __init__(self, direction: Direction, weights: np.ndarray, bias: float,
                 loss_history: list[float]) -> None:
        self.direction = direction
        self.weights = weights
        self.bias = bias
        self.loss_history = loss_history

    def score(self, context: Sequence[str], candidate: str) -> float:
        z = float(self.weights @ _features(context, candidate) + self.bias)
        return float(_sigmoid(np.array([z]))[0])


def train_builtin_scorer(
    triples: Sequence[NrpTriple],
    direction: Direction = Direction.FORWARD,
    seed: int = 0,
    learning_rate: float = 0.5,
    epochs: int = 500,
) -> BuiltinScorer:
    """Full-batch gradient descent on the log loss; bit-deterministic.

    The seed is accepted for interface stability; training itself is
    deterministic because the start point is fixed at zero.
    """
    used = [t for t in triples if t.direction is direction]
    labels = np.array([t.label for t in used], dtype=np.float64)
    if len(set(labels.tolist())) < 2:
        raise ValueError("training triples must contain both labels")
    features = np.stack([_features(t.context, t.candidate) for t in used])

    weights = np.zeros(features.shape[1])
    bias = 0.0
    losses: list[float] = []
    n = len(used)
    for _ in range(epochs):
        probs = _sigmoid(features @ weights + bias)
        eps = 1e-12
        loss = float(
            -np.mean(labels * np.log(probs + eps) + (1 - labels) * np.log(1 - probs + eps))
        )
        losses.append(loss)
        error = probs - labels
        weights -= learning_rate * (features.T @ error) / n
        bias -= learning_rate * float(error.mean())
    return BuiltinScorer(direction, weights, bias, losses)


class RemoteScorer(ResponseScorer):
    """HTTP client for the wire protocol; retries transient failures."""

    shareable = True

    def __init__(
        self,
        endpoint: str,
        direction: Direction,
        retries: int = 2,
        timeout: float = 10.0,
        session: requests.Session | None = None,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.direction = direction
        self.retries = retries
        self.timeout = timeout
        self.session = session or requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = self.session.post(
                    f"{self.endpoint}{path}", json=payload, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                if attempt < self.retries:
                    time.sleep(0.1 * (attempt + 1))
                continue
            if 500 <= response.status_code < 600 and attempt < self.retries:
                last_error = ProtocolError(f"server error {response.status_code}")
                time.sleep(0.1 * (attempt + 1))
                continue
            if response.status_code != 200:
                raise ProtocolError(
                    f"{path} returned {response.status_code}: {response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"{path} returned non-JSON body") from exc
        raise TransportError(f"{path} failed after {self.retries + 1} attempts: {last_error}")

    @staticmethod
    def _check_probability(value: object) -> float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ProtocolError(f"probability is not a number: {value!r}")
        p = float(value)
        if not 0.0 <= p <= 1.0:
            raise ProtocolError(f"probability {p} outside [0, 1]")
        return p

    def score(self, context: Sequence[str], candidate: str) -> float:
        body = self._post(
            "/score",
            {
                "direction": self.direction.value,
                "context": list(context),
                "candidate": candidate,
            },
        )
        if "probability" not in body:
            raise ProtocolError("response missing 'probability'")
        return self._check_probability(body["probability"])

    def score_batch(self, items: Sequence[tuple[Sequence[str], str]]) -> list[float]:
        if not items:
            return []
        body = self._post(
            "/score_batch",
            {
                "direction": self.direction.value,
                "items": [
                    {"context": list(context), "candidate": candidate}
                    for context, candidate in items
                ],
            },
        )
        probs = body.get("probabilities")
        if not isinstance(probs, list) or len(probs) != len(items):
            raise ProtocolError(
                f"expected {len(items)} probabilities, got {probs!r}"
            )
        return [self._check_probability(p) for p in probs]

    def health(self) -> dict:
        try:
            response = self.session.get(f"{self.endpoint}/health", timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"/health unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ProtocolError(f"/health returned {response.status_code}")
        body = response.json()
        if body.get("status") != "ok" or "model_id" not in body:
            raise ProtocolError(f"unexpected /health body: {body!r}")
        return body


def remote_scorer(
    endpoint: str, direction: Direction, retries: int = 2, timeout: float = 10.0
) -> RemoteScorer:
    return RemoteScorer(endpoint, direction, retries=retries, timeout=timeout)


@dataclass(frozen=True)
class InfluenceScore:
    global_index: int
    drop_fw: float
    drop_bw: float

    @property
    def averaged(self) -> float:
        return (self.drop_fw + self.drop_bw) / 2.0


def sentence_influence_scores(
    dialog: Dialog,
    fw_scorer: ResponseScorer,
    bw_scorer: ResponseScorer | None = None,
) -> list[InfluenceScore]:
    """Leave-one-out probability drops in both directions, one per sentence.

    Forward: the last sentence is the response and every earlier sentence is
    removed in turn from the context. Backward: the first sentence is the
    target and later sentences are removed in turn. A sentence outside a
    pass's context scores 0 for that pass.
    """
    if bw_scorer is None:
        bw_scorer = fw_scorer
    units = [s.text for s in dialog.sentences]
    n = len(units)
    if n < 3:
        raise ValueError(f"dialog {dialog.dialog_id} has {n} sentences, need >= 3")

    fw_context = units[:-1]
    response = units[-1]
    fw_requests: list[tuple[Sequence[str], str]] = [(fw_context, response)]
    for i in range(n - 1):
        fw_requests.append((fw_context[:i] + fw_context[i + 1 :], response))
    fw_probs = fw_scorer.score_batch(fw_requests)
    drops_fw = [fw_probs[0] - p for p in fw_probs[1:]] + [0.0]

    bw_context = units[1:]
    target = units[0]
    bw_requests: list[tuple[Sequence[str], str]] = [(bw_context, target)]
    for i in range(n - 1):
        bw_requests.append((bw_context[:i] + bw_context[i + 1 :], target))
    bw_probs = bw_scorer.score_batch(bw_requests)
    drops_bw = [0.0] + [bw_probs[0] - p for p in bw_probs[1:]]

    return [
        InfluenceScore(global_index=i, drop_fw=drops_fw[i], drop_bw=drops_bw[i])
        for i in range(n)
    ]


def evaluate_recall_at_k(
    scorer: ResponseScorer,
    triples: Iterable[NrpTriple],
    ks: Sequence[int] = (1, 2, 5),
) -> dict[int, float]:
    """Fraction of groups whose positive ranks within the top k.

    Candidates are ranked by score descending; ties keep input order.
    """
    groups = group_triples(triples)
    if not groups:
        raise ValueError("no triples to evaluate")
    ranks: list[int] = []
    for group_id, group in groups.items():
        positives = [i for i, t in enumerate(group) if t.label == 1]
        if len(positives) != 1:
            raise ValueError(
                f"group {group_id} has {len(positives)} positives, expected 1"
            )
        scores = scorer.score_batch([(t.context, t.candidate) for t in group])
        order = sorted(range(len(group)), key=lambda i: -scores[i])
        ranks.append(order.index(positives[0]) + 1)
    return {k: sum(1 for r in ranks if r <= k) / len(ranks) for k in ks}


class _StubHandler(BaseHTTPRequestHandler):
    scorers: Mapping[str, ResponseScorer] = {}
    model_id = "stub"

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        log.debug("stub server: " + fmt, *args)

    def _send_json(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self) -> None:
        if self.path == "/health":
            self._send_json(200, {"status": "ok", "model_id": self.model_id})
        else:
            self._send_json(404, {"error": f"unknown path {self.path}"})

    def do_POST(self) -> None:
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
            direction = payload["direction"]
            scorer = self.scorers.get(direction)
            if scorer is None:
                self._send_json(400, {"error": f"unknown direction {direction!r}"})
                return
            if self.path == "/score":
                p = scorer.score(payload["context"], payload["candidate"])
                self._send_json(200, {"probability": p})
            elif self.path == "/score_batch":
                items = [(item["context"], item["candidate"]) for item in payload["items"]]
                self._send_json(200, {"probabilities": scorer.score_batch(items)})
            else:
                self._send_json(404, {"error": f"unknown path {self.path}"})
        except (KeyError, ValueError, TypeError) as exc:
            self._send_json(400, {"error": f"bad request: {exc}"})


def serve_stub(
    scorers: Mapping[Direction, ResponseScorer],
    host: str = "127.0.0.1",
    port: int = 0,
) -> ThreadingHTTPServer:
    """HTTP stub implementing the wire protocol over the given scorers.

    Returns the bound server; run serve_forever() in a thread and call
    shutdown() when done. Port 0 picks a free port (server.server_port).
    """
    handler = type(
        "Handler",
        (_StubHandler,),
        {
            "scorers": {d.value: s for d, s in scorers.items()},
            "model_id": getattr(
                next(iter(scorers.values())), "model_id", "stub"
            ),
        },
    )
    return ThreadingHTTPServer((host, port), handler)


def load_golden_transcript() -> dict:
    """The packaged protocol conformance transcript.

    Any server claiming to implement the wire protocol must replay it
    cleanly; see replay_transcript.
    """
    path = Path(__file__).parent / "data" / "golden_transcripts.json"
    return json.loads(path.read_text(encoding="utf-8"))


def replay_transcript(transcript: dict, send) -> list[str]:
    """Replay a conformance transcript against a server.

    send(method, path, body_bytes_or_None) must return (status, text).
    Returns a list of failure descriptions, empty when conformant.
    """
    failures: list[str] = []
    for entry in transcript["entries"]:
        name = entry["name"]
        if "raw_body" in entry:
            body = entry["raw_body"].encode("utf-8")
        elif entry.get("body") is not None:
            body = json.dumps(entry["body"]).encode("utf-8")
        else:
            body = None
        status, text = send(entry["method"], entry["path"], body)
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
            failures.append(
                f"{name}: keys {sorted(payload)} != {sorted(expect['keys'])}"
            )
            continue
        for key, value in expect.get("values", {}).items():
            if payload.get(key) != value:
                failures.append(f"{name}: {key}={payload.get(key)!r} != {value!r}")
        if "probability" in payload:
            p = payload["probability"]
            if isinstance(p, bool) or not isinstance(p, (int, float)):
                failures.append(f"{name}: probability has wrong type")
            elif not 0.0 <= p <= 1.0:
                failures.append(f"{name}: probability {p} outside [0, 1]")
        if "probabilities" in payload:
            probs = payload["probabilities"]
            items = entry["body"]["items"]
            if not isinstance(probs, list) or len(probs) != len(items):
                failures.append(f"{name}: probabilities length mismatch")
            else:
                for p in probs:
                    if isinstance(p, bool) or not isinstance(p, (int, float)):
                        failures.append(f"{name}: probabilities entry has wrong type")
                        break
                    if not 0.0 <= p <= 1.0:
                        failures.append(f"{name}: probability {p} outside [0, 1]")
                        break
                tolerance = entry.get("batch_singles_tolerance")
                if tolerance is not None:
                    for i, item in enumerate(items):
                        single = {
                            "direction": entry["body"]["direction"],
                            "context": item["context"],
                            "candidate": item["candidate"],
                        }
                        s_status, s_text = send(
                            "POST", "/score", json.dumps(single).encode("utf-8")
                        )
                        if s_status != 200:
                            failures.append(f"{name}: single #{i} status {s_status}")
                            continue
                        s_p = json.loads(s_text)["probability"]
                        if abs(s_p - probs[i]) > tolerance:
                            failures.append(
                                f"{name}: batch[{i}]={probs[i]} vs single={s_p}"
                            )
    return failures
