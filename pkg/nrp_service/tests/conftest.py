"""Shared fixtures: an offline tiny base model and synthetic triple files.

The base model directory holds a small random-init BERT architecture plus a
closed wordpiece vocabulary covering the synthetic corpus, so every test
runs without network access or pretrained weights. Synthetic dialogs give
each conversation a two-word topic signature present in every sentence;
the true next sentence therefore shares rare tokens with its context while
negatives (sampled from other dialogs) usually do not.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest
import transformers
from transformers import BertConfig

from nrp_service.config import ServiceConfig
from nrp_service.training import finetune

transformers.utils.logging.disable_progress_bar()

FILLER_WORDS = [
    "please", "still", "again", "today", "thanks", "checking", "team",
    "update", "issue", "waiting", "sorry", "confirm", "now", "soon",
    "help", "done", "yet", "really", "quick", "fine",
]
TOPIC_WORDS = [
    "router", "billing", "laptop", "refund", "outage", "login", "shipping",
    "warranty", "phone", "tablet", "modem", "console", "account", "booking",
    "upgrade", "signal", "charger", "battery", "screen", "order",
    "printer", "camera", "speaker", "headset", "monitor", "keyboard",
    "mouse", "cable", "antenna", "firmware", "coupon", "invoice",
    "deposit", "voucher", "airline", "hotel", "luggage", "ticket",
    "parcel", "courier",
]


def make_topic_dialogs(count: int, seed: int) -> list[list[str]]:
    """Eight-sentence dialogs, each sentence carrying the dialog's topic pair."""
    rng = random.Random(seed)
    dialogs = []
    for _ in range(count):
        topic = rng.sample(TOPIC_WORDS, 2)
        sentences = []
        for _ in range(8):
            words = list(topic) + [rng.choice(topic) for _ in range(2)]
            words += [rng.choice(FILLER_WORDS) for _ in range(2)]
            rng.shuffle(words)
            sentences.append(" ".join(words))
        dialogs.append(sentences)
    return dialogs


def make_triples(
    dialogs: list[list[str]],
    lo: int,
    hi: int,
    *,
    direction: str = "fw",
    k_negatives: int = 9,
    split_points: int | None = None,
    repeats: int = 1,
    seed: int = 0,
) -> list[dict]:
    """Candidate groups for dialogs[lo:hi]; negatives come from other dialogs.

    split_points=None uses every split position; repeats emits that many
    groups (fresh negatives each) per position.
    """
    rng = random.Random(seed)
    rows = []
    for d in range(lo, hi):
        sentences = dialogs[d]
        positions = list(range(1, len(sentences) - (1 if direction == "bw" else 0)))
        if split_points is not None:
            positions = rng.sample(positions, split_points)
        for j in positions:
            if direction == "fw":
                context, positive = sentences[:j], sentences[j]
            else:
                context, positive = sentences[j + 1 :], sentences[j]
            for r in range(repeats):
                entries = [(positive, 1)]
                while len(entries) < k_negatives + 1:
                    other = rng.randrange(len(dialogs))
                    if other == d:
                        continue
                    entries.append((dialogs[other][rng.randrange(8)], 0))
                rng.shuffle(entries)
                for candidate, label in entries:
                    rows.append(
                        {
                            "group_id": f"d{d}:{direction}:{j}:{r}",
                            "direction": direction,
                            "context": context,
                            "candidate": candidate,
                            "label": label,
                        }
                    )
    return rows


def write_triples(rows: list[dict], path: Path) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> Path:
    """Architecture-only base model: config + vocabulary, no weights."""
    path = tmp_path_factory.mktemp("tiny-base")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += sorted(set(FILLER_WORDS + TOPIC_WORDS))
    (path / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    (path / "tokenizer_config.json").write_text(
        json.dumps({"tokenizer_class": "BertTokenizerFast", "do_lower_case": False}),
        encoding="utf-8",
    )
    BertConfig(
        vocab_size=len(vocab),
        hidden_size=64,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=128,
        max_position_embeddings=512,
    ).save_pretrained(path)
    return path


def tiny_config(tiny_model_dir: Path, **overrides) -> ServiceConfig:
    """Desk-scale training config; the raised learning rate suits the
    randomly initialized tiny model (the production default stays 2e-5)."""
    base = {
        "model_id": str(tiny_model_dir),
        "max_seq_length": 96,
        "learning_rate": 1e-3,
        "epochs": 12,
        "batch_size": 8,
        "direction": "fw",
        "seed": 13,
        "validation_fraction": 0.1,
        "warmup_fraction": 0.2,
    }
    base.update(overrides)
    return ServiceConfig(**base)


@pytest.fixture(scope="session")
def smoke_rows() -> list[dict]:
    dialogs = make_topic_dialogs(6, seed=5)
    return make_triples(dialogs, 0, 5, split_points=2, k_negatives=4, seed=6)


@pytest.fixture(scope="session")
def smoke_triples_path(tmp_path_factory, smoke_rows) -> Path:
    return write_triples(smoke_rows, tmp_path_factory.mktemp("smoke") / "triples.jsonl")


@pytest.fixture(scope="session")
def served_checkpoints(tmp_path_factory, tiny_model_dir) -> dict:
    """One small fine-tuned checkpoint per direction, plus a training
    positive for each (for overfit assertions)."""
    root = tmp_path_factory.mktemp("checkpoints")
    dialogs = make_topic_dialogs(6, seed=21)
    out = {}
    for direction, seed in (("fw", 22), ("bw", 23)):
        rows = make_triples(
            dialogs, 0, 6, direction=direction, split_points=2,
            k_negatives=2, repeats=2, seed=seed,
        )
        path = write_triples(rows, root / f"{direction}.jsonl")
        # overfit on purpose: every group trains, enough epochs to push
        # training positives well past 0.5
        config = tiny_config(
            tiny_model_dir,
            direction=direction,
            epochs=25,
            learning_rate=2e-3,
            validation_fraction=0.0,
            warmup_fraction=0.1,
        )
        result = finetune(path, config, root / direction)
        positive = next(r for r in rows if r["label"] == 1)
        out[direction] = {
            "checkpoint": result.checkpoint_dir,
            "positive": positive,
            "result": result,
        }
    return out
