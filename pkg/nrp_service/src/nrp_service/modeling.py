"""Model loading, checkpoint layout, and the checkpoint-backed scorer.

Checkpoint directory layout (written by training.finetune, read by
CheckpointScorer.load):

    config.json                transformer architecture (HF format)
    model.safetensors          fine-tuned weights
    tokenizer.json             tokenizer (vocabulary embedded)
    tokenizer_config.json      tokenizer settings
    service_config.json        {"fingerprint": ..., "config": {ServiceConfig}}
    training_history.json      step losses, per-epoch validation recall@k,
                               truncated-pair count

The scorer loads the directory read-only and is safe to share across
stateless request handlers; batches are chunked to the configured size.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import torch
from transformers import AutoConfig, AutoModelForSequenceClassification, AutoTokenizer

from nrp_service.config import ServiceConfig
from nrp_service.encoding import PairEncoder

__all__ = [
    "SERVICE_CONFIG_FILE",
    "TRAINING_HISTORY_FILE",
    "load_base_model",
    "save_checkpoint",
    "CheckpointScorer",
]

log = logging.getLogger(__name__)

SERVICE_CONFIG_FILE = "service_config.json"
TRAINING_HISTORY_FILE = "training_history.json"


def load_base_model(model_ref: str):
    """Binary sequence classifier from a model id or local directory.

    Falls back to a randomly initialized model when the reference provides a
    configuration but no weights (offline environments, architecture-only
    test fixtures); the fallback is announced, never silent.
    """
    try:
        return AutoModelForSequenceClassification.from_pretrained(model_ref, num_labels=2)
    except OSError:
        config = AutoConfig.from_pretrained(model_ref, num_labels=2)
        log.warning("no pretrained weights at %s, initializing randomly", model_ref)
        return AutoModelForSequenceClassification.from_config(config)


def save_checkpoint(
    out_dir: str | Path,
    model,
    tokenizer,
    config: ServiceConfig,
    history: dict,
) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    (out / SERVICE_CONFIG_FILE).write_text(
        json.dumps(
            {"fingerprint": config.fingerprint(), "config": asdict(config)},
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    (out / TRAINING_HISTORY_FILE).write_text(
        json.dumps(history, indent=2) + "\n", encoding="utf-8"
    )
    return out


class CheckpointScorer:
    """Read-only scoring handle over a saved checkpoint."""

    def __init__(self, model, tokenizer, config: ServiceConfig, fingerprint: str) -> None:
        self.model = model
        self.config = config
        self.fingerprint = fingerprint
        self.encoder = PairEncoder(tokenizer, config.max_seq_length)
        self.model.eval()

    @classmethod
    def load(cls, checkpoint_dir: str | Path) -> "CheckpointScorer":
        path = Path(checkpoint_dir)
        meta = json.loads((path / SERVICE_CONFIG_FILE).read_text(encoding="utf-8"))
        config = ServiceConfig(**meta["config"])
        tokenizer = AutoTokenizer.from_pretrained(path)
        model = AutoModelForSequenceClassification.from_pretrained(path)
        return cls(model, tokenizer, config, meta["fingerprint"])

    @property
    def direction(self) -> str:
        return self.config.direction

    @property
    def model_id(self) -> str:
        return f"{self.config.model_id}#{self.fingerprint}"

    def score_pairs(
        self, items: Sequence[tuple[Sequence[str], str]]
    ) -> tuple[list[float], list[bool]]:
        """Positive-class probabilities and truncation flags, one per item."""
        encoded = [self.encoder.encode(context, candidate) for context, candidate in items]
        probs: list[float] = []
        with torch.no_grad():
            for start in range(0, len(encoded), self.config.batch_size):
                chunk = encoded[start : start + self.config.batch_size]
                logits = self.model(**self.encoder.collate(chunk)).logits
                probs.extend(torch.softmax(logits, dim=-1)[:, 1].tolist())
        return probs, [p.truncated for p in encoded]

    def score(self, context: Sequence[str], candidate: str) -> tuple[float, bool]:
        probs, flags = self.score_pairs([(context, candidate)])
        return probs[0], flags[0]
