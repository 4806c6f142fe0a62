"""Service configuration and checkpoint fingerprinting.

A ServiceConfig pins everything that affects a fine-tuning run or a serving
process: base model, sequence budget, optimization hyperparameters, scoring
direction, and listen address. Its fingerprint (a short digest of the
canonical JSON form) is written into every checkpoint so a served model can
always be traced back to the exact configuration that produced it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

__all__ = ["DIRECTIONS", "ServiceConfig"]

DIRECTIONS = ("fw", "bw")


@dataclass(frozen=True)
class ServiceConfig:
    model_id: str = "bert-base-cased"
    max_seq_length: int = 512
    learning_rate: float = 2e-5
    epochs: int = 5
    batch_size: int = 24
    direction: str = "fw"
    host: str = "127.0.0.1"
    port: int = 8400
    seed: int = 13
    validation_fraction: float = 0.1
    validation_recall_k: int = 1
    warmup_fraction: float = 0.1
    max_grad_norm: float = 1.0

    def __post_init__(self) -> None:
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.max_seq_length < 8:
            raise ValueError(f"max_seq_length must be >= 8, got {self.max_seq_length}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError(
                f"validation_fraction must be in [0, 1), got {self.validation_fraction}"
            )
        if self.validation_recall_k < 1:
            raise ValueError(f"validation_recall_k must be >= 1, got {self.validation_recall_k}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError(f"warmup_fraction must be in [0, 1), got {self.warmup_fraction}")
        if self.max_grad_norm <= 0:
            raise ValueError(f"max_grad_norm must be positive, got {self.max_grad_norm}")

    @property
    def listen_address(self) -> str:
        return f"{self.host}:{self.port}"

    def fingerprint(self) -> str:
        """Short stable digest of the canonical JSON form."""
        canonical = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "ServiceConfig":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)
