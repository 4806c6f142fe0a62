"""Fine-tuning a binary next-response classifier from triple files.

The positive class probability is p(candidate | context) for the configured
direction. Training is plain cross-entropy over shuffled examples with
linear warmup/decay and gradient clipping; a held-out slice of candidate
groups (or an explicit validation file) is scored for recall@k after every
epoch. Everything is seeded, so a rerun with the same config and files
reproduces the same weights and metrics.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import torch

from nrp_service.config import ServiceConfig
from nrp_service.encoding import PairEncoder
from nrp_service.modeling import load_base_model, save_checkpoint
from nrp_service.triples import Triple, group_triples, read_triples
from transformers import AutoTokenizer

__all__ = ["FinetuneResult", "finetune", "recall_at_k"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FinetuneResult:
    checkpoint_dir: Path
    step_losses: list[float]
    validation_recalls: list[float]  # one value per epoch, empty without validation
    truncated_pairs: int
    fingerprint: str


def recall_at_k(
    model,
    encoder: PairEncoder,
    groups: Sequence[list[Triple]],
    k: int,
    batch_size: int,
) -> float:
    """Fraction of groups whose positive ranks in the top k by probability.

    Candidates are ranked by score descending; ties keep input order.
    """
    if not groups:
        raise ValueError("no groups to evaluate")
    hits = 0
    was_training = model.training
    model.eval()
    with torch.no_grad():
        for group in groups:
            positives = [i for i, t in enumerate(group) if t.label == 1]
            if len(positives) != 1:
                raise ValueError(
                    f"group {group[0].group_id} has {len(positives)} positives, expected 1"
                )
            probs: list[float] = []
            encoded = [encoder.encode(t.context, t.candidate) for t in group]
            for start in range(0, len(encoded), batch_size):
                chunk = encoded[start : start + batch_size]
                logits = model(**encoder.collate(chunk)).logits
                probs.extend(torch.softmax(logits, dim=-1)[:, 1].tolist())
            order = sorted(range(len(group)), key=lambda i: -probs[i])
            if order.index(positives[0]) < k:
                hits += 1
    if was_training:
        model.train()
    return hits / len(groups)


def _learning_rate_schedule(optimizer, total_steps: int, warmup_fraction: float):
    warmup = max(1, int(warmup_fraction * total_steps))

    def factor(step: int) -> float:
        if step < warmup:
            return step / warmup
        return max(0.0, (total_steps - step) / max(1, total_steps - warmup))

    return torch.optim.lr_scheduler.LambdaLR(optimizer, factor)


def finetune(
    triples_path: str | Path,
    config: ServiceConfig,
    out_dir: str | Path,
    validation_path: str | Path | None = None,
) -> FinetuneResult:
    """Train on one direction's triples and save a checkpoint.

    Triples whose direction differs from config.direction are ignored. The
    validation set is the given file when present, otherwise a seeded
    validation_fraction slice of the training groups held out before
    training starts.
    """
    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)

    triples = [t for t in read_triples(triples_path) if t.direction == config.direction]
    if not triples:
        raise ValueError(f"{triples_path} has no triples for direction {config.direction!r}")
    groups = group_triples(triples)

    if validation_path is not None:
        validation_groups = [
            g
            for g in group_triples(read_triples(validation_path)).values()
            if g[0].direction == config.direction
        ]
        train_triples = triples
    else:
        held = int(round(config.validation_fraction * len(groups)))
        held_ids = set(rng.sample(list(groups), held)) if held else set()
        validation_groups = [groups[g] for g in groups if g in held_ids]
        train_triples = [t for t in triples if t.group_id not in held_ids]

    tokenizer = AutoTokenizer.from_pretrained(config.model_id)
    encoder = PairEncoder(tokenizer, config.max_seq_length)
    model = load_base_model(config.model_id)
    model.train()

    encoded = [encoder.encode(t.context, t.candidate) for t in train_triples]
    truncated_pairs = sum(1 for e in encoded if e.truncated)
    if truncated_pairs:
        log.warning(
            "%d of %d training pairs exceed max_seq_length=%d and were truncated",
            truncated_pairs,
            len(encoded),
            config.max_seq_length,
        )
    labels = [t.label for t in train_triples]

    steps_per_epoch = (len(encoded) + config.batch_size - 1) // config.batch_size
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    scheduler = _learning_rate_schedule(
        optimizer, steps_per_epoch * config.epochs, config.warmup_fraction
    )

    step_losses: list[float] = []
    validation_recalls: list[float] = []
    for epoch in range(1, config.epochs + 1):
        order = list(range(len(encoded)))
        rng.shuffle(order)
        epoch_losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            inputs = encoder.collate([encoded[i] for i in batch])
            inputs["labels"] = torch.tensor([labels[i] for i in batch], dtype=torch.long)
            loss = model(**inputs).loss
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), config.max_grad_norm)
            optimizer.step()
            scheduler.step()
            optimizer.zero_grad()
            epoch_losses.append(loss.item())
        step_losses.extend(epoch_losses)
        mean_loss = sum(epoch_losses) / len(epoch_losses)
        if validation_groups:
            recall = recall_at_k(
                model, encoder, validation_groups, config.validation_recall_k, config.batch_size
            )
            validation_recalls.append(recall)
            log.info(
                "epoch %d/%d: mean loss %.4f, validation recall@%d %.4f",
                epoch,
                config.epochs,
                mean_loss,
                config.validation_recall_k,
                recall,
            )
        else:
            log.info("epoch %d/%d: mean loss %.4f (no validation groups)", epoch, config.epochs, mean_loss)

    model.eval()
    history = {
        "step_losses": step_losses,
        "validation_recall_k": config.validation_recall_k,
        "validation_recalls": validation_recalls,
        "validation_groups": len(validation_groups),
        "train_examples": len(encoded),
        "truncated_pairs": truncated_pairs,
    }
    checkpoint = save_checkpoint(out_dir, model, tokenizer, config, history)
    return FinetuneResult(
        checkpoint_dir=checkpoint,
        step_losses=step_losses,
        validation_recalls=validation_recalls,
        truncated_pairs=truncated_pairs,
        fingerprint=config.fingerprint(),
    )
