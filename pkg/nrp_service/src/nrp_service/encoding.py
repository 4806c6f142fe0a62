"""Sequence-pair encoding: "[CLS] context [SEP] candidate [SEP]".

The context is the first segment, the candidate the second. When the pair
exceeds the sequence budget, whole context sentences are dropped from the
start (recency matters most for next-response plausibility) before anything
else; only a candidate that cannot fit even alone is tail-truncated. Both
cases set the truncated flag and never raise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import torch

__all__ = ["EncodedPair", "PairEncoder"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodedPair:
    input_ids: list[int]
    token_type_ids: list[int]
    truncated: bool


class PairEncoder:
    """Wraps a BERT-style tokenizer with the sentence-level truncation policy."""

    def __init__(self, tokenizer, max_seq_length: int) -> None:
        self.tokenizer = tokenizer
        self.max_seq_length = max_seq_length
        self.cls_id = tokenizer.cls_token_id
        self.sep_id = tokenizer.sep_token_id
        self.pad_id = tokenizer.pad_token_id

    def _word_ids(self, text: str) -> list[int]:
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def encode(self, context: Sequence[str], candidate: str) -> EncodedPair:
        candidate_ids = self._word_ids(candidate)
        sentence_ids = [self._word_ids(s) for s in context]
        budget = self.max_seq_length - 3  # [CLS] + two [SEP]
        truncated = False
        while sentence_ids and sum(map(len, sentence_ids)) + len(candidate_ids) > budget:
            sentence_ids.pop(0)
            truncated = True
        if len(candidate_ids) > budget:
            candidate_ids = candidate_ids[:budget]
            truncated = True
        context_ids = [i for ids in sentence_ids for i in ids]
        input_ids = [self.cls_id] + context_ids + [self.sep_id] + candidate_ids + [self.sep_id]
        token_type_ids = [0] * (len(context_ids) + 2) + [1] * (len(candidate_ids) + 1)
        return EncodedPair(input_ids, token_type_ids, truncated)

    def collate(self, pairs: Sequence[EncodedPair]) -> dict[str, torch.Tensor]:
        """Pad a list of encoded pairs into model-ready tensors."""
        width = max(len(p.input_ids) for p in pairs)
        input_ids = torch.full((len(pairs), width), self.pad_id, dtype=torch.long)
        token_type_ids = torch.zeros((len(pairs), width), dtype=torch.long)
        attention_mask = torch.zeros((len(pairs), width), dtype=torch.long)
        for row, p in enumerate(pairs):
            n = len(p.input_ids)
            input_ids[row, :n] = torch.tensor(p.input_ids, dtype=torch.long)
            token_type_ids[row, :n] = torch.tensor(p.token_type_ids, dtype=torch.long)
            attention_mask[row, :n] = 1
        return {
            "input_ids": input_ids,
            "token_type_ids": token_type_ids,
            "attention_mask": attention_mask,
        }
