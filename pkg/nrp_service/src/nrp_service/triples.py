"""Reader for the next-response-prediction triple file format.

One JSON object per line with keys group_id, direction, context (list of
sentences), candidate, and label (1 = true response, 0 = sampled negative).
A group shares a group_id and holds one positive plus its negatives; rank
order within a group follows file order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from nrp_service.config import DIRECTIONS

__all__ = ["Triple", "read_triples", "group_triples"]


@dataclass(frozen=True)
class Triple:
    group_id: str
    direction: str
    context: tuple[str, ...]
    candidate: str
    label: int

    def __post_init__(self) -> None:
        if self.direction not in DIRECTIONS:
            raise ValueError(
                f"group {self.group_id}: direction must be one of {DIRECTIONS}, "
                f"got {self.direction!r}"
            )
        if self.label not in (0, 1):
            raise ValueError(f"group {self.group_id}: label must be 0 or 1, got {self.label}")


def read_triples(path: str | Path) -> list[Triple]:
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                triple = Triple(
                    group_id=str(obj["group_id"]),
                    direction=str(obj["direction"]),
                    context=tuple(str(s) for s in obj["context"]),
                    candidate=str(obj["candidate"]),
                    label=int(obj["label"]),
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad triple: {exc}") from exc
            triples.append(triple)
    return triples


def group_triples(triples: Iterable[Triple]) -> dict[str, list[Triple]]:
    """Group by group_id, preserving input order within each group."""
    groups: dict[str, list[Triple]] = {}
    for triple in triples:
        groups.setdefault(triple.group_id, []).append(triple)
    return groups
