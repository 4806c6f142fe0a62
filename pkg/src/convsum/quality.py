"""Quality control over annotation sets.

Extractive summaries are discarded for being a single sentence, covering
only one speaker side, or opening with an agent sentence. Abstractive
summaries repeated across dialogs by the same annotator are near-duplicate
flagged via ROUGE-L F over normalized tokens. Annotator conciseness is
measured with an adapted Jaccard that divides by |A| instead of the union,
and inter-annotator agreement with pairwise unweighted Cohen's kappa.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from convsum.corpus import AnnotationSet, Dialog, Speaker
from convsum.rouge import RougeConfig, rouge_l
from convsum.textproc import normalize, rouge_tokenize

__all__ = [
    "DiscardReason",
    "DiscardRecord",
    "AnnotatorStats",
    "QcReport",
    "FlaggedPair",
    "KappaReport",
    "adapted_jaccard",
    "filter_extractive",
    "detect_repeated_abstractive",
    "run_qc",
    "pairwise_kappa",
]

log = logging.getLogger(__name__)


class DiscardReason(str, Enum):
    ONE_SENTENCE = "OneSentence"
    ONE_SIDE_ONLY = "OneSideOnly"
    STARTS_WITH_AGENT = "StartsWithAgent"
    REPEATED_ABSTRACTIVE = "RepeatedAbstractive"


@dataclass(frozen=True)
class DiscardRecord:
    dialog_id: str
    annotator_id: str
    reason: DiscardReason


@dataclass
class AnnotatorStats:
    n_annotations: int
    n_discarded: int
    mean_adapted_jaccard: float | None


@dataclass
class QcReport:
    kept: int
    discarded: list[DiscardRecord]
    per_annotator: dict[str, AnnotatorStats]


def adapted_jaccard(a: frozenset[int] | set[int], others_union: frozenset[int] | set[int]) -> float:
    """|a intersect union| / |a|; punishes over-selection by dividing by |a|."""
    if not a:
        raise ValueError("the annotator's selection must be non-empty")
    return len(set(a) & set(others_union)) / len(a)


def _extractive_reason(dialog: Dialog, extractive: frozenset[int]) -> DiscardReason | None:
    if len(extractive) <= 1:
        return DiscardReason.ONE_SENTENCE
    sentences = dialog.sentences
    speakers = {sentences[i].speaker for i in extractive}
    if len(speakers) == 1:
        return DiscardReason.ONE_SIDE_ONLY
    if sentences[min(extractive)].speaker is Speaker.AGENT:
        return DiscardReason.STARTS_WITH_AGENT
    return None


def _annotator_stats(
    pairs: Sequence[tuple[Dialog, AnnotationSet]],
    discarded: Sequence[DiscardRecord],
) -> dict[str, AnnotatorStats]:
    discarded_by = Counter(r.annotator_id for r in discarded)
    counts: Counter = Counter()
    jaccards: dict[str, list[float]] = defaultdict(list)
    for dialog, annotation_set in pairs:
        for annotation in annotation_set.annotations:
            counts[annotation.annotator_id] += 1
            if not annotation.extractive:
                continue
            others: set[int] = set()
            for other in annotation_set.annotations:
                if other.annotator_id != annotation.annotator_id:
                    others |= set(other.extractive)
            if len(annotation_set.annotations) > 1:
                jaccards[annotation.annotator_id].append(
                    adapted_jaccard(annotation.extractive, others)
                )
    return {
        annotator: AnnotatorStats(
            n_annotations=counts[annotator],
            n_discarded=discarded_by.get(annotator, 0),
            mean_adapted_jaccard=(
                sum(values) / len(values)
                if (values := jaccards.get(annotator))
                else None
            ),
        )
        for annotator in sorted(counts)
    }


def filter_extractive(pairs: Sequence[tuple[Dialog, AnnotationSet]]) -> QcReport:
    """Apply the three extractive discard rules; see module docstring."""
    discarded: list[DiscardRecord] = []
    total = 0
    for dialog, annotation_set in pairs:
        for annotation in annotation_set.annotations:
            total += 1
            reason = _extractive_reason(dialog, annotation.extractive)
            if reason is not None:
                discarded.append(
                    DiscardRecord(dialog.dialog_id, annotation.annotator_id, reason)
                )
    return QcReport(
        kept=total - len(discarded),
        discarded=discarded,
        per_annotator=_annotator_stats(pairs, discarded),
    )


@dataclass(frozen=True)
class FlaggedPair:
    annotator_id: str
    dialog_id_a: str
    dialog_id_b: str
    similarity: float


_NEAR_DUP_CONFIG = RougeConfig(stem=False)


def _text_similarity(a: str, b: str) -> float:
    tokens_a = rouge_tokenize(normalize(a))
    tokens_b = rouge_tokenize(normalize(b))
    return rouge_l([tokens_a], [[tokens_b]], _NEAR_DUP_CONFIG).f


def detect_repeated_abstractive(
    annotation_sets: Iterable[AnnotationSet],
    similarity_threshold: float = 0.9,
) -> list[FlaggedPair]:
    """Per annotator, flag cross-dialog abstractive summaries whose ROUGE-L F
    exceeds the threshold; exact duplicates are flagged regardless."""
    by_annotator: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for annotation_set in annotation_sets:
        for annotation in annotation_set.annotations:
            text = annotation.abstractive.full_text
            if text:
                by_annotator[annotation.annotator_id].append(
                    (annotation_set.dialog_id, text)
                )
    flagged: list[FlaggedPair] = []
    for annotator_id in sorted(by_annotator):
        entries = sorted(by_annotator[annotator_id])
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                dialog_a, text_a = entries[i]
                dialog_b, text_b = entries[j]
                if dialog_a == dialog_b:
                    continue
                similarity = _text_similarity(text_a, text_b)
                if text_a == text_b or similarity > similarity_threshold:
                    flagged.append(
                        FlaggedPair(annotator_id, dialog_a, dialog_b, similarity)
                    )
    return flagged


def run_qc(
    pairs: Sequence[tuple[Dialog, AnnotationSet]],
    similarity_threshold: float = 0.9,
) -> QcReport:
    """Extractive rules plus repeated-abstractive detection in one report.

    For each flagged duplicate pair, the later dialog's annotation is the
    one discarded; the first occurrence stays.
    """
    base = filter_extractive(pairs)
    already = {(r.dialog_id, r.annotator_id) for r in base.discarded}
    flagged = detect_repeated_abstractive(
        [annotation_set for _, annotation_set in pairs], similarity_threshold
    )
    extra: list[DiscardRecord] = []
    for pair in flagged:
        later = max(pair.dialog_id_a, pair.dialog_id_b)
        key = (later, pair.annotator_id)
        if key not in already:
            already.add(key)
            extra.append(
                DiscardRecord(later, pair.annotator_id, DiscardReason.REPEATED_ABSTRACTIVE)
            )
    discarded = base.discarded + extra
    total = base.kept + len(base.discarded)
    return QcReport(
        kept=total - len(discarded),
        discarded=discarded,
        per_annotator=_annotator_stats(pairs, discarded),
    )


@dataclass
class KappaReport:
    pairs: dict[tuple[str, str], float]
    mean: float
    excluded: list[tuple[str, str]]  # pairs with zero co-rated items


def _cohen_kappa(a: Sequence[object], b: Sequence[object]) -> float:
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    counts_a = Counter(a)
    counts_b = Counter(b)
    expected = sum(
        (counts_a[c] / n) * (counts_b[c] / n) for c in set(counts_a) | set(counts_b)
    )
    if expected >= 1.0 - 1e-12:
        # Both raters constant on the same category: total agreement.
        return 1.0
    return (observed - expected) / (1.0 - expected)


def pairwise_kappa(
    ratings: Mapping[object, Mapping[str, object]],
) -> KappaReport:
    """Unweighted Cohen's kappa for every annotator pair over co-rated items."""
    annotators = sorted({a for item in ratings.values() for a in item})
    if len(annotators) < 2:
        raise ValueError("need at least 2 annotators")
    pairs: dict[tuple[str, str], float] = {}
    excluded: list[tuple[str, str]] = []
    for i in range(len(annotators)):
        for j in range(i + 1, len(annotators)):
            a1, a2 = annotators[i], annotators[j]
            co = [
                (item[a1], item[a2])
                for item in ratings.values()
                if a1 in item and a2 in item
            ]
            if not co:
                excluded.append((a1, a2))
                log.warning("annotator pair (%s, %s) has no co-rated items", a1, a2)
                continue
            pairs[(a1, a2)] = _cohen_kappa([x for x, _ in co], [y for _, y in co])
    if not pairs:
        raise ValueError("no annotator pair shares any rated item")
    return KappaReport(
        pairs=pairs,
        mean=sum(pairs.values()) / len(pairs),
        excluded=excluded,
    )
