"""ROUGE metrics: R-1, R-2, R-SU4, and summary-level R-L.

Inputs to the low-level scoring functions are already-tokenized (and, when
enabled, stemmed) token sequences; evaluate_summary handles tokenization,
stemming, and the candidate-only length limit. Multi-reference aggregation
is the arithmetic mean of the per-reference scores, componentwise over
precision, recall, and F.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from convsum.stemming import porter_stem
from convsum.textproc import rouge_tokenize, segment_sentences

__all__ = [
    "RougeConfig",
    "RougeScore",
    "RougeReport",
    "rouge_n",
    "rouge_su",
    "rouge_l",
    "apply_length_limit",
    "evaluate_summary",
    "mean_report",
    "bootstrap_ci",
    "prepare_sentences",
]


@dataclass(frozen=True)
class RougeConfig:
    ngram_max: int = 2
    skip_gap: int = 4  # max tokens allowed between a skip-bigram's ends
    include_unigrams_in_su: bool = True
    f_alpha: float = 0.5
    stem: bool = True
    length_limit: int | None = None  # candidate-only, in whitespace tokens
    multi_ref: str = "average"

    def __post_init__(self) -> None:
        if not 0.0 <= self.f_alpha <= 1.0:
            raise ValueError(f"f_alpha must be in [0, 1], got {self.f_alpha}")
        if self.skip_gap < 0:
            raise ValueError(f"skip_gap must be >= 0, got {self.skip_gap}")


DEFAULT_ROUGE_CONFIG = RougeConfig()


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f: float


@dataclass(frozen=True)
class RougeReport:
    r1: RougeScore
    r2: RougeScore
    rsu4: RougeScore
    rl: RougeScore

    def metrics(self) -> dict[str, RougeScore]:
        return {"R-1": self.r1, "R-2": self.r2, "R-SU4": self.rsu4, "R-L": self.rl}


def _f_measure(p: float, r: float, alpha: float) -> float:
    if p + r == 0.0:
        return 0.0
    return p * r / (alpha * p + (1.0 - alpha) * r)


def _score(hits: int, candidate_total: int, reference_total: int, alpha: float) -> RougeScore:
    p = hits / candidate_total if candidate_total else 0.0
    r = hits / reference_total if reference_total else 0.0
    return RougeScore(p, r, _f_measure(p, r, alpha))


def _mean_scores(scores: Sequence[RougeScore]) -> RougeScore:
    n = len(scores)
    return RougeScore(
        sum(s.precision for s in scores) / n,
        sum(s.recall for s in scores) / n,
        sum(s.f for s in scores) / n,
    )


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_overlap(candidate: Counter, reference: Counter) -> int:
    return sum(min(count, reference[unit]) for unit, count in candidate.items())


def rouge_n(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    n: int,
    config: RougeConfig = DEFAULT_ROUGE_CONFIG,
) -> RougeScore:
    """Clipped n-gram overlap, averaged over references."""
    if not references:
        raise ValueError("at least one reference is required")
    cand_grams = _ngrams(candidate, n)
    cand_total = sum(cand_grams.values())
    per_ref = []
    for reference in references:
        ref_grams = _ngrams(reference, n)
        hits = _clipped_overlap(cand_grams, ref_grams)
        per_ref.append(_score(hits, cand_total, sum(ref_grams.values()), config.f_alpha))
    return _mean_scores(per_ref)


def _su_units(tokens: Sequence[str], skip_gap: int, include_unigrams: bool) -> Counter:
    units: Counter = Counter()
    limit = skip_gap + 1  # max index distance between the pair's ends
    for i in range(len(tokens)):
        for j in range(i + 1, min(i + limit + 1, len(tokens))):
            units[("skip", tokens[i], tokens[j])] += 1
    if include_unigrams:
        for token in tokens:
            units[("uni", token)] += 1
    return units


def rouge_su(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    config: RougeConfig = DEFAULT_ROUGE_CONFIG,
) -> RougeScore:
    """Skip-bigram plus unigram overlap, averaged over references."""
    if not references:
        raise ValueError("at least one reference is required")
    cand_units = _su_units(candidate, config.skip_gap, config.include_unigrams_in_su)
    cand_total = sum(cand_units.values())
    per_ref = []
    for reference in references:
        ref_units = _su_units(reference, config.skip_gap, config.include_unigrams_in_su)
        hits = _clipped_overlap(cand_units, ref_units)
        per_ref.append(_score(hits, cand_total, sum(ref_units.values()), config.f_alpha))
    return _mean_scores(per_ref)


def _lcs_positions(reference: Sequence[str], candidate: Sequence[str]) -> set[int]:
    """Positions in `reference` matched by one longest common subsequence."""
    m, n = len(reference), len(candidate)
    if m == 0 or n == 0:
        return set()
    lengths = np.zeros((m + 1, n + 1), dtype=np.int32)
    for i in range(1, m + 1):
        row = lengths[i]
        prev = lengths[i - 1]
        token = reference[i - 1]
        for j in range(1, n + 1):
            if token == candidate[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = max(prev[j], row[j - 1])
    positions: set[int] = set()
    i, j = m, n
    while i > 0 and j > 0:
        if reference[i - 1] == candidate[j - 1] and lengths[i][j] == lengths[i - 1][j - 1] + 1:
            positions.add(i - 1)
            i -= 1
            j -= 1
        elif lengths[i - 1][j] >= lengths[i][j - 1]:
            i -= 1
        else:
            j -= 1
    return positions


def _union_lcs_hits(
    candidate_sentences: Sequence[Sequence[str]],
    reference_sentences: Sequence[Sequence[str]],
) -> int:
    # Union-LCS per reference sentence; each hit consumes one occurrence of
    # the matched token from the candidate so repeats cannot double-count.
    budget = Counter(t for sent in candidate_sentences for t in sent)
    hits = 0
    for ref_sent in reference_sentences:
        union: set[int] = set()
        for cand_sent in candidate_sentences:
            union |= _lcs_positions(ref_sent, cand_sent)
        for pos in sorted(union):
            token = ref_sent[pos]
            if budget[token] > 0:
                budget[token] -= 1
                hits += 1
    return hits


def rouge_l(
    candidate_sentences: Sequence[Sequence[str]],
    references: Sequence[Sequence[Sequence[str]]],
    config: RougeConfig = DEFAULT_ROUGE_CONFIG,
) -> RougeScore:
    """Summary-level union-LCS, averaged over references.

    Both sides are sentence-split token lists; a reference is a list of
    sentences, and `references` is a list of such references.
    """
    if not references:
        raise ValueError("at least one reference is required")
    cand_total = sum(len(sent) for sent in candidate_sentences)
    per_ref = []
    for reference_sentences in references:
        ref_total = sum(len(sent) for sent in reference_sentences)
        hits = _union_lcs_hits(candidate_sentences, reference_sentences)
        per_ref.append(_score(hits, cand_total, ref_total, config.f_alpha))
    return _mean_scores(per_ref)


def apply_length_limit(sentences: Sequence[str], limit: int) -> list[str]:
    """Keep whitespace tokens in order up to `limit`; the last kept sentence
    may be cut mid-sentence. References are never passed through this."""
    if limit <= 0:
        raise ValueError(f"length limit must be positive, got {limit}")
    out: list[str] = []
    remaining = limit
    for sentence in sentences:
        words = sentence.split()
        if len(words) <= remaining:
            out.append(sentence)
            remaining -= len(words)
        else:
            if remaining > 0:
                out.append(" ".join(words[:remaining]))
            remaining = 0
        if remaining == 0:
            break
    return out


def _as_sentences(summary: str | Sequence[str]) -> list[str]:
    if isinstance(summary, str):
        return segment_sentences(summary)
    return [s for s in summary if s]


def prepare_sentences(
    summary: str | Sequence[str], config: RougeConfig = DEFAULT_ROUGE_CONFIG
) -> list[list[str]]:
    """Sentence-split, ROUGE-tokenize, and optionally stem a summary.

    Stemming skips tokens of length <= 3 ("was" stays "was"), matching the
    reference evaluation toolkit's behavior.
    """
    prepared = []
    for sentence in _as_sentences(summary):
        tokens = rouge_tokenize(sentence)
        if config.stem:
            tokens = [porter_stem(t) if len(t) > 3 else t for t in tokens]
        if tokens:
            prepared.append(tokens)
    return prepared


def evaluate_summary(
    candidate: str | Sequence[str],
    references: Sequence[str | Sequence[str]],
    config: RougeConfig = DEFAULT_ROUGE_CONFIG,
) -> RougeReport:
    """Score one candidate against one or more reference summaries.

    The candidate is length-limited first when config.length_limit is set;
    references are used in full.
    """
    if not references:
        raise ValueError("at least one reference is required")
    cand_sentences = _as_sentences(candidate)
    if config.length_limit is not None:
        cand_sentences = apply_length_limit(cand_sentences, config.length_limit)
    cand = prepare_sentences(cand_sentences, config)
    refs = [prepare_sentences(ref, config) for ref in references]

    cand_flat = [t for sent in cand for t in sent]
    refs_flat = [[t for sent in ref for t in sent] for ref in refs]
    return RougeReport(
        r1=rouge_n(cand_flat, refs_flat, 1, config),
        r2=rouge_n(cand_flat, refs_flat, 2, config),
        rsu4=rouge_su(cand_flat, refs_flat, config),
        rl=rouge_l(cand, refs, config),
    )


def mean_report(reports: Sequence[RougeReport]) -> RougeReport:
    """Corpus-level score: componentwise mean of per-dialog reports."""
    if not reports:
        raise ValueError("no reports to aggregate")
    return RougeReport(
        r1=_mean_scores([r.r1 for r in reports]),
        r2=_mean_scores([r.r2 for r in reports]),
        rsu4=_mean_scores([r.rsu4 for r in reports]),
        rl=_mean_scores([r.rl for r in reports]),
    )


def bootstrap_ci(
    scores: Sequence[float],
    confidence: float = 0.95,
    resamples: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean, deterministic per seed."""
    if len(scores) < 2:
        raise ValueError(f"need at least 2 scores, got {len(scores)}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    values = np.asarray(scores, dtype=np.float64)
    rng = np.random.default_rng(seed)
    samples = rng.integers(0, len(values), size=(resamples, len(values)))
    means = values[samples].mean(axis=1)
    tail = (1.0 - confidence) / 2.0 * 100.0
    low, high = np.percentile(means, [tail, 100.0 - tail])
    return float(low), float(high)
