"""Unsupervised extractive summarizers under the 2-customer + 2-agent budget.

Five methods share one selection contract: Random, Lead, LexRank centrality,
cross-entropy subset optimization (CES), and next-response-probability
influence (NRP). Each returns the selected sentence global indices in dialog
order; when a speaker has fewer sentences than its budget, all of that
speaker's sentences are taken and nothing is substituted.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from convsum.corpus import Dialog, Speaker
from convsum import nrp as nrp_mod

__all__ = [
    "ExtractiveSummary",
    "LexRankConfig",
    "CesConfig",
    "CesRun",
    "ConvergenceError",
    "random_summary",
    "lead_summary",
    "lexrank_scores",
    "lexrank_from_matrix",
    "lexrank_summary",
    "bhattacharyya",
    "term_distribution",
    "expand_sentence",
    "expansion_indices",
    "ces_objective",
    "ces_objective_terms",
    "ces_optimize",
    "ces_summary",
    "nrp_summary",
    "select_top_per_speaker",
    "render_sentences",
]

SPEAKER_BUDGET = 2  # sentences selected per speaker side


class ConvergenceError(RuntimeError):
    """Power iteration failed to converge; carries the last L1 residual."""

    def __init__(self, iterations: int, residual: float) -> None:
        super().__init__(
            f"no convergence after {iterations} iterations (residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class ExtractiveSummary:
    dialog_id: str
    selected: tuple[int, ...]  # sentence global indices, strictly increasing
    per_sentence_scores: dict[int, float] | None = None


@dataclass(frozen=True)
class LexRankConfig:
    representation: str = "tf"  # "tf" or "tfidf"
    similarity_threshold: float = 0.1
    damping: float = 0.15  # weight of the uniform jump
    convergence_epsilon: float = 1e-8
    max_iterations: int = 1000

    def __post_init__(self) -> None:
        if not 0.0 <= self.damping < 1.0:
            raise ValueError(f"damping must be in [0, 1), got {self.damping}")
        if self.convergence_epsilon <= 0.0:
            raise ValueError("convergence_epsilon must be positive")
        if self.representation not in ("tf", "tfidf"):
            raise ValueError(f"unknown representation {self.representation!r}")


DEFAULT_LEXRANK_CONFIG = LexRankConfig()


@dataclass(frozen=True)
class CesConfig:
    samples_per_iteration: int = 1000
    elite_fraction: float = 0.05
    smoothing: float = 0.7  # update weight on the elite frequency
    iterations: int = 30
    expansion_k: int = 2
    coverage_weight: float = 1.0  # objective exponents
    centrality_weight: float = 1.0
    position_weight: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.elite_fraction < 1.0:
            raise ValueError(f"elite_fraction must be in (0, 1), got {self.elite_fraction}")
        if not 0.0 < self.smoothing <= 1.0:
            raise ValueError(f"smoothing must be in (0, 1], got {self.smoothing}")


DEFAULT_CES_CONFIG = CesConfig()


def _speaker_indices(dialog: Dialog) -> dict[Speaker, list[int]]:
    groups: dict[Speaker, list[int]] = {Speaker.CUSTOMER: [], Speaker.AGENT: []}
    for sentence in dialog.sentences:
        groups[sentence.speaker].append(sentence.global_index)
    return groups


def _require_two_speakers(dialog: Dialog) -> dict[Speaker, list[int]]:
    groups = _speaker_indices(dialog)
    for speaker, indices in groups.items():
        if not indices:
            raise ValueError(
                f"dialog {dialog.dialog_id} has no {speaker.value} sentences"
            )
    return groups


def select_top_per_speaker(
    dialog: Dialog,
    scores: Mapping[int, float],
    per_speaker: int = SPEAKER_BUDGET,
) -> tuple[int, ...]:
    """Top-N sentence indices per speaker by score; ties go to the earlier
    dialog position. Output sorted by global index."""
    groups = _require_two_speakers(dialog)
    picked: list[int] = []
    for indices in groups.values():
        ranked = sorted(indices, key=lambda i: (-scores.get(i, 0.0), i))
        picked.extend(ranked[: min(per_speaker, len(ranked))])
    return tuple(sorted(picked))


def render_sentences(dialog: Dialog, selected: Sequence[int]) -> list[str]:
    """Sentence texts for the given global indices, in the given order."""
    by_index = {s.global_index: s.text for s in dialog.sentences}
    return [by_index[i] for i in selected]


def random_summary(dialog: Dialog, seed: int) -> ExtractiveSummary:
    """Two uniform picks per speaker, without replacement, per-seed stable."""
    groups = _require_two_speakers(dialog)
    rng = random.Random(seed)
    picked: list[int] = []
    for speaker in (Speaker.CUSTOMER, Speaker.AGENT):
        indices = groups[speaker]
        picked.extend(rng.sample(indices, min(SPEAKER_BUDGET, len(indices))))
    return ExtractiveSummary(dialog.dialog_id, tuple(sorted(picked)))


def lead_summary(dialog: Dialog) -> ExtractiveSummary:
    """First two sentences of each speaker in dialog order."""
    groups = _require_two_speakers(dialog)
    picked: list[int] = []
    for indices in groups.values():
        picked.extend(sorted(indices)[: min(SPEAKER_BUDGET, len(indices))])
    return ExtractiveSummary(dialog.dialog_id, tuple(sorted(picked)))


def _term_vectors(dialog: Dialog, representation: str) -> np.ndarray:
    sentences = dialog.sentences
    vocab: dict[str, int] = {}
    for sentence in sentences:
        for token in sentence.tokens:
            vocab.setdefault(token, len(vocab))
    matrix = np.zeros((len(sentences), max(len(vocab), 1)), dtype=np.float64)
    for row, sentence in enumerate(sentences):
        for token in sentence.tokens:
            matrix[row, vocab[token]] += 1.0
    if representation == "tfidf":
        df = (matrix > 0).sum(axis=0)
        idf = np.log(len(sentences) / np.maximum(df, 1.0)) + 1.0
        matrix = matrix * idf
    return matrix


def _cosine_matrix(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = vectors / safe[:, None]
    sims = unit @ unit.T
    return np.clip(sims, 0.0, 1.0)


def lexrank_from_matrix(
    similarities: np.ndarray, config: LexRankConfig = DEFAULT_LEXRANK_CONFIG
) -> np.ndarray:
    """Power-method centrality over a thresholded similarity matrix.

    Rows are normalized to a stochastic matrix (uniform when all-zero) and
    iterated with a uniform jump of weight `damping` until the L1 change
    drops below the epsilon. Scores sum to 1.
    """
    n = similarities.shape[0]
    if n == 0:
        return np.zeros(0)
    adjacency = np.where(similarities < config.similarity_threshold, 0.0, similarities)
    row_sums = adjacency.sum(axis=1)
    stochastic = np.empty_like(adjacency)
    for i in range(n):
        if row_sums[i] > 0.0:
            stochastic[i] = adjacency[i] / row_sums[i]
        else:
            stochastic[i] = 1.0 / n
    jump = config.damping / n
    scores = np.full(n, 1.0 / n)
    residual = float("inf")
    for _ in range(config.max_iterations):
        updated = jump + (1.0 - config.damping) * (stochastic.T @ scores)
        residual = float(np.abs(updated - scores).sum())
        scores = updated
        if residual < config.convergence_epsilon:
            return scores / scores.sum()
    raise ConvergenceError(config.max_iterations, residual)


def lexrank_scores(
    dialog: Dialog, config: LexRankConfig = DEFAULT_LEXRANK_CONFIG
) -> dict[int, float]:
    """Centrality score per sentence global index; scores sum to 1."""
    sentences = dialog.sentences
    if not sentences:
        raise ValueError(f"dialog {dialog.dialog_id} has no sentences")
    sims = _cosine_matrix(_term_vectors(dialog, config.representation))
    scores = lexrank_from_matrix(sims, config)
    return {s.global_index: float(scores[i]) for i, s in enumerate(sentences)}


def lexrank_summary(
    dialog: Dialog, config: LexRankConfig = DEFAULT_LEXRANK_CONFIG
) -> ExtractiveSummary:
    scores = lexrank_scores(dialog, config)
    selected = select_top_per_speaker(dialog, scores)
    return ExtractiveSummary(dialog.dialog_id, selected, scores)


def term_distribution(tokens: Sequence[str]) -> dict[str, float]:
    """Normalized term-frequency distribution of a token sequence."""
    counts = Counter(tokens)
    total = sum(counts.values())
    if total == 0:
        return {}
    return {term: count / total for term, count in counts.items()}


def bhattacharyya(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    """Bhattacharyya coefficient between two term distributions."""
    for name, dist in (("p", p), ("q", q)):
        if dist and abs(sum(dist.values()) - 1.0) > 1e-9:
            raise ValueError(f"distribution {name} is not normalized")
    if len(p) > len(q):
        p, q = q, p
    value = sum((p[term] * q[term]) ** 0.5 for term in p if term in q)
    return float(min(1.0, max(0.0, value)))


def _pairwise_bhattacharyya(dialog: Dialog) -> np.ndarray:
    sentences = dialog.sentences
    dists = [term_distribution(s.tokens) for s in sentences]
    n = len(sentences)
    sims = np.zeros((n, n))
    for i in range(n):
        sims[i, i] = 1.0
        for j in range(i + 1, n):
            sims[i, j] = sims[j, i] = bhattacharyya(dists[i], dists[j])
    return sims


def expansion_indices(dialog: Dialog, global_index: int, k: int = 2) -> tuple[int, ...]:
    """The k most-Bhattacharyya-similar other sentences, ties by position."""
    sims = _pairwise_bhattacharyya(dialog)
    return _expansion_from_matrix(sims, global_index, k)


def _expansion_from_matrix(sims: np.ndarray, index: int, k: int) -> tuple[int, ...]:
    others = [j for j in range(sims.shape[0]) if j != index]
    others.sort(key=lambda j: (-sims[index, j], j))
    return tuple(sorted(others[:k]))


def expand_sentence(dialog: Dialog, global_index: int, k: int = 2) -> list[str]:
    """Tokens of the sentence together with its k nearest sentences."""
    neighbors = expansion_indices(dialog, global_index, k)
    members = sorted({global_index, *neighbors})
    sentences = dialog.sentences
    return [t for i in members for t in sentences[i].tokens]


class _CesScorer:
    """Precomputed per-dialog state for the CES objective."""

    def __init__(self, dialog: Dialog, config: CesConfig) -> None:
        self.config = config
        sentences = dialog.sentences
        self.n = len(sentences)
        self.token_counts = [Counter(s.tokens) for s in sentences]
        self.dialog_dist = term_distribution([t for s in sentences for t in s.tokens])
        sims = _pairwise_bhattacharyya(dialog)
        self.expansions = [
            frozenset((i, *_expansion_from_matrix(sims, i, config.expansion_k)))
            for i in range(self.n)
        ]
        raw = lexrank_scores(dialog)
        values = np.array([raw[s.global_index] for s in sentences])
        lo, hi = values.min(), values.max()
        if hi > lo:
            self.centrality = (values - lo) / (hi - lo)
        else:
            self.centrality = np.ones_like(values)
        self.position = np.array(
            [1.0 / (1.0 + s.utterance_index) for s in sentences]
        )
        self._cache: dict[frozenset[int], float] = {}

    def terms(self, candidate: frozenset[int]) -> dict[str, float]:
        expanded: set[int] = set()
        for index in candidate:
            expanded |= self.expansions[index]
        tokens = Counter()
        for index in expanded:
            tokens += self.token_counts[index]
        total = sum(tokens.values())
        dist = {term: count / total for term, count in tokens.items()}
        coverage = bhattacharyya(dist, self.dialog_dist)
        indices = sorted(candidate)
        centrality = float(self.centrality[indices].mean())
        position = float(self.position[indices].mean())
        cfg = self.config
        value = (
            max(coverage, 1e-9) ** cfg.coverage_weight
            * max(centrality, 1e-9) ** cfg.centrality_weight
            * max(position, 1e-9) ** cfg.position_weight
        )
        return {
            "coverage": coverage,
            "centrality": centrality,
            "position": position,
            "objective": value,
        }

    def objective(self, candidate: frozenset[int]) -> float:
        cached = self._cache.get(candidate)
        if cached is not None:
            return cached
        value = self.terms(candidate)["objective"]
        self._cache[candidate] = value
        return value


def ces_objective(
    dialog: Dialog,
    candidate_indices: Sequence[int],
    config: CesConfig = DEFAULT_CES_CONFIG,
) -> float:
    """Product of coverage, centrality, and position objectives.

    Coverage is the Bhattacharyya similarity between the term distribution
    of the candidate expanded with each sentence's nearest neighbors and the
    whole dialog's distribution. Centrality is the mean min-max-normalized
    LexRank score and position the mean of 1/(1 + utterance_index); each
    factor is floored at 1e-9 and raised to its configured exponent.
    """
    return ces_objective_terms(dialog, candidate_indices, config)["objective"]


def ces_objective_terms(
    dialog: Dialog,
    candidate_indices: Sequence[int],
    config: CesConfig = DEFAULT_CES_CONFIG,
) -> dict[str, float]:
    """The individual coverage/centrality/position terms plus the product."""
    candidate = frozenset(int(i) for i in candidate_indices)
    if not candidate:
        raise ValueError("candidate is empty")
    n = dialog.sentence_count
    bad = [i for i in candidate if not 0 <= i < n]
    if bad:
        raise ValueError(f"candidate indices {sorted(bad)} out of range")
    return _CesScorer(dialog, config).terms(candidate)


@dataclass
class CesRun:
    best_indices: tuple[int, ...]
    best_objective: float
    best_per_iteration: list[float]  # best objective seen so far, per iteration
    inclusion_probabilities: dict[int, float]


def _sample_subsets(
    rng: np.random.Generator, weights: np.ndarray, budget: int, samples: int
) -> np.ndarray:
    """Weighted sampling without replacement (top-`budget` exponential keys),
    vectorized over `samples` draws. Returns an array of index rows."""
    n = weights.shape[0]
    safe = np.maximum(weights, 1e-12)
    u = rng.random((samples, n))
    keys = u ** (1.0 / safe)
    if budget >= n:
        return np.tile(np.arange(n), (samples, 1))
    top = np.argpartition(-keys, budget - 1, axis=1)[:, :budget]
    return top


def ces_optimize(dialog: Dialog, config: CesConfig = DEFAULT_CES_CONFIG) -> CesRun:
    """Cross-entropy subset search under the per-speaker budget.

    Each iteration draws feasible subsets from per-sentence inclusion
    probabilities, scores them, and moves the probabilities toward the
    elite frequencies: p <- smoothing * freq + (1 - smoothing) * p. The
    returned subset is the best ever evaluated, so the per-iteration best
    trace is non-decreasing.
    """
    groups = _require_two_speakers(dialog)
    scorer = _CesScorer(dialog, config)
    rng = np.random.default_rng(config.seed)

    group_indices = [
        np.array(sorted(groups[Speaker.CUSTOMER])),
        np.array(sorted(groups[Speaker.AGENT])),
    ]
    budgets = [min(SPEAKER_BUDGET, len(g)) for g in group_indices]
    probs = [np.full(len(g), b / len(g)) for g, b in zip(group_indices, budgets)]

    best_subset: frozenset[int] | None = None
    best_value = -1.0
    trace: list[float] = []
    elite_size = max(1, int(config.elite_fraction * config.samples_per_iteration))

    for _ in range(config.iterations):
        rows = [
            _sample_subsets(rng, p, b, config.samples_per_iteration)
            for p, b in zip(probs, budgets)
        ]
        evaluated: list[tuple[float, tuple[int, ...], frozenset[int]]] = []
        for s in range(config.samples_per_iteration):
            picked = np.concatenate(
                [g[rows[gi][s]] for gi, g in enumerate(group_indices)]
            )
            subset = frozenset(int(i) for i in picked)
            value = scorer.objective(subset)
            evaluated.append((value, tuple(sorted(subset)), subset))
            if value > best_value:
                best_value = value
                best_subset = subset
        evaluated.sort(key=lambda item: (-item[0], item[1]))
        elite = evaluated[:elite_size]
        for gi, indices in enumerate(group_indices):
            freq = np.zeros(len(indices))
            position_of = {int(idx): pos for pos, idx in enumerate(indices)}
            for _, _, subset in elite:
                for index in subset:
                    pos = position_of.get(index)
                    if pos is not None:
                        freq[pos] += 1.0
            freq /= len(elite)
            probs[gi] = config.smoothing * freq + (1.0 - config.smoothing) * probs[gi]
        trace.append(best_value)

    assert best_subset is not None
    inclusion = {}
    for gi, indices in enumerate(group_indices):
        for pos, index in enumerate(indices):
            inclusion[int(index)] = float(probs[gi][pos])
    return CesRun(
        best_indices=tuple(sorted(best_subset)),
        best_objective=best_value,
        best_per_iteration=trace,
        inclusion_probabilities=inclusion,
    )


def ces_summary(dialog: Dialog, config: CesConfig = DEFAULT_CES_CONFIG) -> ExtractiveSummary:
    run = ces_optimize(dialog, config)
    return ExtractiveSummary(
        dialog.dialog_id, run.best_indices, run.inclusion_probabilities
    )


def nrp_summary(
    dialog: Dialog,
    fw_scorer: "nrp_mod.ResponseScorer",
    bw_scorer: "nrp_mod.ResponseScorer | None" = None,
) -> ExtractiveSummary:
    """Top-2 per speaker by averaged forward/backward influence drop."""
    scores = nrp_mod.sentence_influence_scores(dialog, fw_scorer, bw_scorer)
    averaged = {s.global_index: s.averaged for s in scores}
    selected = select_top_per_speaker(dialog, averaged)
    return ExtractiveSummary(dialog.dialog_id, selected, averaged)
