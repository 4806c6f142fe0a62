"""Corpus statistics and analytical procedures.

Length tables, compression rates, positional selection rates, abstractive
part attribution, speaker representation of generated summaries, weighted
QA scoring, and Welch's t-test. Similarity probes (attribution and
representation) reuse the ROUGE engine with stemming off; the t-test
p-value comes from a regularized incomplete beta evaluated by continued
fraction.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from convsum.corpus import AbstractiveSummary, AnnotationSet, Dialog, Speaker, Utterance
from convsum.rouge import RougeConfig, rouge_l
from convsum.textproc import DEFAULT_CONFIG, normalize, rouge_tokenize, tokenize

__all__ = [
    "MeanStd",
    "Breakdown",
    "LengthStats",
    "SummaryLengthStats",
    "FirstUtteranceRates",
    "AttributionRates",
    "Representation",
    "QaSheet",
    "WelchResult",
    "dialog_token_count",
    "dialog_length_stats",
    "summary_length_stats",
    "compression_rate",
    "mean_compression_rates",
    "first_utterance_selection_rate",
    "lcs_recall",
    "attribute_abstractive_part",
    "attribution_rates",
    "speaker_representation",
    "representation_rates",
    "random_two_utterance_summary",
    "qa_score",
    "regularized_incomplete_beta",
    "welch_t_test",
]


@dataclass(frozen=True)
class MeanStd:
    mean: float
    std: float


@dataclass(frozen=True)
class Breakdown:
    overall: MeanStd
    customer: MeanStd
    agent: MeanStd


@dataclass(frozen=True)
class LengthStats:
    utterances: Breakdown
    sentences: Breakdown
    tokens: Breakdown


@dataclass(frozen=True)
class SummaryLengthStats:
    abstractive: Breakdown
    extractive: MeanStd


def _mean_std(values: Sequence[float], population: bool) -> MeanStd:
    arr = np.asarray(values, dtype=float)
    ddof = 0 if population else 1
    if arr.size <= ddof:
        return MeanStd(float(arr.mean()), 0.0)
    return MeanStd(float(arr.mean()), float(arr.std(ddof=ddof)))


def dialog_token_count(dialog: Dialog) -> int:
    return sum(len(s.tokens) for s in dialog.sentences)


def _per_speaker_counts(dialog: Dialog) -> dict[str, dict[Speaker, int]]:
    counts = {
        "utterances": {Speaker.CUSTOMER: 0, Speaker.AGENT: 0},
        "sentences": {Speaker.CUSTOMER: 0, Speaker.AGENT: 0},
        "tokens": {Speaker.CUSTOMER: 0, Speaker.AGENT: 0},
    }
    for utterance in dialog.utterances:
        counts["utterances"][utterance.speaker] += 1
        counts["sentences"][utterance.speaker] += len(utterance.sentences)
        counts["tokens"][utterance.speaker] += sum(
            len(s.tokens) for s in utterance.sentences
        )
    return counts


def dialog_length_stats(
    corpus: Sequence[Dialog], population_std: bool = True
) -> LengthStats:
    """Means and stds of utterance, sentence, and token counts per dialog."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    columns: dict[tuple[str, str], list[float]] = {
        (kind, side): []
        for kind in ("utterances", "sentences", "tokens")
        for side in ("overall", "customer", "agent")
    }
    for dialog in corpus:
        counts = _per_speaker_counts(dialog)
        for kind in ("utterances", "sentences", "tokens"):
            customer = counts[kind][Speaker.CUSTOMER]
            agent = counts[kind][Speaker.AGENT]
            columns[(kind, "overall")].append(customer + agent)
            columns[(kind, "customer")].append(customer)
            columns[(kind, "agent")].append(agent)

    def breakdown(kind: str) -> Breakdown:
        return Breakdown(
            overall=_mean_std(columns[(kind, "overall")], population_std),
            customer=_mean_std(columns[(kind, "customer")], population_std),
            agent=_mean_std(columns[(kind, "agent")], population_std),
        )

    return LengthStats(
        utterances=breakdown("utterances"),
        sentences=breakdown("sentences"),
        tokens=breakdown("tokens"),
    )


def _text_tokens(text: str) -> list[str]:
    return tokenize(normalize(text, DEFAULT_CONFIG), DEFAULT_CONFIG)


def summary_length_stats(
    pairs: Sequence[tuple[Dialog, AnnotationSet]], population_std: bool = True
) -> SummaryLengthStats:
    """Token-count means and stds for abstractive and extractive summaries."""
    if not pairs:
        raise ValueError("no annotated dialogs given")
    abs_overall: list[float] = []
    abs_customer: list[float] = []
    abs_agent: list[float] = []
    extractive: list[float] = []
    for dialog, annotation_set in pairs:
        sentences = dialog.sentences
        for annotation in annotation_set.annotations:
            customer = len(_text_tokens(annotation.abstractive.customer_part))
            agent = len(_text_tokens(annotation.abstractive.agent_part))
            abs_customer.append(customer)
            abs_agent.append(agent)
            abs_overall.append(customer + agent)
            extractive.append(
                sum(len(sentences[i].tokens) for i in annotation.extractive)
            )
    return SummaryLengthStats(
        abstractive=Breakdown(
            overall=_mean_std(abs_overall, population_std),
            customer=_mean_std(abs_customer, population_std),
            agent=_mean_std(abs_agent, population_std),
        ),
        extractive=_mean_std(extractive, population_std),
    )


def _summary_token_count(dialog: Dialog, summary) -> int:
    if isinstance(summary, str):
        return len(_text_tokens(summary))
    if isinstance(summary, AbstractiveSummary):
        return len(_text_tokens(summary.customer_part)) + len(
            _text_tokens(summary.agent_part)
        )
    # Anything else is taken as an iterable of sentence indices.
    sentences = dialog.sentences
    return sum(len(sentences[i].tokens) for i in summary)


def compression_rate(dialog: Dialog, summary) -> float:
    """1 - tokens(summary)/tokens(dialog); summary may be text, an
    abstractive summary, or an iterable of sentence indices."""
    total = dialog_token_count(dialog)
    if total == 0:
        raise ValueError("dialog has no tokens")
    return 1.0 - _summary_token_count(dialog, summary) / total


def mean_compression_rates(
    pairs: Sequence[tuple[Dialog, AnnotationSet]],
) -> dict[str, float]:
    """Mean compression over all annotations, keyed by summary type."""
    abstractive: list[float] = []
    extractive: list[float] = []
    for dialog, annotation_set in pairs:
        for annotation in annotation_set.annotations:
            abstractive.append(compression_rate(dialog, annotation.abstractive))
            extractive.append(compression_rate(dialog, annotation.extractive))
    if not abstractive:
        raise ValueError("no annotations given")
    return {
        "abstractive": sum(abstractive) / len(abstractive),
        "extractive": sum(extractive) / len(extractive),
    }


@dataclass(frozen=True)
class FirstUtteranceRates:
    customer: float
    agent: float


def _first_utterance_index(dialog: Dialog, speaker: Speaker) -> int | None:
    for utterance in dialog.utterances:
        if utterance.speaker is speaker:
            return utterance.index
    return None


def first_utterance_selection_rate(
    pairs: Sequence[tuple[Dialog, AnnotationSet]],
) -> FirstUtteranceRates:
    """Fraction of extractive summaries containing at least one sentence
    from the speaker's first utterance."""
    totals = 0
    hits = {Speaker.CUSTOMER: 0, Speaker.AGENT: 0}
    for dialog, annotation_set in pairs:
        sentences = dialog.sentences
        firsts = {
            speaker: _first_utterance_index(dialog, speaker)
            for speaker in (Speaker.CUSTOMER, Speaker.AGENT)
        }
        for annotation in annotation_set.annotations:
            if not annotation.extractive:
                continue
            totals += 1
            selected_utterances = {
                sentences[i].utterance_index for i in annotation.extractive
            }
            for speaker, first in firsts.items():
                if first is not None and first in selected_utterances:
                    hits[speaker] += 1
    if totals == 0:
        raise ValueError("no extractive annotations given")
    return FirstUtteranceRates(
        customer=hits[Speaker.CUSTOMER] / totals,
        agent=hits[Speaker.AGENT] / totals,
    )


_PROBE_CONFIG = RougeConfig(stem=False)


def lcs_recall(candidate_text: str, reference_text: str) -> float:
    """ROUGE-L recall of the reference against the candidate, unstemmed."""
    candidate = rouge_tokenize(normalize(candidate_text, DEFAULT_CONFIG))
    reference = rouge_tokenize(normalize(reference_text, DEFAULT_CONFIG))
    return rouge_l([candidate], [[reference]], _PROBE_CONFIG).recall


def attribute_abstractive_part(
    part_text: str, utterances: Sequence[Utterance]
) -> int:
    """Index of the utterance the summary part is mainly based on: the
    argmax of ROUGE-L recall of the part against each utterance, ties to
    the earlier utterance.

    Here the part is the reference, so a part copied verbatim out of an
    utterance scores exactly 1 against it, the maximum.
    """
    if not utterances:
        raise ValueError("need at least one utterance")
    best_index = utterances[0].index
    best_score = -1.0
    for utterance in utterances:
        score = lcs_recall(utterance.text, part_text)
        if score > best_score:
            best_score = score
            best_index = utterance.index
    return best_index


@dataclass(frozen=True)
class AttributionRates:
    customer: float
    agent: float


def attribution_rates(
    pairs: Sequence[tuple[Dialog, AnnotationSet]],
) -> AttributionRates:
    """Fraction of abstractive parts attributed to the speaker's first
    utterance, per speaker."""
    totals = {Speaker.CUSTOMER: 0, Speaker.AGENT: 0}
    hits = {Speaker.CUSTOMER: 0, Speaker.AGENT: 0}
    for dialog, annotation_set in pairs:
        by_speaker = {
            speaker: [u for u in dialog.utterances if u.speaker is speaker]
            for speaker in (Speaker.CUSTOMER, Speaker.AGENT)
        }
        for annotation in annotation_set.annotations:
            parts = {
                Speaker.CUSTOMER: annotation.abstractive.customer_part,
                Speaker.AGENT: annotation.abstractive.agent_part,
            }
            for speaker, part in parts.items():
                utterances = by_speaker[speaker]
                if not part.strip() or not utterances:
                    continue
                totals[speaker] += 1
                attributed = attribute_abstractive_part(part, utterances)
                if attributed == utterances[0].index:
                    hits[speaker] += 1
    if totals[Speaker.CUSTOMER] == 0 and totals[Speaker.AGENT] == 0:
        raise ValueError("no abstractive parts given")
    return AttributionRates(
        customer=hits[Speaker.CUSTOMER] / max(totals[Speaker.CUSTOMER], 1),
        agent=hits[Speaker.AGENT] / max(totals[Speaker.AGENT], 1),
    )


class Representation(str, Enum):
    BOTH = "Both"
    CUSTOMER_ONLY = "CustomerOnly"
    AGENT_ONLY = "AgentOnly"


def speaker_representation(summary_text: str, dialog: Dialog) -> Representation:
    """Classify a generated summary by the speakers of the two dialog
    utterances most similar to it under ROUGE-L recall.

    Each utterance is scored by how much of it the summary recalls, so an
    utterance copied verbatim into the summary scores exactly 1, the
    maximum.
    """
    if len(dialog.utterances) < 2:
        raise ValueError("dialog must have at least 2 utterances")
    scored = [
        (lcs_recall(summary_text, utterance.text), utterance)
        for utterance in dialog.utterances
    ]
    # Ties go to the earlier utterance; sort is stable over dialog order.
    top = sorted(scored, key=lambda pair: -pair[0])[:2]
    speakers = {utterance.speaker for _, utterance in top}
    if len(speakers) == 2:
        return Representation.BOTH
    if Speaker.CUSTOMER in speakers:
        return Representation.CUSTOMER_ONLY
    return Representation.AGENT_ONLY


def representation_rates(
    items: Iterable[tuple[str, Dialog]],
) -> dict[Representation, float]:
    counts: Counter = Counter()
    total = 0
    for summary_text, dialog in items:
        counts[speaker_representation(summary_text, dialog)] += 1
        total += 1
    if total == 0:
        raise ValueError("no summaries given")
    return {rep: counts.get(rep, 0) / total for rep in Representation}


def random_two_utterance_summary(dialog: Dialog, seed: int) -> str:
    """Concatenation of two distinct uniformly chosen utterances."""
    if len(dialog.utterances) < 2:
        raise ValueError("dialog must have at least 2 utterances")
    rng = random.Random(seed)
    chosen = rng.sample(list(dialog.utterances), 2)
    return " ".join(u.text for u in sorted(chosen, key=lambda u: u.index))


@dataclass(frozen=True)
class QaSheet:
    dialog_id: str
    weights: tuple[float, ...]
    indicators: tuple[tuple[int, ...], ...]  # 3 annotator rows x K questions

    def __post_init__(self) -> None:
        if len(self.indicators) != 3:
            raise ValueError("need exactly 3 annotator rows")
        if not self.weights:
            raise ValueError("need at least one question")
        for weight in self.weights:
            if not 0.0 < weight <= 1.0:
                raise ValueError(f"weight {weight} outside (0, 1]")
        for row in self.indicators:
            if len(row) != len(self.weights):
                raise ValueError("indicator row length differs from weights")
            for value in row:
                if value not in (0, 1):
                    raise ValueError("indicators must be 0 or 1")


def qa_score(sheet: QaSheet) -> float:
    """Weighted share of answered questions, scaled so full credit is 100."""
    weight_sum = sum(sheet.weights)
    credit = sum(
        weight * indicator
        for row in sheet.indicators
        for weight, indicator in zip(sheet.weights, row)
    )
    return 100.0 * credit / (3.0 * weight_sum)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the incomplete beta continued fraction.
    max_iterations = 500
    eps = 1e-14
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iterations + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by continued fraction, accurate to about 1e-10."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_two_sided: float


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> WelchResult:
    """Two-sample t-test without the equal-variance assumption."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("both samples need at least 2 observations")
    var_a = float(a.var(ddof=1))
    var_b = float(b.var(ddof=1))
    n_a, n_b = a.size, b.size
    se2 = var_a / n_a + var_b / n_b
    mean_diff = float(a.mean() - b.mean())
    if se2 == 0.0:
        # Degenerate: both samples constant.
        if mean_diff == 0.0:
            return WelchResult(0.0, float(n_a + n_b - 2), 1.0)
        return WelchResult(
            math.copysign(math.inf, mean_diff), float(n_a + n_b - 2), 0.0
        )
    t = mean_diff / math.sqrt(se2)
    df = se2**2 / (
        (var_a / n_a) ** 2 / (n_a - 1) + (var_b / n_b) ** 2 / (n_b - 1)
    )
    if t == 0.0:
        p = 1.0
    else:
        p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return WelchResult(t, df, min(1.0, max(0.0, p)))
