"""Calibrated synthetic corpora for tests and demos.

Generates dialogs shaped like the customer-support corpus: speakers
alternate starting with the customer, each utterance carries a few short
sentences built around a per-dialog topic (issue, product, case code), and
every sentence gets unique filler tokens so similarity probes can tell
utterances apart. Annotation sets are sampled with configurable rates for
first-utterance selection and abstractive-part sourcing, which lets the
measurement pipeline be checked against known generation parameters
without the released data.
"""

from __future__ import annotations

import random
import string
from typing import Sequence

from convsum.corpus import (
    AbstractiveSummary,
    Annotation,
    AnnotationSet,
    Dialog,
    Sentence,
    Speaker,
    Utterance,
)
from convsum.textproc import DEFAULT_CONFIG, tokenize

__all__ = [
    "synthetic_dialog",
    "synthetic_corpus",
    "synthetic_annotation_sets",
    "synthetic_annotated_corpus",
]

_ISSUES = [
    "refund", "billing", "login", "shipping", "outage", "upgrade",
    "warranty", "delivery", "password", "overcharge", "activation", "signal",
]
_PRODUCTS = [
    "router", "laptop", "subscription", "order", "account", "modem",
    "phone", "tablet", "booking", "plan", "console", "headset",
]
_FILLERS = [
    "again", "today", "earlier", "anyway", "honestly", "apparently",
    "meanwhile", "somehow", "clearly", "recently", "currently", "directly",
    "entirely", "exactly", "frankly", "gladly", "instead", "lately",
    "mostly", "nearly", "obviously", "overall", "promptly", "quickly",
    "rarely", "really", "shortly", "silently", "slowly", "surely",
    "truly", "usually", "weekly", "widely", "already", "briefly",
]

_CUSTOMER_TEMPLATES = [
    "my {issue} with the {product} is still broken",
    "i keep hitting the {issue} error on {code}",
    "the {product} failed again after the {issue} update",
    "please look at {code} because the {issue} is back",
    "@Company your {product} charged me twice for the {issue}",
    "still waiting on {code} for the {product} fix",
]
_AGENT_OPENERS = [
    "@Customer_id thanks for flagging the {issue} on {code}",
    "@Customer_id sorry about the {issue} trouble with your {product}",
    "@Customer_id the {code} ticket is with our {product} team",
]
_AGENT_TEMPLATES = [
    "we are checking the {product} logs for the {issue} now",
    "the {issue} patch for the {product} rolls out today",
    "please confirm {code} so we can close the {issue}",
    "our {product} team traced the {issue} to a bad release",
]


def _sentence_text(rng: random.Random, template: str, topic: dict[str, str]) -> str:
    body = template.format(**topic)
    unique = "".join(rng.choices(string.ascii_lowercase, k=5))
    filler = rng.choice(_FILLERS)
    return f"{body} {filler} ref {unique}"


def synthetic_dialog(
    dialog_id: str,
    rng: random.Random,
    min_utterances: int = 6,
    max_utterances: int = 20,
    min_sentences: int = 1,
    max_sentences: int = 3,
) -> Dialog:
    """One dialog with alternating speakers, customer first."""
    topic = {
        "issue": rng.choice(_ISSUES),
        "product": rng.choice(_PRODUCTS),
        "code": f"case {rng.randrange(1000, 10000)}",
    }
    n_utterances = rng.randint(min_utterances, max_utterances)
    utterances: list[Utterance] = []
    global_index = 0
    for utterance_index in range(n_utterances):
        speaker = Speaker.CUSTOMER if utterance_index % 2 == 0 else Speaker.AGENT
        n_sentences = rng.randint(min_sentences, max_sentences)
        sentences: list[Sentence] = []
        for position in range(n_sentences):
            if speaker is Speaker.CUSTOMER:
                template = rng.choice(_CUSTOMER_TEMPLATES)
            elif position == 0:
                template = rng.choice(_AGENT_OPENERS)
            else:
                template = rng.choice(_AGENT_TEMPLATES)
            text = _sentence_text(rng, template, topic)
            sentences.append(
                Sentence(
                    global_index=global_index,
                    utterance_index=utterance_index,
                    speaker=speaker,
                    text=text,
                    tokens=tuple(tokenize(text, DEFAULT_CONFIG)),
                )
            )
            global_index += 1
        utterances.append(
            Utterance(
                index=utterance_index,
                speaker=speaker,
                tweet_ids=(f"{dialog_id}-{utterance_index}",),
                text=" ".join(s.text for s in sentences),
                sentences=tuple(sentences),
            )
        )
    return Dialog(dialog_id=dialog_id, utterances=tuple(utterances), speaker_count=2)


def synthetic_corpus(
    n_dialogs: int,
    seed: int = 0,
    min_utterances: int = 6,
    max_utterances: int = 20,
    min_sentences: int = 1,
    max_sentences: int = 3,
) -> list[Dialog]:
    rng = random.Random(seed)
    return [
        synthetic_dialog(
            str(900000000 + i),
            rng,
            min_utterances=min_utterances,
            max_utterances=max_utterances,
            min_sentences=min_sentences,
            max_sentences=max_sentences,
        )
        for i in range(n_dialogs)
    ]


def _side_sentences(dialog: Dialog, speaker: Speaker) -> tuple[list[int], list[int]]:
    """Global indices in the speaker's first utterance vs in later ones."""
    first_index = next(
        u.index for u in dialog.utterances if u.speaker is speaker
    )
    first: list[int] = []
    later: list[int] = []
    for sentence in dialog.sentences:
        if sentence.speaker is not speaker:
            continue
        if sentence.utterance_index == first_index:
            first.append(sentence.global_index)
        else:
            later.append(sentence.global_index)
    return first, later


def _pick_extractive(
    rng: random.Random, dialog: Dialog, speaker: Speaker, first_rate: float
) -> list[int]:
    first, later = _side_sentences(dialog, speaker)
    if len(later) >= 2 and rng.random() >= first_rate:
        return rng.sample(later, 2)
    if later:
        return [rng.choice(first), rng.choice(later)]
    return rng.sample(first, min(2, len(first)))


def _pick_part(
    rng: random.Random, dialog: Dialog, speaker: Speaker, first_rate: float
) -> str:
    utterances = [u for u in dialog.utterances if u.speaker is speaker]
    if len(utterances) > 1 and rng.random() >= first_rate:
        source = rng.choice(utterances[1:])
    else:
        source = utterances[0]
    return rng.choice(source.sentences).text


def synthetic_annotation_sets(
    dialogs: Sequence[Dialog],
    seed: int = 0,
    annotators: Sequence[str] = ("ann1", "ann2", "ann3"),
    first_customer_rate: float = 0.85,
    first_agent_rate: float = 0.52,
    attribution_customer_rate: float = 0.75,
    attribution_agent_rate: float = 0.12,
) -> list[AnnotationSet]:
    """Annotations whose positional statistics follow the given rates.

    Extractive summaries take 2 customer and 2 agent sentences; with the
    speaker's first-rate probability at least one comes from that
    speaker's first utterance. Abstractive parts copy one sentence from
    the first same-speaker utterance at the attribution rate, otherwise
    from a later one.
    """
    rng = random.Random(seed)
    annotation_sets: list[AnnotationSet] = []
    for dialog in dialogs:
        annotations = []
        for annotator_id in annotators:
            customer = _pick_extractive(
                rng, dialog, Speaker.CUSTOMER, first_customer_rate
            )
            agent = _pick_extractive(rng, dialog, Speaker.AGENT, first_agent_rate)
            abstractive = AbstractiveSummary(
                customer_part=_pick_part(
                    rng, dialog, Speaker.CUSTOMER, attribution_customer_rate
                ),
                agent_part=_pick_part(
                    rng, dialog, Speaker.AGENT, attribution_agent_rate
                ),
            )
            annotations.append(
                Annotation(
                    annotator_id=annotator_id,
                    extractive=frozenset(customer) | frozenset(agent),
                    abstractive=abstractive,
                )
            )
        annotation_sets.append(AnnotationSet(dialog.dialog_id, tuple(annotations)))
    return annotation_sets


def synthetic_annotated_corpus(
    n_dialogs: int, seed: int = 0, **kwargs
) -> list[tuple[Dialog, AnnotationSet]]:
    """Dialogs paired with annotation sets, one call for tests and demos.

    Shape keywords go to synthetic_corpus, rate keywords to
    synthetic_annotation_sets.
    """
    shape_keys = {"min_utterances", "max_utterances", "min_sentences", "max_sentences"}
    shape = {k: v for k, v in kwargs.items() if k in shape_keys}
    rates = {k: v for k, v in kwargs.items() if k not in shape_keys}
    dialogs = synthetic_corpus(n_dialogs, seed=seed, **shape)
    annotation_sets = synthetic_annotation_sets(dialogs, seed=seed + 1, **rates)
    return list(zip(dialogs, annotation_sets))
