from __future__ import annotations

import random

import pytest

from convsum.analysis import (
    attribution_rates,
    first_utterance_selection_rate,
)
from convsum.corpus import Speaker
from convsum.synthetic import (
    synthetic_annotated_corpus,
    synthetic_annotation_sets,
    synthetic_corpus,
    synthetic_dialog,
)


class TestDialogShape:
    def test_alternation_customer_first(self):
        for dialog in synthetic_corpus(20, seed=1):
            for utterance in dialog.utterances:
                expected = (
                    Speaker.CUSTOMER if utterance.index % 2 == 0 else Speaker.AGENT
                )
                assert utterance.speaker is expected

    def test_size_bounds_respected(self):
        corpus = synthetic_corpus(
            30, seed=2, min_utterances=4, max_utterances=7,
            min_sentences=2, max_sentences=2,
        )
        for dialog in corpus:
            assert 4 <= len(dialog.utterances) <= 7
            for utterance in dialog.utterances:
                assert len(utterance.sentences) == 2

    def test_indices_consistent(self):
        for dialog in synthetic_corpus(10, seed=3):
            flat = list(dialog.sentences)
            assert [s.global_index for s in flat] == list(range(len(flat)))
            for utterance in dialog.utterances:
                for sentence in utterance.sentences:
                    assert sentence.utterance_index == utterance.index
                    assert sentence.speaker is utterance.speaker

    def test_sentences_have_unique_ref_tokens(self):
        # every sentence carries a unique tail so similarity probes can
        # tell any two sentences apart
        for dialog in synthetic_corpus(10, seed=4):
            tails = [s.tokens[-1] for s in dialog.sentences]
            assert len(set(tails)) == len(tails)

    def test_tokens_match_tokenizer_output(self):
        from convsum.textproc import DEFAULT_CONFIG, tokenize

        dialog = synthetic_dialog("d", random.Random(5))
        for sentence in dialog.sentences:
            assert list(sentence.tokens) == tokenize(sentence.text, DEFAULT_CONFIG)

    def test_seed_determinism(self):
        a = synthetic_corpus(5, seed=6)
        b = synthetic_corpus(5, seed=6)
        assert a == b
        c = synthetic_corpus(5, seed=7)
        assert a != c


class TestAnnotationSets:
    def test_extractive_indices_valid(self):
        pairs = synthetic_annotated_corpus(25, seed=8)
        for dialog, annotation_set in pairs:
            n = len(list(dialog.sentences))
            assert annotation_set.dialog_id == dialog.dialog_id
            for annotation in annotation_set.annotations:
                assert annotation.extractive
                assert all(0 <= i < n for i in annotation.extractive)

    def test_both_speakers_covered(self):
        pairs = synthetic_annotated_corpus(25, seed=9)
        for dialog, annotation_set in pairs:
            speaker_of = {s.global_index: s.speaker for s in dialog.sentences}
            for annotation in annotation_set.annotations:
                speakers = {speaker_of[i] for i in annotation.extractive}
                assert speakers == {Speaker.CUSTOMER, Speaker.AGENT}

    def test_abstractive_parts_copied_from_matching_speaker(self):
        pairs = synthetic_annotated_corpus(15, seed=10)
        for dialog, annotation_set in pairs:
            by_speaker = {
                Speaker.CUSTOMER: {
                    s.text for s in dialog.sentences if s.speaker is Speaker.CUSTOMER
                },
                Speaker.AGENT: {
                    s.text for s in dialog.sentences if s.speaker is Speaker.AGENT
                },
            }
            for annotation in annotation_set.annotations:
                assert annotation.abstractive.customer_part in by_speaker[Speaker.CUSTOMER]
                assert annotation.abstractive.agent_part in by_speaker[Speaker.AGENT]

    def test_annotator_ids(self):
        sets = synthetic_annotation_sets(
            synthetic_corpus(3, seed=11), seed=11, annotators=("x", "y")
        )
        for annotation_set in sets:
            assert [a.annotator_id for a in annotation_set.annotations] == ["x", "y"]

    def test_seed_determinism(self):
        a = synthetic_annotated_corpus(5, seed=12)
        b = synthetic_annotated_corpus(5, seed=12)
        assert a == b


class TestRateRecovery:
    """The measurement pipeline should read back the generation rates."""

    def test_first_utterance_rates(self):
        pairs = synthetic_annotated_corpus(
            400, seed=13, first_customer_rate=0.9, first_agent_rate=0.3
        )
        measured = first_utterance_selection_rate(pairs)
        assert measured.customer == pytest.approx(0.9, abs=0.05)
        assert measured.agent == pytest.approx(0.3, abs=0.05)

    def test_attribution_rates(self):
        pairs = synthetic_annotated_corpus(
            400, seed=14, attribution_customer_rate=0.8, attribution_agent_rate=0.2
        )
        measured = attribution_rates(pairs)
        assert measured.customer == pytest.approx(0.8, abs=0.05)
        assert measured.agent == pytest.approx(0.2, abs=0.05)

    def test_extreme_rates_exact(self):
        pairs = synthetic_annotated_corpus(
            60, seed=15,
            first_customer_rate=1.0, first_agent_rate=1.0,
            attribution_customer_rate=1.0, attribution_agent_rate=1.0,
        )
        first = first_utterance_selection_rate(pairs)
        assert first.customer == 1.0
        assert first.agent == 1.0
        attributed = attribution_rates(pairs)
        assert attributed.customer == 1.0
