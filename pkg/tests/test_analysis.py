from __future__ import annotations

import math
import random

import pytest

from convsum.analysis import (
    QaSheet,
    Representation,
    attribute_abstractive_part,
    attribution_rates,
    compression_rate,
    dialog_length_stats,
    first_utterance_selection_rate,
    lcs_recall,
    mean_compression_rates,
    qa_score,
    random_two_utterance_summary,
    regularized_incomplete_beta,
    representation_rates,
    speaker_representation,
    summary_length_stats,
    welch_t_test,
)
from convsum.corpus import AbstractiveSummary, Annotation, AnnotationSet, Speaker
from convsum.synthetic import synthetic_corpus

from conftest import make_dialog

C = Speaker.CUSTOMER
A = Speaker.AGENT


def _dialog_with_utterances(dialog_id: str, n_utterances: int):
    turns = []
    for i in range(n_utterances):
        speaker = C if i % 2 == 0 else A
        turns.append((speaker, [f"utterance {i} sentence one word{i}"]))
    return make_dialog(dialog_id, turns)


class TestDialogLengthStats:
    def test_single_dialog_exact(self):
        dialog = make_dialog(
            "d",
            [
                (C, ["one two three", "four five"]),
                (A, ["six seven eight nine"]),
            ],
        )
        stats = dialog_length_stats([dialog])
        assert stats.utterances.overall.mean == 2.0
        assert stats.utterances.overall.std == 0.0
        assert stats.sentences.overall.mean == 3.0
        assert stats.tokens.overall.mean == 9.0
        assert stats.utterances.customer.mean == 1.0
        assert stats.utterances.agent.mean == 1.0

    def test_two_dialogs_hand_arithmetic(self):
        dialogs = [
            _dialog_with_utterances("d1", 6),
            _dialog_with_utterances("d2", 14),
        ]
        stats = dialog_length_stats(dialogs)
        assert stats.utterances.overall.mean == 10.0
        assert stats.utterances.overall.std == 4.0

    def test_customer_plus_agent_equals_overall(self):
        corpus = synthetic_corpus(25, seed=40)
        stats = dialog_length_stats(corpus)
        for field in ("utterances", "sentences", "tokens"):
            breakdown = getattr(stats, field)
            assert breakdown.customer.mean + breakdown.agent.mean == pytest.approx(
                breakdown.overall.mean, abs=1e-12
            )

    def test_sample_std_flag(self):
        dialogs = [
            _dialog_with_utterances("d1", 6),
            _dialog_with_utterances("d2", 14),
        ]
        population = dialog_length_stats(dialogs, population_std=True)
        sample = dialog_length_stats(dialogs, population_std=False)
        assert population.utterances.overall.std == 4.0
        assert sample.utterances.overall.std == pytest.approx(4.0 * math.sqrt(2))

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            dialog_length_stats([])

    def test_permutation_invariant(self):
        corpus = synthetic_corpus(10, seed=41)
        forward = dialog_length_stats(corpus)
        backward = dialog_length_stats(list(reversed(corpus)))
        for field in ("utterances", "sentences", "tokens"):
            fwd = getattr(forward, field)
            bwd = getattr(backward, field)
            for part in ("overall", "customer", "agent"):
                assert getattr(fwd, part).mean == pytest.approx(
                    getattr(bwd, part).mean, abs=1e-12
                )
                assert getattr(fwd, part).std == pytest.approx(
                    getattr(bwd, part).std, abs=1e-12
                )


def _annotated(dialog, extractive, customer_part="", agent_part="", annotator="ann1"):
    annotation = Annotation(
        annotator_id=annotator,
        extractive=frozenset(extractive),
        abstractive=AbstractiveSummary(customer_part, agent_part),
    )
    return dialog, AnnotationSet(dialog.dialog_id, (annotation,))


class TestSummaryLengthStats:
    def test_two_summaries_hand_arithmetic(self):
        dialog = _dialog_with_utterances("d", 6)
        thirty = " ".join(["tok"] * 28)
        pairs = [
            _annotated(dialog, {0, 1}, customer_part=thirty, agent_part="a b"),
            _annotated(dialog, {0, 1}, customer_part=" ".join(["tok"] * 40), agent_part="a b"),
        ]
        stats = summary_length_stats(pairs)
        assert stats.abstractive.overall.mean == 36.0
        assert stats.abstractive.overall.std == 6.0

    def test_extractive_tokens_counted(self):
        dialog = make_dialog("d", [(C, ["one two three"]), (A, ["four five"])])
        pairs = [_annotated(dialog, {0, 1}, "x", "y")]
        stats = summary_length_stats(pairs)
        assert stats.extractive.mean == 5.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            summary_length_stats([])


class TestCompressionRate:
    def test_summary_equals_dialog(self):
        dialog = make_dialog("d", [(C, ["a b c"]), (A, ["d e"])])
        assert compression_rate(dialog, "a b c d e") == 0.0

    def test_hand_value(self):
        dialog = make_dialog("d", [(C, [" ".join(["w"] * 60)]), (A, [" ".join(["w"] * 40)])])
        assert compression_rate(dialog, " ".join(["w"] * 15)) == pytest.approx(0.85)

    def test_extractive_indices_accepted(self):
        dialog = make_dialog("d", [(C, ["a b c d"]), (A, ["e f"])])
        assert compression_rate(dialog, [1]) == pytest.approx(1 - 2 / 6)

    def test_mean_rates(self):
        dialog = make_dialog(
            "d", [(C, [" ".join(["w"] * 50)]), (A, [" ".join(["w"] * 50)])]
        )
        pairs = [_annotated(dialog, {0}, " ".join(["w"] * 15), "")]
        rates = mean_compression_rates(pairs)
        assert rates["abstractive"] == pytest.approx(0.85)
        assert rates["extractive"] == pytest.approx(0.50)


class TestFirstUtteranceRates:
    def test_hand_constructed(self):
        dialog = _dialog_with_utterances("d", 6)
        # sentence 0 is in the customer's first utterance, sentence 1 in the
        # agent's first; sentences 2.. are later
        includes_both_firsts = _annotated(dialog, {0, 1, 2, 3})
        skips_firsts = _annotated(dialog, {2, 3, 4, 5})
        rates = first_utterance_selection_rate([includes_both_firsts, skips_firsts])
        assert rates.customer == 0.5
        assert rates.agent == 0.5

    def test_zero_when_untouched(self):
        dialog = _dialog_with_utterances("d", 6)
        rates = first_utterance_selection_rate([_annotated(dialog, {2, 3})])
        assert rates.customer == 0.0
        assert rates.agent == 0.0


class TestAttribution:
    def test_verbatim_copy_attributes_to_source(self):
        dialog = make_dialog(
            "d",
            [
                (C, ["my order number nine is late"]),
                (A, ["we are checking the warehouse"]),
                (C, ["please hurry it is urgent today"]),
            ],
        )
        customer_utterances = [u for u in dialog.utterances if u.speaker is C]
        attributed = attribute_abstractive_part(
            "please hurry it is urgent today", customer_utterances
        )
        assert attributed == 2

    def test_ties_go_to_earlier_utterance(self):
        dialog = make_dialog(
            "d",
            [(C, ["same words here"]), (A, ["reply text"]), (C, ["same words here"])],
        )
        customer_utterances = [u for u in dialog.utterances if u.speaker is C]
        assert attribute_abstractive_part("same words here", customer_utterances) == 0

    def test_matches_bruteforce_recall_table(self):
        corpus = synthetic_corpus(5, seed=42, min_utterances=6, max_utterances=6)
        for dialog in corpus:
            customer = [u for u in dialog.utterances if u.speaker is C]
            part = customer[1].sentences[0].text
            best = max(
                range(len(customer)),
                key=lambda i: (lcs_recall(customer[i].text, part), -i),
            )
            assert (
                attribute_abstractive_part(part, customer)
                == customer[best].index
            )

    def test_attribution_rates_on_constructed_pairs(self):
        dialog = make_dialog(
            "d",
            [
                (C, ["first customer words alpha"]),
                (A, ["first agent words beta"]),
                (C, ["second customer words gamma"]),
                (A, ["second agent words delta"]),
            ],
        )
        from_first = _annotated(
            dialog,
            {0, 1},
            customer_part="first customer words alpha",
            agent_part="second agent words delta",
        )
        rates = attribution_rates([from_first])
        assert rates.customer == 1.0
        assert rates.agent == 0.0


class TestSpeakerRepresentation:
    def _dialog(self):
        return make_dialog(
            "d",
            [
                (C, ["my laptop is on fire please help"]),
                (A, ["have you tried turning it off"]),
                (C, ["yes and the flames are still there"]),
                (A, ["we will send a replacement today"]),
            ],
        )

    def test_both_when_mixed(self):
        dialog = self._dialog()
        summary = (
            "my laptop is on fire please help "
            "we will send a replacement today"
        )
        assert speaker_representation(summary, dialog) is Representation.BOTH

    def test_agent_only(self):
        dialog = self._dialog()
        summary = (
            "have you tried turning it off "
            "we will send a replacement today"
        )
        assert speaker_representation(summary, dialog) is Representation.AGENT_ONLY

    def test_customer_only(self):
        dialog = self._dialog()
        summary = (
            "my laptop is on fire please help "
            "yes and the flames are still there"
        )
        assert speaker_representation(summary, dialog) is Representation.CUSTOMER_ONLY

    def test_requires_two_utterances(self):
        dialog = make_dialog("d", [(C, ["only one utterance"])])
        with pytest.raises(ValueError):
            speaker_representation("text", dialog)

    def test_random_summary_deterministic(self):
        dialog = self._dialog()
        assert random_two_utterance_summary(dialog, seed=7) == (
            random_two_utterance_summary(dialog, seed=7)
        )

    def test_random_summary_uses_two_distinct_in_order(self):
        dialog = self._dialog()
        texts = {u.text: u.index for u in dialog.utterances}
        for seed in range(30):
            summary = random_two_utterance_summary(dialog, seed)
            # summary is the two utterance texts joined in dialog order
            indices = [
                texts[part]
                for part in _split_known_parts(summary, list(texts))
            ]
            assert len(indices) == 2
            assert indices[0] < indices[1]

    def test_representation_rates(self):
        dialog = self._dialog()
        items = [
            ("my laptop is on fire please help we will send a replacement today", dialog),
            ("have you tried turning it off we will send a replacement today", dialog),
        ]
        rates = representation_rates(items)
        assert rates[Representation.BOTH] == 0.5
        assert rates[Representation.AGENT_ONLY] == 0.5
        assert rates[Representation.CUSTOMER_ONLY] == 0.0


def _split_known_parts(summary: str, known: list[str]) -> list[str]:
    parts = []
    rest = summary
    while rest:
        for text in known:
            if rest == text:
                parts.append(text)
                rest = ""
                break
            if rest.startswith(text + " "):
                parts.append(text)
                rest = rest[len(text) + 1 :]
                break
        else:
            raise AssertionError(f"unrecognized summary piece: {rest!r}")
    return parts


class TestLcsRecall:
    def test_exact_copy_is_one(self):
        assert lcs_recall("the cat sat", "the cat sat") == 1.0

    def test_partial(self):
        assert lcs_recall("the cat sat on the mat", "the cat was on the mat") == (
            pytest.approx(5 / 6)
        )

    def test_empty_reference_is_zero(self):
        assert lcs_recall("anything", "") == 0.0


class TestQaScore:
    def test_all_ones_is_hundred(self):
        sheet = QaSheet("d", (1.0, 1.0), ((1, 1), (1, 1), (1, 1)))
        assert qa_score(sheet) == pytest.approx(100.0)

    def test_all_zeros_is_zero(self):
        sheet = QaSheet("d", (1.0,), ((0,), (0,), (0,)))
        assert qa_score(sheet) == 0.0

    def test_hand_case_sixty(self):
        # w = (1, 2/3); q1 answered by all three, q2 by none:
        # 100 * (3*1) / (3 * (5/3)) = 60
        sheet = QaSheet("d", (1.0, 2 / 3), ((1, 0), (1, 0), (1, 0)))
        assert qa_score(sheet) == pytest.approx(60.0)

    def test_linearity_in_indicators(self):
        rng = random.Random(43)
        for _ in range(50):
            k = rng.randint(1, 5)
            weights = tuple(rng.choice([1 / 3, 2 / 3, 1.0]) for _ in range(k))
            rows = [[rng.randint(0, 1) for _ in range(k)] for _ in range(3)]
            i, j = rng.randrange(3), rng.randrange(k)
            rows[i][j] = 0
            before = qa_score(QaSheet("d", weights, tuple(tuple(r) for r in rows)))
            rows[i][j] = 1
            after = qa_score(QaSheet("d", weights, tuple(tuple(r) for r in rows)))
            expected_delta = 100.0 * weights[j] / (3.0 * sum(weights))
            assert after - before == pytest.approx(expected_delta, abs=1e-9)

    def test_validation(self):
        with pytest.raises(ValueError):
            QaSheet("d", (1.0,), ((1,), (1,)))  # only 2 annotator rows
        with pytest.raises(ValueError):
            QaSheet("d", (0.0,), ((1,), (1,), (1,)))  # weight outside (0,1]
        with pytest.raises(ValueError):
            QaSheet("d", (1.0,), ((2,), (0,), (1,)))  # non-binary indicator
        with pytest.raises(ValueError):
            QaSheet("d", (1.0, 1.0), ((1,), (1, 0), (1, 1)))  # ragged rows


# Values frozen from a trusted statistics library before implementation.
BETAINC_PINS = [
    (0.5, 0.5, 0.25, 0.333333333333333),
    (2.0, 3.0, 0.4, 0.5248),
    (5.0, 1.0, 0.9, 0.59049),
    (10.0, 10.0, 0.5, 0.5),
    (0.5, 4.0, 0.01, 0.21657559375),
]

WELCH_PINS = [
    ([1, 2, 3, 4, 5], [2, 3, 4, 5, 6], -1.0, 8.0, 0.346593507087334),
    (
        [5.1, 4.9, 6.2, 5.8, 5.5, 4.7, 5.9],
        [3.2, 4.1, 2.8, 3.9],
        5.26134166716893,
        5.93334070033889,
        0.00196548068419334,
    ),
    (
        [0.1, 0.4, 0.35, 0.8],
        [0.12, 0.41, 0.33, 0.78, 0.55],
        -0.140068491084337,
        5.97710534202136,
        0.893206656813856,
    ),
]


class TestIncompleteBeta:
    @pytest.mark.parametrize("a,b,x,expected", BETAINC_PINS)
    def test_frozen_pins(self, a, b, x, expected):
        assert regularized_incomplete_beta(a, b, x) == pytest.approx(
            expected, abs=1e-10
        )

    def test_boundaries(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0

    def test_complement_symmetry(self):
        rng = random.Random(44)
        for _ in range(100):
            a = rng.uniform(0.2, 20)
            b = rng.uniform(0.2, 20)
            x = rng.random()
            left = regularized_incomplete_beta(a, b, x)
            right = regularized_incomplete_beta(b, a, 1.0 - x)
            assert left == pytest.approx(1.0 - right, abs=1e-10)

    def test_against_library_oracle(self):
        special = pytest.importorskip("scipy.special")
        rng = random.Random(45)
        worst = 0.0
        for _ in range(500):
            a = rng.uniform(0.1, 50)
            b = rng.uniform(0.1, 50)
            x = rng.random()
            ours = regularized_incomplete_beta(a, b, x)
            theirs = float(special.betainc(a, b, x))
            worst = max(worst, abs(ours - theirs))
        assert worst < 1e-10


class TestWelch:
    @pytest.mark.parametrize("a,b,t,df,p", WELCH_PINS)
    def test_frozen_pins(self, a, b, t, df, p):
        result = welch_t_test(a, b)
        assert result.t == pytest.approx(t, abs=1e-9)
        assert result.df == pytest.approx(df, abs=1e-9)
        assert result.p_two_sided == pytest.approx(p, abs=1e-10)

    def test_identical_samples(self):
        result = welch_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert result.t == 0.0
        assert result.p_two_sided == 1.0

    def test_symmetry(self):
        rng = random.Random(46)
        for _ in range(50):
            a = [rng.gauss(0, 1) for _ in range(rng.randint(3, 12))]
            b = [rng.gauss(0.5, 2) for _ in range(rng.randint(3, 12))]
            ab = welch_t_test(a, b)
            ba = welch_t_test(b, a)
            assert ab.t == pytest.approx(-ba.t, abs=1e-12)
            assert ab.p_two_sided == pytest.approx(ba.p_two_sided, abs=1e-12)

    def test_bernoulli_regime(self):
        a = [1.0] * 86 + [0.0] * 24  # proportion 0.78
        b = [1.0] * 51 + [0.0] * 59  # proportion 0.46
        result = welch_t_test(a, b)
        assert result.p_two_sided < 1e-5

    def test_degenerate_zero_variance_equal_means(self):
        result = welch_t_test([2.0, 2.0], [2.0, 2.0])
        assert result.t == 0.0
        assert result.p_two_sided == 1.0

    def test_degenerate_zero_variance_distinct_means(self):
        result = welch_t_test([1.0, 1.0], [2.0, 2.0])
        assert result.p_two_sided == 0.0
        assert result.t == -math.inf

    def test_small_sample_rejected(self):
        with pytest.raises(ValueError):
            welch_t_test([1.0], [1.0, 2.0])

    def test_against_library_oracle(self):
        stats = pytest.importorskip("scipy.stats")
        rng = random.Random(47)
        for _ in range(100):
            a = [rng.gauss(0, 1) for _ in range(rng.randint(2, 15))]
            b = [rng.gauss(0.3, 1.5) for _ in range(rng.randint(2, 15))]
            ours = welch_t_test(a, b)
            theirs = stats.ttest_ind(a, b, equal_var=False)
            assert ours.t == pytest.approx(theirs.statistic, abs=1e-9)
            assert ours.p_two_sided == pytest.approx(theirs.pvalue, abs=1e-9)
