import pytest
from transformers import AutoTokenizer

from nrp_service.encoding import PairEncoder


@pytest.fixture(scope="module")
def tokenizer(tiny_model_dir):
    return AutoTokenizer.from_pretrained(tiny_model_dir)


def ids_of(tokenizer, text):
    return tokenizer(text, add_special_tokens=False)["input_ids"]


def test_pair_layout(tokenizer):
    encoder = PairEncoder(tokenizer, max_seq_length=32)
    pair = encoder.encode(["router billing", "refund order"], "signal login")
    context = ids_of(tokenizer, "router billing refund order")
    candidate = ids_of(tokenizer, "signal login")
    assert pair.input_ids == (
        [tokenizer.cls_token_id] + context + [tokenizer.sep_token_id]
        + candidate + [tokenizer.sep_token_id]
    )
    assert pair.token_type_ids == [0] * 6 + [1] * 3
    assert not pair.truncated


def test_empty_context(tokenizer):
    encoder = PairEncoder(tokenizer, max_seq_length=32)
    pair = encoder.encode([], "router billing")
    assert pair.input_ids == [
        tokenizer.cls_token_id,
        tokenizer.sep_token_id,
        *ids_of(tokenizer, "router billing"),
        tokenizer.sep_token_id,
    ]
    assert pair.token_type_ids == [0, 0, 1, 1, 1]
    assert not pair.truncated


def test_earliest_sentences_dropped_first(tokenizer):
    # budget = 16 - 3 = 13; three 5-word sentences + 3-word candidate = 18
    encoder = PairEncoder(tokenizer, max_seq_length=16)
    sentences = [
        "router router router router router",
        "billing billing billing billing billing",
        "refund refund refund refund refund",
    ]
    pair = encoder.encode(sentences, "signal login outage")
    kept = ids_of(tokenizer, "billing billing billing billing billing refund refund refund refund refund")
    assert pair.truncated
    assert pair.input_ids[1:11] == kept
    assert len(pair.input_ids) == 16


def test_whole_context_can_disappear(tokenizer):
    encoder = PairEncoder(tokenizer, max_seq_length=12)
    pair = encoder.encode(["router " * 30], "signal login outage")
    assert pair.truncated
    assert pair.input_ids[1] == tokenizer.sep_token_id  # empty first segment


def test_oversized_candidate_tail_truncated(tokenizer):
    encoder = PairEncoder(tokenizer, max_seq_length=8)
    pair = encoder.encode(["router"], "signal login outage billing refund order phone")
    assert pair.truncated
    assert len(pair.input_ids) == 8
    head = ids_of(tokenizer, "signal login outage billing refund")
    assert pair.input_ids == [
        tokenizer.cls_token_id, tokenizer.sep_token_id, *head, tokenizer.sep_token_id,
    ]


def test_unknown_words_map_to_unk(tokenizer):
    encoder = PairEncoder(tokenizer, max_seq_length=32)
    pair = encoder.encode(["completely unseen z9z9"], "router")
    unk = tokenizer.unk_token_id
    assert pair.input_ids.count(unk) == 3
    assert not pair.truncated


def test_extreme_lengths_never_raise(tokenizer):
    encoder = PairEncoder(tokenizer, max_seq_length=8)
    pair = encoder.encode(["router billing"] * 50, "signal " * 100)
    assert pair.truncated
    assert len(pair.input_ids) <= 8


def test_collate_pads_and_masks(tokenizer):
    encoder = PairEncoder(tokenizer, max_seq_length=32)
    pairs = [
        encoder.encode(["router"], "billing"),
        encoder.encode(["router billing refund order"], "signal login outage"),
    ]
    batch = encoder.collate(pairs)
    width = max(len(p.input_ids) for p in pairs)
    assert batch["input_ids"].shape == (2, width)
    short = len(pairs[0].input_ids)
    assert batch["attention_mask"][0, :short].tolist() == [1] * short
    assert batch["attention_mask"][0, short:].tolist() == [0] * (width - short)
    assert batch["input_ids"][0, short:].tolist() == [tokenizer.pad_token_id] * (width - short)
    assert batch["token_type_ids"][0, short:].tolist() == [0] * (width - short)
    assert batch["input_ids"][1].tolist() == pairs[1].input_ids
