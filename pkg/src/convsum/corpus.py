"""Tweet CSV parsing, dialog reconstruction, filtering, and corpus I/O.

The raw input is the customer-support tweet dump: one CSV row per tweet,
linked by in_response_to_tweet_id / response_tweet_id. Dialogs are rebuilt
by depth-first traversal from root tweets, siblings ordered by created_at,
and consecutive tweets by the same author merged into a single utterance.
The annotated corpus is stored as line-delimited JSON, one dialog per line.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Mapping

from convsum.textproc import TokenizerConfig, DEFAULT_CONFIG, normalize, segment_sentences, tokenize

__all__ = [
    "Speaker",
    "TweetRecord",
    "Sentence",
    "Utterance",
    "Dialog",
    "AbstractiveSummary",
    "Annotation",
    "AnnotationSet",
    "CorpusSplit",
    "SchemaError",
    "RowError",
    "ReconstructionConfig",
    "ReconstructionResult",
    "FilterResult",
    "LoadResult",
    "parse_tweet_csv",
    "reconstruct_dialogs",
    "filter_dialogs",
    "sample_dialogs",
    "split_corpus",
    "save_annotated_corpus",
    "load_annotated_corpus",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "tweet_id",
    "author_id",
    "inbound",
    "created_at",
    "text",
    "response_tweet_id",
    "in_response_to_tweet_id",
)


class SchemaError(ValueError):
    """Input does not match the expected column or field layout."""


class RowError(ValueError):
    """A single row could not be parsed; carries the 1-based row number."""

    def __init__(self, row_number: int, message: str) -> None:
        super().__init__(f"row {row_number}: {message}")
        self.row_number = row_number


class Speaker(str, Enum):
    CUSTOMER = "Customer"
    AGENT = "Agent"


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: str
    author_id: str
    inbound: bool  # true = written by the customer side
    text: str
    response_tweet_ids: tuple[str, ...]
    in_response_to_tweet_id: str | None
    created_at: datetime


@dataclass(frozen=True)
class Sentence:
    global_index: int  # 0-based across the whole dialog
    utterance_index: int
    speaker: Speaker
    text: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class Utterance:
    index: int
    speaker: Speaker
    tweet_ids: tuple[str, ...]
    text: str
    sentences: tuple[Sentence, ...]


@dataclass(frozen=True)
class Dialog:
    dialog_id: str
    utterances: tuple[Utterance, ...]
    speaker_count: int  # distinct author ids among the source tweets

    @property
    def sentences(self) -> list[Sentence]:
        return [s for u in self.utterances for s in u.sentences]

    @property
    def sentence_count(self) -> int:
        return sum(len(u.sentences) for u in self.utterances)


@dataclass(frozen=True)
class AbstractiveSummary:
    customer_part: str
    agent_part: str

    @property
    def full_text(self) -> str:
        parts = [p for p in (self.customer_part, self.agent_part) if p]
        return " ".join(parts)


@dataclass(frozen=True)
class Annotation:
    annotator_id: str
    extractive: frozenset[int]  # sentence global indices
    abstractive: AbstractiveSummary


@dataclass(frozen=True)
class AnnotationSet:
    dialog_id: str
    annotations: tuple[Annotation, ...]


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]
    seed: int


_TWITTER_TIME_FORMAT = "%a %b %d %H:%M:%S %z %Y"


def parse_created_at(value: str) -> datetime:
    """Twitter export format first, ISO-8601 as fallback; always UTC-aware."""
    value = value.strip()
    try:
        parsed = datetime.strptime(value, _TWITTER_TIME_FORMAT)
    except ValueError:
        parsed = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


_TRUE_VALUES = {"true", "1", "yes"}
_FALSE_VALUES = {"false", "0", "no"}


def _parse_inbound(value: str, row_number: int) -> bool:
    lowered = value.strip().lower()
    if lowered in _TRUE_VALUES:
        return True
    if lowered in _FALSE_VALUES:
        return False
    raise RowError(row_number, f"unrecognized inbound value {value!r}")


def _split_id_list(cell: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in cell.split(",") if part.strip())


def parse_tweet_csv(source: str | Path | IO) -> list[TweetRecord]:
    """Parse the raw tweet CSV into records.

    Accepts a path or an open text/binary stream. Quoted fields with
    embedded commas and newlines are handled by the csv module.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8-sig", newline="") as fh:
            return parse_tweet_csv(fh)
    if not hasattr(source, "read"):
        raise TypeError("source must be a path or a readable stream")
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase, io.BytesIO)) or "b" in getattr(
        source, "mode", ""
    ):
        source = io.TextIOWrapper(source, encoding="utf-8-sig", newline="")

    reader = csv.DictReader(source)
    header = reader.fieldnames or []
    missing = [col for col in CSV_COLUMNS if col not in header]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")

    records: list[TweetRecord] = []
    for row_number, row in enumerate(reader, start=2):
        tweet_id = (row["tweet_id"] or "").strip()
        if not tweet_id:
            raise RowError(row_number, "empty tweet_id")
        try:
            created_at = parse_created_at(row["created_at"] or "")
        except ValueError as exc:
            raise RowError(row_number, f"unparseable created_at: {exc}") from None
        in_response = (row["in_response_to_tweet_id"] or "").strip()
        records.append(
            TweetRecord(
                tweet_id=tweet_id,
                author_id=(row["author_id"] or "").strip(),
                inbound=_parse_inbound(row["inbound"] or "", row_number),
                text=row["text"] or "",
                response_tweet_ids=_split_id_list(row["response_tweet_id"] or ""),
                in_response_to_tweet_id=in_response or None,
                created_at=created_at,
            )
        )
    return records


@dataclass(frozen=True)
class ReconstructionConfig:
    # Merging consecutive same-author tweets into one utterance is the
    # default convention; turn off to count one utterance per tweet.
    merge_consecutive_same_author: bool = True
    tokenizer: TokenizerConfig = DEFAULT_CONFIG


@dataclass
class ReconstructionResult:
    dialogs: list[Dialog]
    cycles: list[tuple[str, ...]]  # tweet-id groups unreachable from any root
    duplicates: list[str]  # tweet ids reachable through more than one path


def _dialog_from_tweets(
    tweets: list[TweetRecord], config: ReconstructionConfig
) -> Dialog | None:
    groups: list[list[TweetRecord]] = []
    for tweet in tweets:
        if (
            config.merge_consecutive_same_author
            and groups
            and groups[-1][-1].author_id == tweet.author_id
        ):
            groups[-1].append(tweet)
        else:
            groups.append([tweet])

    utterances: list[Utterance] = []
    global_index = 0
    for utt_index, group in enumerate(groups):
        speaker = Speaker.CUSTOMER if group[0].inbound else Speaker.AGENT
        text = " ".join(
            part for part in (normalize(t.text, config.tokenizer) for t in group) if part
        )
        sentences = []
        for sent_text in segment_sentences(text):
            sentences.append(
                Sentence(
                    global_index=global_index,
                    utterance_index=utt_index,
                    speaker=speaker,
                    text=sent_text,
                    tokens=tuple(tokenize(sent_text, config.tokenizer)),
                )
            )
            global_index += 1
        if not sentences:
            # Tweet with no textual content after masking; drop the turn.
            continue
        utterances.append(
            Utterance(
                index=len(utterances),
                speaker=speaker,
                tweet_ids=tuple(t.tweet_id for t in group),
                text=text,
                sentences=tuple(sentences),
            )
        )
    if not utterances:
        return None
    # Dropped empty turns leave gaps; reindex both levels to stay contiguous.
    utterances = _reindex(utterances)
    return Dialog(
        dialog_id=tweets[0].tweet_id,
        utterances=tuple(utterances),
        speaker_count=len({t.author_id for t in tweets}),
    )


def _reindex(utterances: list[Utterance]) -> list[Utterance]:
    out: list[Utterance] = []
    global_index = 0
    for utt_index, utt in enumerate(utterances):
        sentences = []
        for sent in utt.sentences:
            sentences.append(
                Sentence(global_index, utt_index, utt.speaker, sent.text, sent.tokens)
            )
            global_index += 1
        out.append(
            Utterance(utt_index, utt.speaker, utt.tweet_ids, utt.text, tuple(sentences))
        )
    return out


def reconstruct_dialogs(
    records: Iterable[TweetRecord], config: ReconstructionConfig | None = None
) -> ReconstructionResult:
    """Rebuild dialogs from tweet records.

    Roots are tweets with no in_response_to_tweet_id (or one pointing at a
    missing tweet). Each root's thread is flattened depth-first with
    siblings in created_at order. Tweets unreachable from any root form
    reference cycles and are reported, not silently dropped.
    """
    if config is None:
        config = ReconstructionConfig()
    by_id: dict[str, TweetRecord] = {}
    for record in records:
        if record.tweet_id in by_id:
            raise SchemaError(f"duplicate tweet_id {record.tweet_id}")
        by_id[record.tweet_id] = record

    children: dict[str, set[str]] = {tid: set() for tid in by_id}
    roots: list[TweetRecord] = []
    for record in by_id.values():
        parent = record.in_response_to_tweet_id
        if parent is None or parent == record.tweet_id or parent not in by_id:
            roots.append(record)
        else:
            children[parent].add(record.tweet_id)
        for child_id in record.response_tweet_ids:
            if child_id in by_id and child_id != record.tweet_id:
                children[record.tweet_id].add(child_id)
    roots.sort(key=lambda r: (r.created_at, r.tweet_id))

    def order_key(tid: str) -> tuple[datetime, str]:
        record = by_id[tid]
        return (record.created_at, record.tweet_id)

    visited: set[str] = set()
    duplicates: list[str] = []
    dialogs: list[Dialog] = []
    for root in roots:
        if root.tweet_id in visited:
            duplicates.append(root.tweet_id)
            continue
        thread: list[TweetRecord] = []
        stack = [root.tweet_id]
        while stack:
            tid = stack.pop()
            if tid in visited:
                duplicates.append(tid)
                continue
            visited.add(tid)
            thread.append(by_id[tid])
            # Reversed so the earliest sibling is popped first.
            for child_id in sorted(children[tid], key=order_key, reverse=True):
                if child_id in visited:
                    duplicates.append(child_id)
                else:
                    stack.append(child_id)
        dialog = _dialog_from_tweets(thread, config)
        if dialog is not None:
            dialogs.append(dialog)

    cycles = _group_unvisited(by_id, visited)
    for group in cycles:
        log.warning("reference cycle skipped: %s", ",".join(group))
    for tid in duplicates:
        log.warning("tweet %s reachable more than once; kept first occurrence", tid)
    return ReconstructionResult(dialogs=dialogs, cycles=cycles, duplicates=duplicates)


def _group_unvisited(
    by_id: Mapping[str, TweetRecord], visited: set[str]
) -> list[tuple[str, ...]]:
    # Union unvisited tweets along their parent links; each component is one
    # reported cycle (plus anything hanging off it).
    unvisited = [tid for tid in by_id if tid not in visited]
    parent_of: dict[str, str] = {}

    def find(tid: str) -> str:
        root = tid
        while parent_of.get(root, root) != root:
            root = parent_of[root]
        while parent_of.get(tid, tid) != tid:
            parent_of[tid], tid = root, parent_of[tid]
        return root

    for tid in unvisited:
        parent_of.setdefault(tid, tid)
    for tid in unvisited:
        parent = by_id[tid].in_response_to_tweet_id
        if parent is not None and parent in parent_of:
            parent_of[find(tid)] = find(parent)

    groups: dict[str, list[str]] = {}
    for tid in unvisited:
        groups.setdefault(find(tid), []).append(tid)
    return [tuple(sorted(members)) for _, members in sorted(groups.items())]


@dataclass
class FilterResult:
    kept: list[Dialog]
    removal_counts: dict[str, int]  # reason -> number removed


def filter_dialogs(
    dialogs: Iterable[Dialog],
    min_utterances: int = 6,
    max_utterances: int = 20,
    required_speakers: int = 2,
) -> FilterResult:
    """Keep dialogs with utterance count in [min, max] and exactly the
    required number of distinct speakers. Length is checked first, so a
    dialog failing both is counted under its length reason."""
    kept: list[Dialog] = []
    counts = {"too_short": 0, "too_long": 0, "speaker_count": 0}
    for dialog in dialogs:
        n = len(dialog.utterances)
        if n < min_utterances:
            counts["too_short"] += 1
        elif n > max_utterances:
            counts["too_long"] += 1
        elif dialog.speaker_count != required_speakers:
            counts["speaker_count"] += 1
        else:
            kept.append(dialog)
    return FilterResult(kept=kept, removal_counts=counts)


def sample_dialogs(dialogs: Iterable[Dialog], n: int, seed: int) -> list[Dialog]:
    """Uniform sample without replacement, deterministic for a fixed seed.

    Output is ordered by dialog_id so downstream processing is stable.
    """
    pool = sorted(dialogs, key=lambda d: d.dialog_id)
    if n > len(pool):
        raise ValueError(f"cannot sample {n} from {len(pool)} dialogs")
    chosen = random.Random(seed).sample(pool, n)
    return sorted(chosen, key=lambda d: d.dialog_id)


def split_corpus(
    corpus: Iterable[str] | Iterable[Dialog] | Mapping[str, object],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> CorpusSplit:
    """Deterministic shuffle then contiguous partition.

    Validation and test sizes are floored; the remainder goes to train.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    if isinstance(corpus, Mapping):
        ids = list(corpus.keys())
    else:
        ids = [d.dialog_id if isinstance(d, Dialog) else str(d) for d in corpus]
    if len(ids) != len(set(ids)):
        raise ValueError("duplicate dialog ids")
    if len(ids) < 3:
        raise ValueError(f"need at least 3 dialogs to split, got {len(ids)}")
    ids.sort()
    random.Random(seed).shuffle(ids)
    n = len(ids)
    n_val = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_val - n_test
    return CorpusSplit(
        train=tuple(ids[:n_train]),
        validation=tuple(ids[n_train : n_train + n_val]),
        test=tuple(ids[n_train + n_val :]),
        seed=seed,
    )


def _dialog_to_json(dialog: Dialog, annotations: AnnotationSet | None) -> dict:
    return {
        "dialog_id": dialog.dialog_id,
        "utterances": [
            {
                "index": u.index,
                "speaker": u.speaker.value,
                "tweet_ids": list(u.tweet_ids),
                "sentences": [
                    {"global_index": s.global_index, "text": s.text} for s in u.sentences
                ],
            }
            for u in dialog.utterances
        ],
        "annotations": [
            {
                "annotator_id": a.annotator_id,
                "extractive": sorted(a.extractive),
                "abstractive": {
                    "customer_part": a.abstractive.customer_part,
                    "agent_part": a.abstractive.agent_part,
                },
            }
            for a in (annotations.annotations if annotations else ())
        ],
    }


def save_annotated_corpus(
    corpus: Mapping[str, tuple[Dialog, AnnotationSet | None]], path: str | Path
) -> None:
    """Write one dialog object per line, ordered by dialog_id, UTF-8."""
    with open(path, "w", encoding="utf-8") as fh:
        for dialog_id in sorted(corpus):
            dialog, annotations = corpus[dialog_id]
            fh.write(json.dumps(_dialog_to_json(dialog, annotations), ensure_ascii=False))
            fh.write("\n")


# Accepted aliases for corpora exported by other tooling.
_KEY_ALIASES = {
    "dialog_id": ("dialog_id", "conversation_id", "id"),
    "utterances": ("utterances", "turns"),
    "annotations": ("annotations", "summaries"),
}


def _lookup(obj: dict, key: str):
    for alias in _KEY_ALIASES.get(key, (key,)):
        if alias in obj:
            return obj[alias]
    raise KeyError(key)


def _dialog_from_json(
    obj: dict, tokenizer: TokenizerConfig = DEFAULT_CONFIG
) -> tuple[Dialog, AnnotationSet]:
    dialog_id = str(_lookup(obj, "dialog_id"))
    utterances: list[Utterance] = []
    global_index = 0
    for utt_index, utt_obj in enumerate(_lookup(obj, "utterances")):
        speaker = Speaker(utt_obj["speaker"])
        if int(utt_obj["index"]) != utt_index:
            raise ValueError(f"utterance index {utt_obj['index']} out of order")
        sentences = []
        for sent_obj in utt_obj["sentences"]:
            if int(sent_obj["global_index"]) != global_index:
                raise ValueError(
                    f"sentence global_index {sent_obj['global_index']} out of order"
                )
            text = sent_obj["text"]
            sentences.append(
                Sentence(
                    global_index=global_index,
                    utterance_index=utt_index,
                    speaker=speaker,
                    text=text,
                    tokens=tuple(tokenize(text, tokenizer)),
                )
            )
            global_index += 1
        if not sentences:
            raise ValueError(f"utterance {utt_index} has no sentences")
        utterances.append(
            Utterance(
                index=utt_index,
                speaker=speaker,
                tweet_ids=tuple(str(t) for t in utt_obj.get("tweet_ids", ())),
                text=" ".join(s.text for s in sentences),
                sentences=tuple(sentences),
            )
        )
    if not utterances:
        raise ValueError("dialog has no utterances")
    dialog = Dialog(
        dialog_id=dialog_id,
        utterances=tuple(utterances),
        speaker_count=len({u.speaker for u in utterances}),
    )

    sentence_count = dialog.sentence_count
    annotations: list[Annotation] = []
    seen_annotators: set[str] = set()
    for ann_obj in obj.get("annotations", obj.get("summaries", ())) or ():
        annotator_id = str(ann_obj["annotator_id"])
        if annotator_id in seen_annotators:
            raise ValueError(f"duplicate annotator_id {annotator_id}")
        seen_annotators.add(annotator_id)
        extractive = frozenset(int(i) for i in ann_obj.get("extractive", ()))
        bad = [i for i in extractive if not 0 <= i < sentence_count]
        if bad:
            raise ValueError(
                f"extractive indices {sorted(bad)} out of range for "
                f"{sentence_count} sentences"
            )
        abstractive_obj = ann_obj.get("abstractive", {})
        annotations.append(
            Annotation(
                annotator_id=annotator_id,
                extractive=extractive,
                abstractive=AbstractiveSummary(
                    customer_part=abstractive_obj.get("customer_part", ""),
                    agent_part=abstractive_obj.get("agent_part", ""),
                ),
            )
        )
    return dialog, AnnotationSet(dialog_id=dialog_id, annotations=tuple(annotations))


@dataclass
class LoadResult:
    corpus: dict[str, tuple[Dialog, AnnotationSet]]
    skipped: list[tuple[str, str]]  # (dialog_id or line tag, reason)


def load_annotated_corpus(path: str | Path) -> LoadResult:
    """Load the native line-delimited corpus, validating invariants.

    Entries violating the schema or any invariant are skipped and reported
    in the result rather than aborting the whole load.
    """
    corpus: dict[str, tuple[Dialog, AnnotationSet]] = {}
    skipped: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tag = f"line {line_number}"
            try:
                obj = json.loads(line)
                tag = str(obj.get("dialog_id", tag)) if isinstance(obj, dict) else tag
                dialog, annotations = _dialog_from_json(obj)
            except (ValueError, KeyError, TypeError) as exc:
                skipped.append((tag, str(exc)))
                log.warning("skipping %s: %s", tag, exc)
                continue
            if dialog.dialog_id in corpus:
                skipped.append((dialog.dialog_id, "duplicate dialog_id"))
                log.warning("skipping duplicate dialog_id %s", dialog.dialog_id)
                continue
            corpus[dialog.dialog_id] = (dialog, annotations)
    return LoadResult(corpus=corpus, skipped=skipped)
