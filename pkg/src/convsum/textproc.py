"""Deterministic text normalization, sentence segmentation, and tokenization.

All downstream modules (corpus reconstruction, summarizers, metrics,
analysis) share these primitives so that token and sentence counts are
reproducible. Two tokenization modes exist: the stats mode used for corpus
statistics keeps punctuation as separate tokens, while ``rouge_tokenize``
mirrors the evaluation toolkit convention (lowercase, alphanumeric runs
only).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

__all__ = [
    "TokenizerConfig",
    "normalize",
    "segment_sentences",
    "tokenize",
    "rouge_tokenize",
    "load_abbreviations",
]


@dataclass(frozen=True)
class TokenizerConfig:
    """Switches for normalization and tokenization.

    Masking is idempotent: already-masked text passes through unchanged.
    """

    lowercase: bool = True
    mask_mentions: bool = True
    mask_urls: bool = True


DEFAULT_CONFIG = TokenizerConfig()

# Mask targets. Numeric handles are anonymized end users; named handles are
# company accounts. The replacement tokens themselves are excluded from
# re-masking so normalize(normalize(x)) == normalize(x).
_URL_RE = re.compile(r"https?://\S+|www\.\S+")
_MENTION_RE = re.compile(r"@(\w+)")
_WS_RE = re.compile(r"\s+")

CUSTOMER_MASK = "@Customer_id"
COMPANY_MASK = "@Company"
URL_MASK = "[URL]"
_MASK_HANDLES = {"Customer_id", "Company"}


def _mask_mention(match: re.Match) -> str:
    handle = match.group(1)
    if handle in _MASK_HANDLES:
        return match.group(0)
    if handle.isdigit():
        return CUSTOMER_MASK
    return COMPANY_MASK


def normalize(text: str, config: TokenizerConfig = DEFAULT_CONFIG) -> str:
    """Mask mentions/URLs and collapse whitespace to single spaces."""
    if config.mask_urls:
        text = _URL_RE.sub(URL_MASK, text)
    if config.mask_mentions:
        text = _MENTION_RE.sub(_mask_mention, text)
    return _WS_RE.sub(" ", text).strip()


def load_abbreviations(path: str | None = None) -> frozenset[str]:
    """Abbreviation list used by the segmenter, one entry per line.

    Entries are lowercase and include interior dots but not the final one
    ("e.g", "u.s"). A custom list can be supplied by path.
    """
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = (
            resources.files("convsum.data")
            .joinpath("abbreviations.txt")
            .read_text(encoding="utf-8")
            .splitlines()
        )
    return frozenset(line.strip().lower() for line in lines if line.strip())


_ABBREVIATIONS = load_abbreviations()

_TERMINATORS = ".!?"

# Rough emoji coverage: pictographs, symbols, dingbats, flags.
_EMOJI_RANGES = (
    (0x1F000, 0x1FAFF),
    (0x2600, 0x27BF),
    (0x2B00, 0x2BFF),
    (0xFE00, 0xFE0F),
    (0x1F1E6, 0x1F1FF),
)


def _is_emoji(ch: str) -> bool:
    code = ord(ch)
    return any(lo <= code <= hi for lo, hi in _EMOJI_RANGES)


def _starts_sentence(text: str, pos: int) -> bool:
    # pos is the first character after the inter-sentence space.
    ch = text[pos]
    if ch.isupper() or ch.isdigit() or _is_emoji(ch):
        return True
    # Masked mentions, [URL], quotes and brackets count when they wrap an
    # uppercase start ("@Company They said ..." opens a sentence).
    if ch in "@[\"'(" and pos + 1 < len(text) and text[pos + 1].isupper():
        return True
    return False


def _preceding_chunk(text: str, end: int) -> str:
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:end]


def segment_sentences(text: str, abbreviations: frozenset[str] | None = None) -> list[str]:
    """Split normalized text into sentences.

    Splits after ``. ! ?`` runs followed by a space and a sentence-opening
    character. Abbreviations, decimal numbers, and mask tokens never end a
    sentence. Joining the output with single spaces reproduces the input.
    """
    if abbreviations is None:
        abbreviations = _ABBREVIATIONS
    if not text:
        return []
    sentences = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] not in _TERMINATORS:
            i += 1
            continue
        j = i
        while j + 1 < n and text[j + 1] in _TERMINATORS:
            j += 1
        split = False
        if j + 2 < n and text[j + 1] == " " and _starts_sentence(text, j + 2):
            split = True
            if i == j and text[i] == ".":
                chunk = _preceding_chunk(text, i).lower()
                if chunk in abbreviations:
                    split = False
        if split:
            sentences.append(text[start : j + 1])
            start = j + 2
        i = j + 1
    if start < n:
        sentences.append(text[start:])
    return sentences


def _keep_whole(chunk: str) -> bool:
    if chunk == URL_MASK:
        return True
    return bool(_MENTION_RE.fullmatch(chunk))


def _strippable(ch: str) -> bool:
    return not (ch.isalnum() or ch == "_")


def tokenize(text: str, config: TokenizerConfig = DEFAULT_CONFIG) -> list[str]:
    """Whitespace-split, then peel surrounding punctuation into own tokens.

    Interior punctuation ("don't", "3.50") is preserved. Mask tokens pass
    through whole even with adjacent punctuation ("@Customer_id.").
    """
    tokens: list[str] = []
    for chunk in text.split():
        # Trailing first so "[URL]." exposes the mask before the leading
        # peel can take its opening bracket.
        trailing: list[str] = []
        while chunk and _strippable(chunk[-1]) and not _keep_whole(chunk):
            trailing.append(chunk[-1])
            chunk = chunk[:-1]
        leading: list[str] = []
        while chunk and _strippable(chunk[0]) and not _keep_whole(chunk):
            leading.append(chunk[0])
            chunk = chunk[1:]
        tokens.extend(leading)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(trailing))
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    return tokens


_ROUGE_TOKEN_RE = re.compile(r"[a-z0-9]+")


def rouge_tokenize(text: str) -> list[str]:
    """Evaluation-toolkit tokenization: lowercase alphanumeric runs."""
    return _ROUGE_TOKEN_RE.findall(text.lower())
