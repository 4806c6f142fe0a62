"""Customer-support dialog summarization toolkit.

Reconstructs two-party support dialogs from raw tweet exports, generates
extractive summaries with five unsupervised methods, and scores summaries
against reference annotations with a faithful ROUGE reimplementation plus
quality-control and corpus-analysis utilities.
"""

__version__ = "0.1.0"

from convsum.corpus import (
    AnnotationSet,
    CorpusSplit,
    Dialog,
    Sentence,
    Speaker,
    TweetRecord,
    Utterance,
)

__all__ = [
    "AnnotationSet",
    "CorpusSplit",
    "Dialog",
    "Sentence",
    "Speaker",
    "TweetRecord",
    "Utterance",
    "__version__",
]
