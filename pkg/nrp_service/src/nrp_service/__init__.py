"""Neural next-response scorer: fine-tuning and wire-protocol serving.

Fine-tunes a pretrained bidirectional transformer encoder as a binary
next-response classifier over "[CLS] context [SEP] candidate [SEP]" pairs
and serves positive-class probabilities over HTTP (/score, /score_batch,
/health). Consumes the triple JSONL format produced by the summarization
toolkit and answers its golden conformance transcripts.
"""

from nrp_service.config import DIRECTIONS, ServiceConfig
from nrp_service.encoding import EncodedPair, PairEncoder
from nrp_service.modeling import CheckpointScorer, load_base_model, save_checkpoint
from nrp_service.server import create_app, serve
from nrp_service.training import FinetuneResult, finetune, recall_at_k
from nrp_service.triples import Triple, group_triples, read_triples

__all__ = [
    "DIRECTIONS",
    "ServiceConfig",
    "Triple",
    "read_triples",
    "group_triples",
    "EncodedPair",
    "PairEncoder",
    "load_base_model",
    "save_checkpoint",
    "CheckpointScorer",
    "FinetuneResult",
    "finetune",
    "recall_at_k",
    "create_app",
    "serve",
]

__version__ = "0.1.0"
