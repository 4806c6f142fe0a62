"""Command line entry points: finetune and serve.

finetune trains one direction's classifier from a triples file and writes a
checkpoint directory; serve loads one checkpoint per direction and exposes
the wire protocol. Logs go to standard error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from nrp_service.config import ServiceConfig
from nrp_service.modeling import CheckpointScorer

log = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nrp-service")
    sub = parser.add_subparsers(dest="command", required=True)

    ft = sub.add_parser("finetune", help="train a next-response classifier")
    ft.add_argument("--triples", required=True, help="training triples (JSONL)")
    ft.add_argument("--out", required=True, help="checkpoint output directory")
    ft.add_argument("--config", help="ServiceConfig JSON file")
    ft.add_argument("--val-triples", help="validation triples (JSONL)")
    ft.add_argument("--model-id", help="base model id or local directory")
    ft.add_argument("--direction", choices=("fw", "bw"))
    ft.add_argument("--epochs", type=int)
    ft.add_argument("--learning-rate", type=float)
    ft.add_argument("--batch-size", type=int)
    ft.add_argument("--max-seq-length", type=int)
    ft.add_argument("--seed", type=int)

    sv = sub.add_parser("serve", help="serve checkpoints over HTTP")
    sv.add_argument(
        "--checkpoint",
        action="append",
        required=True,
        help="checkpoint directory; repeat to host both directions",
    )
    sv.add_argument("--host")
    sv.add_argument("--port", type=int)
    return parser


def _finetune_config(args: argparse.Namespace) -> ServiceConfig:
    config = ServiceConfig.from_json(args.config) if args.config else ServiceConfig()
    overrides = {
        "model_id": args.model_id,
        "direction": args.direction,
        "epochs": args.epochs,
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
        "max_seq_length": args.max_seq_length,
        "seed": args.seed,
    }
    return dataclasses.replace(config, **{k: v for k, v in overrides.items() if v is not None})


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(message)s")
    import transformers

    transformers.utils.logging.disable_progress_bar()
    args = _build_parser().parse_args(argv)

    if args.command == "finetune":
        from nrp_service.training import finetune

        config = _finetune_config(args)
        try:
            result = finetune(args.triples, config, args.out, args.val_triples)
        except (OSError, ValueError) as exc:
            log.error("%s", exc)
            return 1
        print(result.checkpoint_dir)
        if result.validation_recalls:
            print(f"final validation recall@{config.validation_recall_k}: "
                  f"{result.validation_recalls[-1]:.4f}")
        return 0

    if args.command == "serve":
        from nrp_service.server import serve

        scorers = {}
        try:
            for path in args.checkpoint:
                scorer = CheckpointScorer.load(path)
                if scorer.direction in scorers:
                    raise ValueError(f"duplicate direction {scorer.direction!r} in checkpoints")
                scorers[scorer.direction] = scorer
        except (OSError, ValueError, KeyError) as exc:
            log.error("%s", exc)
            return 1
        first = next(iter(scorers.values()))
        host = args.host or first.config.host
        port = args.port if args.port is not None else first.config.port
        log.info("serving directions %s on %s:%d", sorted(scorers), host, port)
        serve(scorers, host, port)
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
