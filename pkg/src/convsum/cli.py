"""Command line entry point orchestrating the pipeline.

Subcommands cover reconstruction from the raw tweet CSV, corpus filtering
and splitting, summarization, ROUGE evaluation, annotation QC, corpus
analysis, NRP triple generation and evaluation, and a deterministic
protocol stub server. Configuration comes from an INI file overridden by
CONVSUM_<SECTION>_<KEY> environment variables and then by flags. Logs go
to standard error; data goes to files or standard output.

Exit codes: 0 success, 1 usage, 2 data error, 3 remote-scorer failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

from convsum import __version__
from convsum.analysis import (
    QaSheet,
    attribution_rates,
    dialog_length_stats,
    first_utterance_selection_rate,
    mean_compression_rates,
    qa_score,
    representation_rates,
    summary_length_stats,
)
from convsum.corpus import (
    AnnotationSet,
    Dialog,
    ReconstructionConfig,
    filter_dialogs,
    load_annotated_corpus,
    parse_tweet_csv,
    reconstruct_dialogs,
    save_annotated_corpus,
    split_corpus,
)
from convsum.nrp import (
    BuiltinScorer,
    Direction,
    ScorerError,
    build_nrp_triples,
    evaluate_recall_at_k,
    load_triples,
    remote_scorer,
    save_triples,
    serve_stub,
    train_builtin_scorer,
)
from convsum.quality import run_qc
from convsum.rouge import RougeConfig, evaluate_summary, mean_report
from convsum.summarizers import (
    CesConfig,
    LexRankConfig,
    ces_summary,
    lead_summary,
    lexrank_summary,
    nrp_summary,
    random_summary,
    render_sentences,
)

__all__ = ["main", "build_parser", "load_config"]

log = logging.getLogger("convsum")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_REMOTE = 3

ENV_PREFIX = "CONVSUM"

_DEFAULTS: dict[str, dict[str, str]] = {
    "pipeline": {"seed": "0", "jobs": "0"},
    "filter": {
        "min_utterances": "6",
        "max_utterances": "20",
        "required_speakers": "2",
    },
    "split": {"validation": "0.1", "test": "0.1"},
    "rouge": {"stem": "true", "length_limit": ""},
    "lexrank": {
        "representation": "tf",
        "similarity_threshold": "0.1",
        "damping": "0.15",
    },
    "ces": {
        "samples_per_iteration": "1000",
        "elite_fraction": "0.05",
        "smoothing": "0.7",
        "iterations": "30",
        "expansion_k": "2",
        "coverage_weight": "1.0",
        "centrality_weight": "1.0",
        "position_weight": "1.0",
    },
    "nrp": {"k_negatives": "5", "unit": "sentence"},
}


def load_config(path: str | None) -> configparser.ConfigParser:
    """Defaults, then the INI file, then CONVSUM_<SECTION>_<KEY> overrides."""
    cfg = configparser.ConfigParser()
    cfg.read_dict(_DEFAULTS)
    if path:
        if not Path(path).exists():
            raise FileNotFoundError(f"config file not found: {path}")
        cfg.read(path, encoding="utf-8")
    prefix = ENV_PREFIX + "_"
    for name, value in os.environ.items():
        if not name.startswith(prefix):
            continue
        rest = name[len(prefix):]
        section, _, key = rest.partition("_")
        section, key = section.lower(), key.lower()
        if cfg.has_section(section) and key:
            cfg.set(section, key, value)
    return cfg


def _dump_config(cfg: configparser.ConfigParser) -> str:
    buffer = io.StringIO()
    cfg.write(buffer)
    return buffer.getvalue()


def _derived_seed(seed: int, dialog_id: str) -> int:
    # Stable across runs and processes, unlike hash().
    return (seed * 1000003 + zlib.crc32(dialog_id.encode("utf-8"))) % 2**32


def _load_corpus(path: str) -> dict[str, tuple[Dialog, AnnotationSet | None]]:
    result = load_annotated_corpus(path)
    for tag, reason in result.skipped:
        log.warning("skipped %s: %s", tag, reason)
    if not result.corpus:
        raise ValueError(f"no dialogs loaded from {path}")
    return result.corpus


def _annotated_pairs(
    corpus: dict[str, tuple[Dialog, AnnotationSet | None]],
) -> list[tuple[Dialog, AnnotationSet]]:
    return [
        (dialog, annotations)
        for dialog, annotations in corpus.values()
        if annotations is not None and annotations.annotations
    ]


# --- subcommand: reconstruct --------------------------------------------

def _cmd_reconstruct(args, cfg) -> int:
    records = parse_tweet_csv(args.csv)
    config = ReconstructionConfig(merge_consecutive_same_author=not args.no_merge)
    result = reconstruct_dialogs(records, config)
    log.info(
        "reconstructed %d dialogs (%d cycle groups, %d duplicate ids)",
        len(result.dialogs),
        len(result.cycles),
        len(result.duplicates),
    )
    save_annotated_corpus(
        {d.dialog_id: (d, None) for d in result.dialogs}, args.output
    )
    return EXIT_OK


# --- subcommand: filter --------------------------------------------------

def _cmd_filter(args, cfg) -> int:
    corpus = _load_corpus(args.input)
    result = filter_dialogs(
        [dialog for dialog, _ in corpus.values()],
        min_utterances=args.min_utterances,
        max_utterances=args.max_utterances,
        required_speakers=args.required_speakers,
    )
    log.info(
        "kept %d dialogs, removed %s", len(result.kept), result.removal_counts
    )
    save_annotated_corpus(
        {d.dialog_id: (d, corpus[d.dialog_id][1]) for d in result.kept},
        args.output,
    )
    return EXIT_OK


# --- subcommand: split ---------------------------------------------------

def _cmd_split(args, cfg) -> int:
    corpus = _load_corpus(args.input)
    ratios = (1.0 - args.validation - args.test, args.validation, args.test)
    split = split_corpus(
        {k: v for k, v in corpus.items()}, ratios=ratios, seed=args.seed
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, ids in (
        ("train", split.train),
        ("validation", split.validation),
        ("test", split.test),
    ):
        path = out_dir / f"{args.prefix}{name}.jsonl"
        save_annotated_corpus({i: corpus[i] for i in ids}, path)
        log.info("%s: %d dialogs -> %s", name, len(ids), path)
    return EXIT_OK


# --- subcommand: summarize ----------------------------------------------

def _lexrank_config(cfg) -> LexRankConfig:
    return LexRankConfig(
        representation=cfg.get("lexrank", "representation"),
        similarity_threshold=cfg.getfloat("lexrank", "similarity_threshold"),
        damping=cfg.getfloat("lexrank", "damping"),
    )


def _ces_config(cfg, seed: int) -> CesConfig:
    return CesConfig(
        samples_per_iteration=cfg.getint("ces", "samples_per_iteration"),
        elite_fraction=cfg.getfloat("ces", "elite_fraction"),
        smoothing=cfg.getfloat("ces", "smoothing"),
        iterations=cfg.getint("ces", "iterations"),
        expansion_k=cfg.getint("ces", "expansion_k"),
        coverage_weight=cfg.getfloat("ces", "coverage_weight"),
        centrality_weight=cfg.getfloat("ces", "centrality_weight"),
        position_weight=cfg.getfloat("ces", "position_weight"),
        seed=seed,
    )


def _summarize_one(
    dialog: Dialog,
    method: str,
    seed: int,
    lexrank_config: LexRankConfig,
    ces_config: CesConfig,
) -> dict:
    if method == "lead":
        summary = lead_summary(dialog)
    elif method == "random":
        summary = random_summary(dialog, _derived_seed(seed, dialog.dialog_id))
    elif method == "lexrank":
        summary = lexrank_summary(dialog, lexrank_config)
    elif method == "ces":
        per_dialog = dataclasses.replace(
            ces_config, seed=_derived_seed(seed, dialog.dialog_id)
        )
        summary = ces_summary(dialog, per_dialog)
    else:
        raise ValueError(f"unknown method {method!r}")
    return {
        "dialog_id": dialog.dialog_id,
        "method": method,
        "selected": sorted(summary.selected),
        "text": " ".join(render_sentences(dialog, sorted(summary.selected))),
    }


def _summarize_star(payload) -> dict:
    # Worker errors come back as data so one bad dialog cannot kill the
    # whole pool run.
    try:
        return _summarize_one(*payload)
    except (ValueError, RuntimeError) as exc:
        return {"dialog_id": payload[0].dialog_id, "error": str(exc)}


def _nrp_scorers(args, corpus, seed: int):
    if args.fw_endpoint:
        fw = remote_scorer(args.fw_endpoint, Direction.FORWARD)
        bw = (
            remote_scorer(args.bw_endpoint, Direction.BACKWARD)
            if args.bw_endpoint
            else None
        )
        return fw, bw
    dialogs = [dialog for dialog, _ in corpus.values()]
    log.info("no endpoint given; training builtin scorers on the input corpus")
    fw_triples = build_nrp_triples(
        dialogs, k_negatives=args.k_negatives, direction=Direction.FORWARD, seed=seed
    )
    bw_triples = build_nrp_triples(
        dialogs, k_negatives=args.k_negatives, direction=Direction.BACKWARD, seed=seed
    )
    fw = train_builtin_scorer(fw_triples, Direction.FORWARD, seed=seed)
    bw = train_builtin_scorer(bw_triples, Direction.BACKWARD, seed=seed)
    return fw, bw


def _cmd_summarize(args, cfg) -> int:
    corpus = _load_corpus(args.input)
    seed = args.seed
    lexrank_config = _lexrank_config(cfg)
    ces_config = _ces_config(cfg, seed)
    dialogs = [dialog for dialog, _ in (corpus[k] for k in sorted(corpus))]

    rows: list[dict] = []
    failures: list[str] = []

    if args.method == "nrp":
        # Scorer handles may hold sessions; keep this path serial.
        fw, bw = _nrp_scorers(args, corpus, seed)
        for dialog in dialogs:
            try:
                summary = nrp_summary(dialog, fw, bw)
            except ScorerError:
                raise
            except ValueError as exc:
                failures.append(dialog.dialog_id)
                log.error("dialog %s: %s", dialog.dialog_id, exc)
                continue
            rows.append(
                {
                    "dialog_id": dialog.dialog_id,
                    "method": "nrp",
                    "selected": sorted(summary.selected),
                    "text": " ".join(
                        render_sentences(dialog, sorted(summary.selected))
                    ),
                }
            )
    else:
        jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
        payloads = [
            (dialog, args.method, seed, lexrank_config, ces_config)
            for dialog in dialogs
        ]
        if jobs > 1 and len(payloads) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as executor:
                # map preserves input order, so the reduction is deterministic.
                outcomes = list(executor.map(_summarize_star, payloads, chunksize=8))
        else:
            outcomes = [_summarize_star(payload) for payload in payloads]
        for outcome in outcomes:
            if "error" in outcome:
                failures.append(outcome["dialog_id"])
                log.error("dialog %s: %s", outcome["dialog_id"], outcome["error"])
            else:
                rows.append(outcome)

    if failures:
        log.warning("%d dialogs failed: %s", len(failures), ", ".join(failures[:10]))
    if not rows:
        raise ValueError("all dialogs failed to summarize")
    with open(args.output, "w", encoding="utf-8") as fh:
        for row in sorted(rows, key=lambda r: r["dialog_id"]):
            fh.write(json.dumps(row, ensure_ascii=False))
            fh.write("\n")
    log.info("wrote %d summaries -> %s", len(rows), args.output)
    return EXIT_OK


# --- subcommand: evaluate ------------------------------------------------

def _references(
    dialog: Dialog, annotations: AnnotationSet, kind: str
) -> list[str | list[str]]:
    refs: list[str | list[str]] = []
    for annotation in annotations.annotations:
        if kind == "abstractive":
            text = annotation.abstractive.full_text
            if text:
                refs.append(text)
        else:
            if annotation.extractive:
                refs.append(render_sentences(dialog, sorted(annotation.extractive)))
    return refs


def _cmd_evaluate(args, cfg) -> int:
    corpus = _load_corpus(args.corpus)
    with open(args.summaries, encoding="utf-8") as fh:
        summary_rows = [json.loads(line) for line in fh if line.strip()]
    if not summary_rows:
        raise ValueError(f"no summaries in {args.summaries}")

    limit = args.limit
    if limit is None:
        raw = cfg.get("rouge", "length_limit").strip()
        limit = int(raw) if raw else None
    config = RougeConfig(stem=cfg.getboolean("rouge", "stem"), length_limit=limit)

    reports = []
    out_rows: list[tuple[str, str, float, float, float]] = []
    skipped = 0
    for row in sorted(summary_rows, key=lambda r: r["dialog_id"]):
        dialog_id = row["dialog_id"]
        if dialog_id not in corpus:
            log.error("summary for unknown dialog %s", dialog_id)
            skipped += 1
            continue
        dialog, annotations = corpus[dialog_id]
        if annotations is None or not annotations.annotations:
            log.warning("dialog %s has no annotations, skipping", dialog_id)
            skipped += 1
            continue
        refs = _references(dialog, annotations, args.reference)
        if not refs:
            log.warning("dialog %s has no %s references", dialog_id, args.reference)
            skipped += 1
            continue
        if row.get("selected") is not None:
            candidate = render_sentences(dialog, sorted(row["selected"]))
        else:
            candidate = row["text"]
        report = evaluate_summary(candidate, refs, config)
        reports.append(report)
        for metric, score in report.metrics().items():
            out_rows.append(
                (dialog_id, metric, score.precision, score.recall, score.f)
            )
    if not reports:
        raise ValueError("no dialog could be evaluated")

    mean = mean_report(reports)
    for metric, score in mean.metrics().items():
        out_rows.append(("MEAN", metric, score.precision, score.recall, score.f))

    sink = open(args.output, "w", encoding="utf-8", newline="") if args.output else sys.stdout
    try:
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(["dialog_id", "metric", "precision", "recall", "f"])
        for dialog_id, metric, p, r, f in out_rows:
            writer.writerow([dialog_id, metric, f"{p:.6f}", f"{r:.6f}", f"{f:.6f}"])
    finally:
        if args.output:
            sink.close()
    log.info(
        "evaluated %d dialogs (%d skipped); mean F: %s",
        len(reports),
        skipped,
        {m: round(s.f, 4) for m, s in mean.metrics().items()},
    )
    return EXIT_OK


# --- subcommand: qc ------------------------------------------------------

def _cmd_qc(args, cfg) -> int:
    corpus = _load_corpus(args.input)
    pairs = _annotated_pairs(corpus)
    if not pairs:
        raise ValueError("corpus has no annotations")
    report = run_qc(pairs, similarity_threshold=args.threshold)
    print(f"annotations kept: {report.kept}")
    print(f"annotations discarded: {len(report.discarded)}")
    for record in report.discarded:
        print(f"  {record.dialog_id}\t{record.annotator_id}\t{record.reason.value}")
    print("per annotator:")
    for annotator, stats in sorted(report.per_annotator.items()):
        jaccard = (
            f"{stats.mean_adapted_jaccard:.4f}"
            if stats.mean_adapted_jaccard is not None
            else "n/a"
        )
        print(
            f"  {annotator}\tannotations={stats.n_annotations}"
            f"\tdiscarded={stats.n_discarded}\tmean_adapted_jaccard={jaccard}"
        )
    if args.json:
        payload = {
            "kept": report.kept,
            "discarded": [
                {
                    "dialog_id": r.dialog_id,
                    "annotator_id": r.annotator_id,
                    "reason": r.reason.value,
                }
                for r in report.discarded
            ],
            "per_annotator": {
                a: {
                    "n_annotations": s.n_annotations,
                    "n_discarded": s.n_discarded,
                    "mean_adapted_jaccard": s.mean_adapted_jaccard,
                }
                for a, s in report.per_annotator.items()
            },
        }
        Path(args.json).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return EXIT_OK


# --- subcommand: analyze -------------------------------------------------

def _format_breakdown(label: str, breakdown) -> str:
    cells = [
        f"{side.mean:9.2f} +/- {side.std:7.2f}"
        for side in (breakdown.overall, breakdown.customer, breakdown.agent)
    ]
    return f"{label:<12}" + "  ".join(cells)


def _cmd_analyze(args, cfg) -> int:
    corpus = _load_corpus(args.input)
    dialogs = [dialog for dialog, _ in corpus.values()]
    pairs = _annotated_pairs(corpus)
    population = not args.sample_std
    wanted = set(args.report) if args.report else {"all"}

    def on(name: str) -> bool:
        return "all" in wanted or name in wanted

    if on("lengths"):
        stats = dialog_length_stats(dialogs, population_std=population)
        print("dialog lengths (mean +/- std)")
        print(f"{'':<12}{'overall':^22}  {'customer':^22}  {'agent':^22}")
        print(_format_breakdown("utterances", stats.utterances))
        print(_format_breakdown("sentences", stats.sentences))
        print(_format_breakdown("tokens", stats.tokens))
        if pairs:
            summary_stats = summary_length_stats(pairs, population_std=population)
            print("summary lengths in tokens (mean +/- std)")
            print(_format_breakdown("abstractive", summary_stats.abstractive))
            ext = summary_stats.extractive
            print(f"{'extractive':<12}{ext.mean:9.2f} +/- {ext.std:7.2f}")
        print()
    if on("compression"):
        if pairs:
            rates = mean_compression_rates(pairs)
            print("compression rates")
            print(f"  abstractive: {rates['abstractive']:.4f}")
            print(f"  extractive:  {rates['extractive']:.4f}")
        else:
            log.warning("compression report needs annotations, skipping")
        print()
    if on("positions"):
        if pairs:
            rates = first_utterance_selection_rate(pairs)
            print("first-utterance selection rates")
            print(f"  customer: {rates.customer:.4f}")
            print(f"  agent:    {rates.agent:.4f}")
        else:
            log.warning("positions report needs annotations, skipping")
        print()
    if on("attribution"):
        if pairs:
            rates = attribution_rates(pairs)
            print("abstractive part attribution to first utterance")
            print(f"  customer: {rates.customer:.4f}")
            print(f"  agent:    {rates.agent:.4f}")
        else:
            log.warning("attribution report needs annotations, skipping")
        print()
    if on("representation"):
        if args.summaries:
            with open(args.summaries, encoding="utf-8") as fh:
                rows = [json.loads(line) for line in fh if line.strip()]
            items = [
                (row["text"], corpus[row["dialog_id"]][0])
                for row in rows
                if row["dialog_id"] in corpus
            ]
            rates = representation_rates(items)
            print("speaker representation of generated summaries")
            for representation, rate in rates.items():
                print(f"  {representation.value}: {rate:.4f}")
        else:
            log.warning("representation report needs --summaries, skipping")
        print()
    if on("qa"):
        if args.qa_sheets:
            scores = []
            with open(args.qa_sheets, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    raw = json.loads(line)
                    sheet = QaSheet(
                        dialog_id=raw["dialog_id"],
                        weights=tuple(raw["weights"]),
                        indicators=tuple(tuple(r) for r in raw["indicators"]),
                    )
                    scores.append((sheet.dialog_id, qa_score(sheet)))
            if not scores:
                raise ValueError("no QA sheets loaded")
            print("QA scores")
            for dialog_id, score in scores:
                print(f"  {dialog_id}: {score:.2f}")
            print(f"  mean: {sum(s for _, s in scores) / len(scores):.2f}")
        else:
            log.warning("qa report needs --qa-sheets, skipping")
    return EXIT_OK


# --- subcommands: nrp-triples, nrp-eval, serve-stub ----------------------

def _cmd_nrp_triples(args, cfg) -> int:
    corpus = _load_corpus(args.input)
    dialogs = [dialog for dialog, _ in (corpus[k] for k in sorted(corpus))]
    triples = build_nrp_triples(
        dialogs,
        k_negatives=args.k_negatives,
        direction=Direction(args.direction),
        seed=args.seed,
        unit=args.unit,
    )
    save_triples(triples, args.output)
    log.info("wrote %d triples -> %s", len(triples), args.output)
    return EXIT_OK


def _cmd_nrp_eval(args, cfg) -> int:
    triples = load_triples(args.triples)
    direction = Direction(args.direction)
    if args.endpoint:
        scorer = remote_scorer(args.endpoint, direction)
    elif args.train_triples:
        scorer = train_builtin_scorer(
            load_triples(args.train_triples), direction, seed=args.seed
        )
    else:
        raise ValueError("need --endpoint or --train-triples")
    recalls = evaluate_recall_at_k(scorer, triples, ks=tuple(args.ks))
    for k in sorted(recalls):
        print(f"recall@{k}\t{recalls[k]:.6f}")
    return EXIT_OK


_STUB_WEIGHTS = (2.0, 1.0, 0.5, 0.25)
_STUB_BIAS = -1.0


def _stub_scorer(direction: Direction) -> BuiltinScorer:
    import numpy as np

    return BuiltinScorer(
        direction, np.array(_STUB_WEIGHTS, dtype=float), _STUB_BIAS, []
    )


def _cmd_serve_stub(args, cfg) -> int:
    if args.train_triples:
        triples = load_triples(args.train_triples)
        scorers = {
            Direction.FORWARD: train_builtin_scorer(
                [t for t in triples if t.direction is Direction.FORWARD]
                or triples,
                Direction.FORWARD,
                seed=args.seed,
            ),
            Direction.BACKWARD: train_builtin_scorer(
                [t for t in triples if t.direction is Direction.BACKWARD]
                or triples,
                Direction.BACKWARD,
                seed=args.seed,
            ),
        }
    else:
        scorers = {
            Direction.FORWARD: _stub_scorer(Direction.FORWARD),
            Direction.BACKWARD: _stub_scorer(Direction.BACKWARD),
        }
    server = serve_stub(scorers, host=args.host, port=args.port)
    print(f"listening on http://{args.host}:{server.server_port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        log.info("shutting down")
    finally:
        server.server_close()
    return EXIT_OK


# --- subcommand: run-all -------------------------------------------------

def _cmd_run_all(args, cfg) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.raw_csv:
        rc = _cmd_reconstruct(
            argparse.Namespace(
                csv=args.raw_csv,
                output=out_dir / "corpus.jsonl",
                no_merge=False,
            ),
            cfg,
        )
        if rc != EXIT_OK:
            return rc
        corpus_path = out_dir / "corpus.jsonl"
    else:
        corpus_path = Path(args.corpus)

    rc = _cmd_filter(
        argparse.Namespace(
            input=str(corpus_path),
            output=out_dir / "filtered.jsonl",
            min_utterances=cfg.getint("filter", "min_utterances"),
            max_utterances=cfg.getint("filter", "max_utterances"),
            required_speakers=cfg.getint("filter", "required_speakers"),
        ),
        cfg,
    )
    if rc != EXIT_OK:
        return rc

    rc = _cmd_split(
        argparse.Namespace(
            input=str(out_dir / "filtered.jsonl"),
            out_dir=str(out_dir),
            prefix="",
            validation=cfg.getfloat("split", "validation"),
            test=cfg.getfloat("split", "test"),
            seed=args.seed,
        ),
        cfg,
    )
    if rc != EXIT_OK:
        return rc

    rc = _cmd_summarize(
        argparse.Namespace(
            input=str(out_dir / "test.jsonl"),
            output=out_dir / "summaries.jsonl",
            method=args.method,
            seed=args.seed,
            jobs=args.jobs,
            k_negatives=cfg.getint("nrp", "k_negatives"),
            fw_endpoint=None,
            bw_endpoint=None,
        ),
        cfg,
    )
    if rc != EXIT_OK:
        return rc

    test_corpus = _load_corpus(str(out_dir / "test.jsonl"))
    if _annotated_pairs(test_corpus):
        return _cmd_evaluate(
            argparse.Namespace(
                summaries=str(out_dir / "summaries.jsonl"),
                corpus=str(out_dir / "test.jsonl"),
                reference=args.reference,
                limit=args.limit,
                output=str(out_dir / "evaluation.csv"),
            ),
            cfg,
        )
    log.info("test split has no annotations; skipping evaluation")
    return EXIT_OK


# --- parser ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on usage errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="convsum", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI config file")
    parser.add_argument(
        "--config-dump",
        action="store_true",
        help="print the effective configuration and exit",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("reconstruct", help="build dialogs from the raw tweet CSV")
    p.add_argument("csv", help="raw tweet CSV file")
    p.add_argument("--output", required=True, help="corpus JSONL to write")
    p.add_argument(
        "--no-merge",
        action="store_true",
        help="keep consecutive same-author tweets as separate utterances",
    )

    p = sub.add_parser("filter", help="apply utterance-count and speaker filters")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--min-utterances", type=int, default=None)
    p.add_argument("--max-utterances", type=int, default=None)
    p.add_argument("--required-speakers", type=int, default=None)

    p = sub.add_parser("split", help="deterministic train/validation/test split")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--prefix", default="")
    p.add_argument("--validation", type=float, default=None)
    p.add_argument("--test", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("summarize", help="run an extractive summarizer")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument(
        "--method",
        choices=("lead", "random", "lexrank", "ces", "nrp"),
        default="lead",
    )
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--k-negatives", type=int, default=None)
    p.add_argument("--fw-endpoint", help="remote forward scorer for --method nrp")
    p.add_argument("--bw-endpoint", help="remote backward scorer for --method nrp")

    p = sub.add_parser("evaluate", help="score summaries against references")
    p.add_argument("--summaries", required=True)
    p.add_argument("--corpus", required=True, help="annotated corpus JSONL")
    p.add_argument(
        "--reference", choices=("abstractive", "extractive"), default="abstractive"
    )
    p.add_argument("--limit", type=int, default=None, help="candidate token limit")
    p.add_argument("--output", default=None, help="CSV path (default stdout)")

    p = sub.add_parser("qc", help="annotation quality control report")
    p.add_argument("--input", required=True)
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--json", default=None, help="also write the report as JSON")

    p = sub.add_parser("analyze", help="corpus statistics and analyses")
    p.add_argument("--input", required=True)
    p.add_argument(
        "--report",
        action="append",
        choices=(
            "lengths",
            "compression",
            "positions",
            "attribution",
            "representation",
            "qa",
            "all",
        ),
        help="subreport to produce (repeatable, default all)",
    )
    p.add_argument("--summaries", help="summaries JSONL for the representation report")
    p.add_argument("--qa-sheets", help="QA sheets JSONL for the qa report")
    p.add_argument(
        "--sample-std",
        action="store_true",
        help="use sample instead of population standard deviation",
    )

    p = sub.add_parser("nrp-triples", help="build next-response triples")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--direction", choices=("fw", "bw"), default="fw")
    p.add_argument("--k-negatives", type=int, default=None)
    p.add_argument("--unit", choices=("sentence", "utterance"), default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("nrp-eval", help="recall@k of a scorer over triples")
    p.add_argument("--triples", required=True)
    p.add_argument("--endpoint", help="remote scorer endpoint")
    p.add_argument("--train-triples", help="fit the builtin scorer on these triples")
    p.add_argument("--direction", choices=("fw", "bw"), default="fw")
    p.add_argument("--ks", type=int, nargs="+", default=[1, 2, 5])
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("serve-stub", help="deterministic protocol stub server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--train-triples", help="fit builtin scorers on these triples")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("run-all", help="reconstruct, filter, split, summarize, evaluate")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--raw-csv")
    group.add_argument("--corpus", help="already-reconstructed corpus JSONL")
    p.add_argument("--out-dir", required=True)
    p.add_argument(
        "--method",
        choices=("lead", "random", "lexrank", "ces"),
        default="lead",
    )
    p.add_argument(
        "--reference", choices=("abstractive", "extractive"), default="abstractive"
    )
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)

    return parser


_HANDLERS: dict[str, Callable] = {
    "reconstruct": _cmd_reconstruct,
    "filter": _cmd_filter,
    "split": _cmd_split,
    "summarize": _cmd_summarize,
    "evaluate": _cmd_evaluate,
    "qc": _cmd_qc,
    "analyze": _cmd_analyze,
    "nrp-triples": _cmd_nrp_triples,
    "nrp-eval": _cmd_nrp_eval,
    "serve-stub": _cmd_serve_stub,
    "run-all": _cmd_run_all,
}

# Flag name -> (config section, key) used to fill unset flags from config.
_CONFIG_BACKED = {
    "seed": ("pipeline", "seed"),
    "jobs": ("pipeline", "jobs"),
    "min_utterances": ("filter", "min_utterances"),
    "max_utterances": ("filter", "max_utterances"),
    "required_speakers": ("filter", "required_speakers"),
    "validation": ("split", "validation"),
    "test": ("split", "test"),
    "k_negatives": ("nrp", "k_negatives"),
    "unit": ("nrp", "unit"),
}


def _fill_from_config(args: argparse.Namespace, cfg) -> None:
    for attr, (section, key) in _CONFIG_BACKED.items():
        if getattr(args, attr, None) is None and hasattr(args, attr):
            raw = cfg.get(section, key)
            value: object = raw
            if attr in ("seed", "jobs", "min_utterances", "max_utterances",
                        "required_speakers", "k_negatives"):
                value = int(raw)
            elif attr in ("validation", "test"):
                value = float(raw)
            setattr(args, attr, value)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    if args.config_dump:
        sys.stdout.write(_dump_config(cfg))
        return EXIT_OK
    if not args.command:
        parser.error("a subcommand is required")
    _fill_from_config(args, cfg)
    handler = _HANDLERS[args.command]
    try:
        return handler(args, cfg)
    except ScorerError as exc:
        log.error("scorer failure: %s", exc)
        return EXIT_REMOTE
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (ValueError, RuntimeError, OSError, json.JSONDecodeError, KeyError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
