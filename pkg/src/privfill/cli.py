"""Command-line entry point: prep, infill, calibrate, rewrite, evaluate, report."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from privfill import config as cfgmod
from privfill import corpus_prep, infill_dataset
from privfill.dp_mechanism import (
    DEFAULT_CLIP_BOUNDS,
    BudgetLedger,
    ClipBounds,
    PrivacySpec,
    calibrate_bounds,
    read_calibration_report,
    write_calibration_report,
)
from privfill.evaluation import harness, metrics, providers
from privfill.evaluation.report import (
    EvalReport,
    SchemaError,
    merge_reports,
    per_document_csv,
    read_report,
    render_privacy_table,
    render_utility_table,
    reports_to_csv,
    write_report,
)
from privfill.evaluation.rouge import rouge_l_f, rouge_n_f
from privfill.rewriter import (
    DEFAULT_PARAPHRASE_TEMPLATE,
    MECHANISMS,
    PRIVFILL,
    BackendError,
    GenerationLimits,
    RewriteError,
    RewriteJob,
    load_backend,
    segment_sentences,
)

log = logging.getLogger("privfill")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 2, 3, 4


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _write_jsonl(path, records) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
            n += 1
    return n


def _read_jsonl(path) -> list[dict]:
    try:
        return list(corpus_prep.read_jsonl(path))
    except FileNotFoundError as exc:
        raise DataError(f"cannot read {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSONL in {path}: {exc}") from exc


def _read_records(path: Path) -> list[dict]:
    if path.suffix == ".csv":
        with open(path, encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))
    return _read_jsonl(path)


def _read_docs(path):
    try:
        return [corpus_prep.Document.from_record(r) for r in _read_jsonl(path)]
    except (KeyError, ValueError) as exc:
        raise DataError(f"bad document record in {path}: {exc}") from exc


# prep -----------------------------------------------------------------------

def cmd_prep(args, cfg) -> int:
    src = Path(args.in_path)
    if args.source == "enron":
        if src.is_dir():
            if not any(src.iterdir()):
                raise DataError(f"input directory {src} is empty")
            emails = list(corpus_prep.read_maildir(src, folders=tuple(args.folders)))
        elif src.is_file():
            emails = list(corpus_prep.read_email_jsonl(src, folders=tuple(args.folders)))
        else:
            raise DataError(f"cannot read {src}")
        if not emails:
            raise DataError(f"no emails found under {src}")
        result = corpus_prep.prepare_enron(
            emails, percentile=args.percentile, min_sentences=args.min_sentences
        )
        docs, stats, drops = result.documents, result.stats, result.drop_log
        extra = {"author_threshold": result.author_threshold}
    else:
        if not src.is_file():
            raise DataError(f"cannot read {src}")
        records = _read_records(src)
        if not records:
            raise DataError(f"{src} holds no records")
        task = dataclasses.replace(corpus_prep.TASK_PRESETS[args.source], seed=args.seed)
        try:
            docs = corpus_prep.build_label_task(records, task)
        except (corpus_prep.LabelError, KeyError) as exc:
            raise DataError(str(exc)) from exc
        stats = corpus_prep.PrepStats(input_count=len(records), output_count=len(docs))
        drops, extra = [], {}
    out = Path(args.out)
    corpus_prep.write_documents(out, docs)
    _write_jsonl(out.with_name(out.name + ".drops.jsonl"), drops)
    stats_doc = {**dataclasses.asdict(stats), **extra}
    out.with_name(out.name + ".stats.json").write_text(json.dumps(stats_doc, indent=2, sort_keys=True) + "\n")
    print(f"{args.source}: {stats.input_count} in, {stats.output_count} out")
    return EXIT_OK


# infill ---------------------------------------------------------------------

def cmd_infill(args, cfg) -> int:
    src = Path(args.in_path)
    if not src.is_file():
        raise DataError(f"cannot read {src}")
    source = infill_dataset.WIKI_STYLE if args.style == "wiki" else infill_dataset.CRAWL_STYLE
    seed = args.seed if args.seed is not None else infill_dataset.TRAINING_DEFAULTS["seed"]
    samples = list(infill_dataset.build_samples(
        infill_dataset.iter_jsonl_texts(src, args.field), source, seed=seed, clean=args.style == "wiki"
    ))
    if not samples:
        raise DataError("no samples produced")
    overrides = {k: v for k, v in (("train_fraction", args.train_fraction), ("seed", args.seed)) if v is not None}
    manifest = infill_dataset.emit_training_manifest(**overrides)
    train, val = infill_dataset.merge_and_split(samples, manifest["train_fraction"], manifest["seed"])
    out = Path(args.out)
    infill_dataset.write_samples(out, train)
    infill_dataset.write_samples(out.with_name(out.name + ".val.jsonl"), val)
    out.with_name(out.name + ".training.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"{len(train)} train / {len(val)} validation samples")
    return EXIT_OK


# calibrate ------------------------------------------------------------------

def _load_model(identifier: str, retries: int):
    last = None
    for _ in range(retries + 1):
        try:
            return load_backend(identifier)
        except BackendError as exc:
            last = exc
    raise last


def cmd_calibrate(args, cfg) -> int:
    backend = args.backend or cfg["backend"]
    model = _load_model(backend, int(cfg["backend_retries"]))
    texts = [r["text"] for r in _read_jsonl(args.in_path)]
    if not texts:
        raise DataError("no texts to calibrate on")
    if len(texts) > args.count:
        rng = np.random.default_rng(args.seed)
        texts = [texts[i] for i in sorted(rng.choice(len(texts), args.count, replace=False))]
    bounds = calibrate_bounds(model, texts, count=args.count, max_len=args.max_len or cfg["max_len"])
    write_calibration_report(args.out, bounds, len(texts), model.provider_id)
    print(f"logit range ({bounds.logit_min:g}, {bounds.logit_max:g}) over {len(texts)} texts")
    return EXIT_OK


# rewrite --------------------------------------------------------------------

def _dp_params(args):
    supplied = [
        flag for flag, value in (
            ("--epsilon", args.epsilon), ("--sensitivity", args.sensitivity),
            ("--logit-min", args.logit_min), ("--logit-max", args.logit_max),
            ("--calibration", args.calibration),
        ) if value is not None
    ]
    if args.mechanism == PRIVFILL:
        if supplied:
            raise UsageError(f"privfill is not a DP mechanism; remove {', '.join(supplied)}")
        return None, None
    if args.epsilon is None:
        raise UsageError(f"{args.mechanism} requires an explicit --epsilon")
    if args.calibration:
        bounds = read_calibration_report(args.calibration)
    elif args.logit_min is not None or args.logit_max is not None:
        if args.logit_min is None or args.logit_max is None:
            raise UsageError("give both --logit-min and --logit-max")
        bounds = ClipBounds(args.logit_min, args.logit_max)
    else:
        bounds = DEFAULT_CLIP_BOUNDS
    spec = PrivacySpec.from_epsilon(args.epsilon, args.sensitivity if args.sensitivity is not None else 1.0)
    return bounds, spec


def cmd_rewrite(args, cfg) -> int:
    try:
        bounds, spec = _dp_params(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    if cfgmod.manifest_path(out).exists() and not args.overwrite:
        raise UsageError(f"{out} already has a manifest; pass --overwrite to replace both")
    backend = args.backend or cfg["backend"]
    seed = args.seed if args.seed is not None else int(cfg["seed"])
    limits = GenerationLimits(args.max_len or int(cfg["max_len"]), args.max_new_tokens or int(cfg["max_new_tokens"]))
    started = cfgmod.timestamp()
    docs = _read_docs(args.in_path)
    retries = int(cfg["backend_retries"])
    _load_model(backend, retries)  # fail before any work
    job = RewriteJob(
        mechanism=args.mechanism,
        model_factory=lambda: _load_model(backend, retries),
        limits=limits,
        bounds=bounds,
        spec=spec,
        seed=seed,
        temperature=args.temperature,
        template=args.template,
    )
    ledger = BudgetLedger()
    outputs = job.run(docs, ledger, workers=args.workers or int(cfg["workers"]))
    _write_jsonl(out, (o.to_record() for o in outputs))
    total_tokens = sum(sum(o.tokens_generated) for o in outputs)
    params = {
        "mechanism": args.mechanism,
        "max_len": limits.max_len,
        "max_new_tokens": limits.max_new_tokens,
        "temperature": spec.temperature if spec else args.temperature,
    }
    if spec:
        params.update(epsilon_per_token=spec.epsilon_per_token, sensitivity=spec.sensitivity,
                      logit_min=bounds.logit_min, logit_max=bounds.logit_max)
        if args.mechanism == "dp_prompt":
            params["template"] = args.template
    manifest = cfgmod.RunManifest(
        command="rewrite",
        seed=seed,
        parameters=params,
        providers={"backend": backend},
        inputs={"documents": str(args.in_path)},
        outputs={"rewrites": str(out)},
        started=started,
        finished=cfgmod.timestamp(),
        budget={
            "documents": len(outputs),
            "tokens_generated": total_tokens,
            "total_epsilon": ledger.total_epsilon if spec else None,
            "ledger_entries": len(ledger),
        },
    )
    cfgmod.write_manifest(out, manifest)
    mean_tokens = total_tokens / len(outputs) if outputs else 0.0
    line = f"{len(outputs)} documents, mean {mean_tokens:.1f} tokens generated"
    if spec:
        line += f", total epsilon {ledger.total_epsilon:g}"
    print(line)
    return EXIT_OK


# evaluate -------------------------------------------------------------------

def _aligned(originals, rewritten_records):
    ids_o = [d.id for d in originals]
    ids_r = [str(r.get("id")) for r in rewritten_records]
    if len(ids_o) != len(ids_r) or ids_o != ids_r:
        bad = [f"{a}!={b}" for a, b in zip(ids_o, ids_r) if a != b][:10]
        if len(ids_o) != len(ids_r):
            bad.append(f"{len(ids_o)} originals vs {len(ids_r)} rewritten")
        raise DataError("id mismatch between originals and rewritten: " + ", ".join(bad))
    return [r.get("privatized_text", r.get("text", "")) for r in rewritten_records]


def cmd_evaluate(args, cfg) -> int:
    originals = _read_docs(args.originals)
    if not originals:
        raise DataError("no original documents")
    rewritten_records = _read_jsonl(args.rewritten) if args.rewritten else None
    texts = _aligned(originals, rewritten_records) if rewritten_records is not None else [d.text for d in originals]
    mechanism = args.mechanism or (
        rewritten_records[0].get("mechanism", "rewritten") if rewritten_records else "original"
    )
    seed = args.seed if args.seed is not None else int(cfg["seed"])
    report = EvalReport(dataset=args.dataset, mechanism=mechanism, kinds=[args.kind], seed=seed,
                        n_documents=len(originals))
    if args.kind == "metrics":
        if rewritten_records is None:
            raise UsageError("metrics needs --rewritten")
        embedder = providers.load_embedder(args.embedder)
        scorer = providers.load_scorer(args.scorer, corpus=[d.text for d in originals])
        rows = []
        for d, t in zip(originals, texts):
            rows.append({
                "id": d.id,
                "n_sentences": len(segment_sentences(d.text)),
                "rouge1": rouge_n_f(d.text, t, 1),
                "rougeL": rouge_l_f(d.text, t),
                "cosine_similarity": metrics.cosine_similarity(d.text, t, embedder) if t.strip() else 0.0,
            })
        report.rouge1 = float(np.mean([r["rouge1"] for r in rows]))
        report.rougeL = float(np.mean([r["rougeL"] for r in rows]))
        report.cosine_similarity = float(np.mean([r["cosine_similarity"] for r in rows]))
        ppl = metrics.mean_perplexity(texts, scorer)
        report.perplexity_mean, report.perplexity_skipped = ppl.mean, ppl.skipped
        report.providers = {"embedder": args.embedder, "scorer": args.scorer}
        if args.per_doc_csv:
            Path(args.per_doc_csv).write_text(per_document_csv(rows), encoding="utf-8")
    else:
        truth = {}
        label_field = "utility_label" if args.kind == "utility" else "privacy_label"
        for d, t in zip(originals, texts):
            truth[d.text] = getattr(d, label_field)
            truth[t] = getattr(d, label_field)
        trainer = providers.load_trainer(args.trainer, truth)
        report.providers = {"trainer": args.trainer}
        try:
            if args.kind == "utility":
                docs = [corpus_prep.Document(d.id, t if t.strip() else "<empty>", d.utility_label, d.privacy_label)
                        for d, t in zip(originals, texts)]
                report.utility_f1_mean, report.utility_f1_std = harness.run_utility_eval(docs, trainer, seed)
                report.baseline_utility_f1 = args.baseline_f1
                report.mg_u = args.mg
            else:
                scores = harness.evaluate_privacy(originals, texts, trainer, seed)
                report.privacy_f1_static = scores.static
                report.privacy_f1_adaptive_mean = scores.adaptive_mean
                report.privacy_f1_adaptive_std = scores.adaptive_std
                report.baseline_privacy_f1 = args.baseline_f1
                report.mg_p = args.mg
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    report.derive()
    write_report(args.out, report)
    print(f"wrote {args.kind} report for {mechanism} to {args.out}")
    return EXIT_OK


# report ---------------------------------------------------------------------

def cmd_report(args, cfg) -> int:
    try:
        reports = merge_reports(read_report(p) for p in args.reports)
    except SchemaError as exc:
        raise DataError(str(exc)) from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report: {exc}") from exc
    text = render_utility_table(reports) + "\n" + render_privacy_table(reports)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(reports_to_csv(reports), encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privfill", description="Sentence-infilling text privatization toolkit")
    parser.add_argument("--config", help="JSON config file (default: $TOOLKIT_CONFIG)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", help="prepare a labelled dataset as Document JSONL")
    p.add_argument("--source", required=True, choices=["enron", *corpus_prep.TASK_PRESETS])
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--percentile", type=float, default=80)
    p.add_argument("--min-sentences", type=int, default=2)
    p.add_argument("--folders", nargs="+", default=["sent_items"])
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("infill", help="build [blank]-masked training samples")
    p.add_argument("--style", required=True, choices=["wiki", "crawl"])
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--field", default="text")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_infill)

    p = sub.add_parser("calibrate", help="measure the logit range of a backend")
    p.add_argument("--backend")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--max-len", type=int)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("rewrite", help="privatize documents")
    p.add_argument("--mechanism", required=True, choices=MECHANISMS)
    p.add_argument("--backend")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--sensitivity", type=float)
    p.add_argument("--logit-min", type=float)
    p.add_argument("--logit-max", type=float)
    p.add_argument("--calibration", help="calibration report JSON supplying clip bounds")
    p.add_argument("--max-len", type=int)
    p.add_argument("--max-new-tokens", type=int)
    p.add_argument("--temperature", type=float, default=1.0, help="sampling temperature for non-DP privfill")
    p.add_argument("--template", default=DEFAULT_PARAPHRASE_TEMPLATE)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("evaluate", help="utility, privacy, or text-similarity metrics")
    p.add_argument("--kind", required=True, choices=["utility", "privacy", "metrics"])
    p.add_argument("--originals", required=True)
    p.add_argument("--rewritten")
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", default="")
    p.add_argument("--mechanism")
    p.add_argument("--trainer", default="tfidf", help="constant | tfidf | oracle")
    p.add_argument("--embedder", default="stub:hash", help="stub:hash | st:<model>")
    p.add_argument("--scorer", default="stub:unigram", help="stub:unigram | hf:<model>")
    p.add_argument("--baseline-f1", type=float, help="F1 on original texts for this task")
    p.add_argument("--mg", type=float, help="guessing-baseline F1 for this task")
    p.add_argument("--per-doc-csv")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render evaluation reports as tables")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = cfgmod.load_config(args.config)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except RewriteError as exc:
        print(f"rewrite failed: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (DataError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
