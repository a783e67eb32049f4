"""The ``simquery`` command line: every pipeline stage behind one binary.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 runtime
failure. Logs go to stderr as key=value lines; results go only to stdout
or to the declared --out paths. All randomness is surfaced as --seed.
"""

from __future__ import annotations

import argparse
import difflib
import json
import logging
import sys

from . import __version__
from .baseline import TrainConfig, load_model, predict_batch, save_model, train_logreg
from .classify import classify_batch, default_threads
from .dataset import SamplingPlan, filter_by_language, load_dataset, sample_balanced
from .embedding import embed_dataset, load_embedding_store, save_embedding_store
from .errors import DataError
from .experiment import (
    compare_reports,
    load_config,
    rerun_from_manifest,
    report_to_json,
    report_to_text,
    run_experiment,
)
from .index import BuildParams, build_index, load_index, save_index
from .metrics import build_report
from .sweep import sweep_k, sweep_plot_svg, sweep_rows_to_csv

log = logging.getLogger("simquery")

SUBCOMMANDS = (
    "build-index", "classify", "sweep-k", "train-baseline", "eval-baseline",
    "run", "compare", "embed-test", "inspect",
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; the contract here is exit 1.
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: SIMQUERY_THREADS or CPU count)")
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness in this subcommand")
    p.add_argument("--quiet", action="store_true", help="suppress informational logging")


def _langs(value: str | None) -> list[str] | None:
    if value is None:
        return None
    return [part.strip() for part in value.split(",") if part.strip()]


def build_parser() -> _Parser:
    parser = _Parser(prog="simquery", description=__doc__)
    parser.add_argument("--version", action="version", version=f"simquery {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("embed-test", parents=[], help="embed a dataset with the deterministic hash embedder")
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", default="jsonl", choices=["jsonl", "tsv"])
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("build-index", help="build and persist a query index")
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", default="jsonl", choices=["jsonl", "tsv"])
    p.add_argument("--embeddings", required=True, help="QEMB store for the dataset")
    p.add_argument("--mode", default="exact", choices=["exact", "hnsw"])
    p.add_argument("--out", required=True)
    p.add_argument("--include-langs", default=None, help="comma-separated language tags to keep")
    p.add_argument("--exclude-langs", default=None, help="comma-separated language tags to drop")
    p.add_argument("--shots", type=int, default=None, help="balanced shots per class (omit to index everything)")
    p.add_argument("--sample-langs", default=None, help="stratify sampling per class and language")
    p.add_argument("--clamp-shots", action="store_true")
    p.add_argument("--allow-unbalanced", action="store_true")
    p.add_argument("--m-max", type=int, default=16)
    p.add_argument("--ef-construction", type=int, default=100)
    _add_common(p)

    p = sub.add_parser("classify", help="classify every query in a QEMB store")
    p.add_argument("--index", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--k", type=int, default=31)
    p.add_argument("--ef-search", type=int, default=None)
    p.add_argument("--weighted-votes", action="store_true")
    p.add_argument("--min-similarity", type=float, default=None)
    p.add_argument("--out", required=True, help="predictions file (JSON lines)")
    _add_common(p)

    p = sub.add_parser("sweep-k", help="grid-search k and write a CSV (and optional SVG)")
    p.add_argument("--index", required=True)
    p.add_argument("--test", required=True, help="test dataset with gold labels")
    p.add_argument("--format", default="jsonl", choices=["jsonl", "tsv"])
    p.add_argument("--embeddings", required=True, help="QEMB store for the test set")
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=75)
    p.add_argument("--step", type=int, default=2)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", default=None, help="write a line-chart SVG here")
    _add_common(p)

    p = sub.add_parser("train-baseline", help="train the logistic-regression head")
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", default="jsonl", choices=["jsonl", "tsv"])
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--shots", type=int, default=None, help="balanced shots per class before training")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    _add_common(p)

    p = sub.add_parser("eval-baseline", help="evaluate a trained head on a test set")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--format", default="jsonl", choices=["jsonl", "tsv"])
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", default=None, help="write the JSON report here")
    _add_common(p)

    p = sub.add_parser("run", help="run an experiment config end to end")
    p.add_argument("--config", default=None)
    p.add_argument("--from-manifest", default=None, help="re-run a persisted manifest")
    p.add_argument("--provider", default=None, help="run only this provider arm")
    p.add_argument("--out-dir", required=True)
    _add_common(p)

    p = sub.add_parser("compare", help="align several report JSONs into one table")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out-csv", default=None)
    _add_common(p)

    p = sub.add_parser("inspect", help="dump the header of a .qemb/.qidx/.qlrm file")
    p.add_argument("path")
    _add_common(p)

    return parser


def _cmd_embed_test(args) -> int:
    d = load_dataset(args.dataset, args.format)
    store = embed_dataset(d, args.dim, args.seed)
    save_embedding_store(store, args.out)
    log.info("event=embed_test records=%d dim=%d out=%s", len(store), args.dim, args.out)
    return 0


def _cmd_build_index(args) -> int:
    d = load_dataset(args.dataset, args.format)
    if args.include_langs:
        d = filter_by_language(d, "include", _langs(args.include_langs))
    if args.exclude_langs:
        d = filter_by_language(d, "exclude", _langs(args.exclude_langs))
    if args.shots is not None:
        plan = SamplingPlan(
            shots_per_class=args.shots,
            languages=tuple(_langs(args.sample_langs)) if args.sample_langs else None,
            seed=args.seed,
            clamp_to_available=args.clamp_shots,
        )
        d = sample_balanced(d, plan)
    store = load_embedding_store(args.embeddings)
    params = BuildParams(m_max=args.m_max, ef_construction=args.ef_construction, seed=args.seed)
    ix = build_index(d, store, mode=args.mode, params=params, allow_unbalanced=args.allow_unbalanced)
    save_index(ix, args.out)
    log.info("event=build_index mode=%s entries=%d dim=%d out=%s", ix.mode, len(ix), ix.dim, args.out)
    return 0


def _cmd_classify(args) -> int:
    ix = load_index(args.index)
    store = load_embedding_store(args.embeddings)
    items = [(rec_id, store.entries[rec_id]) for rec_id in sorted(store.entries, key=lambda s: s.encode("utf-8"))]
    results = classify_batch(
        ix, items, args.k, threads=args.threads, ef_search=args.ef_search,
        weighted=args.weighted_votes, min_similarity=args.min_similarity,
    )
    errors = 0
    with open(args.out, "w", encoding="utf-8") as f:
        for res in results:
            if res.error is not None:
                errors += 1
                f.write(json.dumps({"id": res.id, "error": res.error}, sort_keys=True) + "\n")
                continue
            pred = res.prediction
            f.write(json.dumps({
                "id": res.id,
                "predicted_label": pred.predicted_label,
                "votes": dict(sorted(pred.vote_counts.items())),
                "tie_broken": pred.tie_broken,
                "top": [
                    {"id": it.id, "label": it.label, "similarity": it.similarity}
                    for it in pred.support.items
                ],
            }, sort_keys=True) + "\n")
    log.info("event=classify queries=%d errors=%d out=%s", len(results), errors, args.out)
    return 0


def _cmd_sweep_k(args) -> int:
    ix = load_index(args.index)
    test = load_dataset(args.test, args.format)
    store = load_embedding_store(args.embeddings)
    rows = sweep_k(ix, test, store, args.k_min, args.k_max, args.step, threads=args.threads)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(sweep_rows_to_csv(rows))
    if args.plot:
        with open(args.plot, "w", encoding="utf-8") as f:
            f.write(sweep_plot_svg(rows))
    best = max(rows, key=lambda r: (r.accuracy, -r.k))
    log.info("event=sweep_k rows=%d best_k=%d best_accuracy=%.4f", len(rows), best.k, best.accuracy)
    return 0


def _cmd_train_baseline(args) -> int:
    d = load_dataset(args.dataset, args.format)
    if args.shots is not None:
        d = sample_balanced(d, SamplingPlan(shots_per_class=args.shots, seed=args.seed))
    store = load_embedding_store(args.embeddings)
    config = TrainConfig(
        learning_rate=args.lr, l2_lambda=args.l2, epochs=args.epochs,
        batch_size=args.batch_size, seed=args.seed,
    )
    model = train_logreg(d, store, config)
    save_model(model, args.out)
    log.info("event=train_baseline classes=%d dim=%d out=%s", len(model.class_order), model.dim, args.out)
    return 0


def _cmd_eval_baseline(args) -> int:
    model = load_model(args.model)
    test = load_dataset(args.test, args.format)
    store = load_embedding_store(args.embeddings)
    preds = predict_batch(model, [(r.id, store.vector(r.id)) for r in test.records])
    report = build_report(
        preds, test, name="eval-baseline", provider=store.provider_name,
        method="classification", dataset_label=args.test,
        known_labels=frozenset(model.class_order),
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(report_to_json(report))
    sys.stdout.write(report_to_text(report))
    return 0


def _cmd_run(args) -> int:
    if (args.config is None) == (args.from_manifest is None):
        raise DataError("provide exactly one of --config or --from-manifest")
    if args.from_manifest:
        report = rerun_from_manifest(args.from_manifest, out_dir=args.out_dir, threads=args.threads)
        sys.stdout.write(report_to_text(report))
        return 0
    cfg = load_config(args.config)
    providers = [args.provider] if args.provider else cfg.providers
    for provider in providers:
        report = run_experiment(cfg, out_dir=args.out_dir, provider=provider, threads=args.threads)
        sys.stdout.write(report_to_text(report))
    return 0


def _cmd_compare(args) -> int:
    reports = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as f:
            reports.append(json.load(f))
    table = compare_reports(reports)
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8") as f:
            f.write(table.to_csv())
    sys.stdout.write(table.to_text())
    return 0


def _cmd_inspect(args) -> int:
    with open(args.path, "rb") as f:
        magic = f.read(4)
    if magic == b"QEMB":
        store = load_embedding_store(args.path)
        ids = list(store.entries)
        is_sorted = ids == sorted(ids, key=lambda s: s.encode("utf-8"))
        print(
            f"format=qemb version=1 dim={store.dim} count={len(store)} "
            f"provider={store.provider_name} sorted_by_id={'true' if is_sorted else 'false'}"
        )
    elif magic == b"QIDX":
        ix = load_index(args.path)
        extra = ""
        if ix.mode == "hnsw":
            extra = f" max_level={ix.max_level} entry_point={ix.entry_point}"
        print(f"format=qidx version=1 mode={ix.mode} dim={ix.dim} count={len(ix)}{extra}")
    elif magic == b"QLRM":
        model = load_model(args.path)
        print(f"format=qlrm version=1 dim={model.dim} classes={len(model.class_order)}")
    else:
        raise DataError(f"{args.path}: unrecognized magic {magic!r}")
    return 0


_HANDLERS = {
    "embed-test": _cmd_embed_test,
    "build-index": _cmd_build_index,
    "classify": _cmd_classify,
    "sweep-k": _cmd_sweep_k,
    "train-baseline": _cmd_train_baseline,
    "eval-baseline": _cmd_eval_baseline,
    "run": _cmd_run,
    "compare": _cmd_compare,
    "inspect": _cmd_inspect,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and not argv[0].startswith("-") and argv[0] not in SUBCOMMANDS:
        hint = difflib.get_close_matches(argv[0], SUBCOMMANDS, n=1)
        suggestion = f" (did you mean '{hint[0]}'?)" if hint else ""
        print(f"error: unknown subcommand '{argv[0]}'{suggestion}", file=sys.stderr)
        print(f"usage: simquery {{{','.join(SUBCOMMANDS)}}} ...", file=sys.stderr)
        return 1
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse --help/--version or usage errors
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    level = logging.ERROR if getattr(args, "quiet", False) else logging.INFO
    logging.basicConfig(stream=sys.stderr, format="%(message)s", level=level)
    logging.getLogger().setLevel(level)  # basicConfig is a no-op on repeat calls
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = default_threads()
    try:
        return _HANDLERS[args.command](args)
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure contract
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
