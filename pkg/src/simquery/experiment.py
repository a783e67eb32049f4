"""Declarative experiment configs, the pipeline runner, and run manifests.

A config is a flat ``key = value`` text file (one key per line, ``#``
comments, lists comma-separated) so that scenario files diff cleanly.
Running a config executes sample -> filter -> build -> classify (or
train + predict) -> metrics, then persists the report (JSON plus an
aligned text table) and a manifest. The manifest records the resolved
config, SHA-256 checksums of every input file, and the derived index
composition; re-running from a manifest reproduces the report byte for
byte, and tests hold that as an invariant.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from dataclasses import dataclass, field

from . import __version__
from .baseline import TrainConfig, predict_batch, train_logreg
from .classify import classify_batch
from .dataset import Dataset, SamplingPlan, filter_by_language, load_dataset, sample_balanced
from .embedding import load_embedding_store
from .errors import DataError
from .index import BuildParams, build_index
from .metrics import MetricsReport, build_report

log = logging.getLogger("simquery")

METHODS = ("sim_search", "classification", "translation")
INDEX_FILTERS = ("none", "all_without_target", "explicit_list")

# key -> (type tag, default); None default means "unset".
_SCHEMA: dict[str, tuple[str, object]] = {
    "name": ("str", None),
    "method": ("str", None),
    "providers": ("list", None),
    "train_dataset": ("path", None),
    "test_dataset": ("path", None),
    "train_format": ("str", "jsonl"),
    "test_format": ("str", "jsonl"),
    "translated_test_dataset": ("path", None),
    "translated_test_format": ("str", "jsonl"),
    "sample": ("bool", True),
    "shots": ("int", None),
    "classes": ("list", None),
    "sample_languages": ("list", None),
    "stratify_by_language": ("bool", True),
    "clamp_shots": ("bool", False),
    "allow_unbalanced": ("bool", False),
    "index_language_filter": ("str", "none"),
    "target_language": ("str", None),
    "index_languages": ("list", None),
    "test_language": ("str", None),
    "k": ("int", 31),
    "index_mode": ("str", "exact"),
    "ef_search": ("int", None),
    "m_max": ("int", 16),
    "ef_construction": ("int", 100),
    "seed": ("int", 0),
    "dataset_label": ("str", None),
    "learning_rate": ("float", 0.1),
    "l2_lambda": ("float", 1e-4),
    "epochs": ("int", 200),
    "batch_size": ("int", 32),
    "weighted_votes": ("bool", False),
    "min_similarity": ("float", None),
}

_EMB_KEY = re.compile(r"^embeddings\.([^.]+)\.(train|test|translated)$")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed and validated experiment description."""

    values: dict[str, object]
    embeddings: dict[str, dict[str, str]]  # provider -> role -> path
    raw: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def name(self) -> str:
        return self.values["name"]

    @property
    def method(self) -> str:
        return self.values["method"]

    @property
    def providers(self) -> list[str]:
        return list(self.values["providers"])

    def method_label(self) -> str:
        filt = self.values["index_language_filter"]
        if self.method == "sim_search" and filt != "none":
            return f"sim_search/{filt}"
        return self.method


def _coerce(key: str, kind: str, raw: str, base_dir: str):
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "path":
        return os.path.normpath(os.path.join(base_dir, raw))
    if kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise DataError(f"config key '{key}': expected an integer, got '{raw}'") from None
    if kind == "float":
        try:
            return float(raw)
        except ValueError:
            raise DataError(f"config key '{key}': expected a number, got '{raw}'") from None
    if kind == "bool":
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise DataError(f"config key '{key}': expected true/false, got '{raw}'")
    if kind == "list":
        items = [part.strip() for part in raw.split(",") if part.strip()]
        if not items:
            raise DataError(f"config key '{key}': list is empty")
        return items
    raise AssertionError(kind)


def parse_config_text(text: str, base_dir: str = ".") -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise DataError(f"config line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key in raw:
            raise DataError(f"config line {lineno}: duplicate key '{key}'")
        raw[key] = value

    values: dict[str, object] = {k: default for k, (_, default) in _SCHEMA.items()}
    embeddings: dict[str, dict[str, str]] = {}
    resolved_raw: dict[str, str] = {}
    for key, value in raw.items():
        m = _EMB_KEY.match(key)
        if m:
            provider, role = m.group(1), m.group(2)
            path = _coerce(key, "path", value, base_dir)
            embeddings.setdefault(provider, {})[role] = path
            resolved_raw[key] = path
            continue
        if key not in _SCHEMA:
            raise DataError(f"unknown config key '{key}'")
        kind, _ = _SCHEMA[key]
        coerced = _coerce(key, kind, value, base_dir)
        values[key] = coerced
        resolved_raw[key] = (
            ",".join(coerced) if isinstance(coerced, list) else
            coerced if isinstance(coerced, str) else value
        )

    cfg = ExperimentConfig(values=values, embeddings=embeddings, raw=resolved_raw)
    _validate(cfg)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_config_text(text, base_dir=os.path.dirname(os.path.abspath(path)))


def _validate(cfg: ExperimentConfig) -> None:
    v = cfg.values
    for key in ("name", "method", "providers", "train_dataset", "test_dataset"):
        if v[key] is None:
            raise DataError(f"config is missing required key '{key}'")
    if v["method"] not in METHODS:
        raise DataError(f"unknown method '{v['method']}' (expected one of {METHODS})")
    if v["index_language_filter"] not in INDEX_FILTERS:
        raise DataError(f"unknown index_language_filter '{v['index_language_filter']}'")
    if v["index_language_filter"] == "all_without_target" and v["target_language"] is None:
        raise DataError("index_language_filter=all_without_target requires target_language")
    if v["index_language_filter"] == "explicit_list" and v["index_languages"] is None:
        raise DataError("index_language_filter=explicit_list requires index_languages")
    if v["sample"] and v["shots"] is None:
        raise DataError("sampling is enabled but 'shots' is not set")
    if v["index_mode"] not in ("exact", "hnsw"):
        raise DataError(f"unknown index_mode '{v['index_mode']}'")
    for provider in cfg.providers:
        roles = cfg.embeddings.get(provider, {})
        for role in ("train", "test"):
            if role not in roles:
                raise DataError(
                    f"provider '{provider}' is missing 'embeddings.{provider}.{role}'"
                )
        if v["method"] == "translation" and "translated" not in roles:
            raise DataError(
                f"method=translation requires 'embeddings.{provider}.translated'"
            )
    if v["method"] == "translation" and v["translated_test_dataset"] is None:
        raise DataError("method=translation requires translated_test_dataset")


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Stage:
    """Annotates any DataError raised inside with the stage name."""

    def __init__(self, name: str) -> None:
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, DataError):
            raise DataError(f"[stage {self.name}] {exc}") from exc
        return False


@dataclass(frozen=True)
class ExperimentOutcome:
    report: MetricsReport
    manifest: dict


def _dataset_label(cfg: ExperimentConfig) -> str:
    if cfg.values["dataset_label"]:
        return cfg.values["dataset_label"]
    stem = os.path.splitext(os.path.basename(cfg.values["test_dataset"]))[0]
    if cfg.values["test_language"]:
        return f"{stem}/{cfg.values['test_language']}"
    return stem


def execute_experiment(
    cfg: ExperimentConfig, provider: str | None = None, threads: int | None = None
) -> ExperimentOutcome:
    """Run one provider arm of a config and return report plus manifest."""
    if provider is None:
        if len(cfg.providers) != 1:
            raise DataError("config lists multiple providers; choose one to execute")
        provider = cfg.providers[0]
    if provider not in cfg.providers:
        raise DataError(f"provider '{provider}' is not declared in the config")
    v = cfg.values
    roles = cfg.embeddings[provider]

    input_paths = [v["train_dataset"], v["test_dataset"], roles["train"], roles["test"]]
    if v["method"] == "translation":
        input_paths += [v["translated_test_dataset"], roles["translated"]]

    with _Stage("load"):
        train = load_dataset(v["train_dataset"], v["train_format"])
        test = load_dataset(v["test_dataset"], v["test_format"])
        train_store = load_embedding_store(roles["train"])
        test_store = load_embedding_store(roles["test"])

    with _Stage("filter"):
        filt = v["index_language_filter"]
        if filt == "all_without_target":
            train = filter_by_language(train, "exclude", [v["target_language"]])
        elif filt == "explicit_list":
            train = filter_by_language(train, "include", v["index_languages"])
        if v["test_language"]:
            test = filter_by_language(test, "include", [v["test_language"]])

    with _Stage("sample"):
        if v["sample"]:
            plan = SamplingPlan(
                shots_per_class=v["shots"],
                classes=tuple(v["classes"]) if v["classes"] else None,
                languages=tuple(v["sample_languages"]) if v["sample_languages"] else None,
                seed=v["seed"],
                stratify_by_language=v["stratify_by_language"],
                clamp_to_available=v["clamp_shots"],
            )
            indexed = sample_balanced(train, plan)
        else:
            indexed = train

    ties: dict[str, bool] | None = None
    if v["method"] == "sim_search":
        with _Stage("build"):
            params = BuildParams(
                m_max=v["m_max"], ef_construction=v["ef_construction"], seed=v["seed"]
            )
            ix = build_index(
                indexed, train_store, mode=v["index_mode"], params=params,
                allow_unbalanced=v["allow_unbalanced"],
            )
        with _Stage("classify"):
            queries = [(r.id, test_store.vector(r.id)) for r in test.records]
            results = classify_batch(
                ix, queries, v["k"], threads=threads, ef_search=v["ef_search"],
                weighted=v["weighted_votes"], min_similarity=v["min_similarity"],
            )
            failed = [r for r in results if r.error is not None]
            if failed:
                raise DataError(
                    f"{len(failed)} queries failed, first: id={failed[0].id}: {failed[0].error}"
                )
            preds = [(r.id, r.prediction.predicted_label) for r in results]
            ties = {r.id: r.prediction.tie_broken for r in results}
        known = ix.label_universe()
        index_languages = sorted(set(ix.languages))
        index_class_counts = {c: ix.labels.count(c) for c in sorted(set(ix.labels))}
    else:
        with _Stage("train"):
            tconf = TrainConfig(
                learning_rate=v["learning_rate"], l2_lambda=v["l2_lambda"],
                epochs=v["epochs"], batch_size=v["batch_size"], seed=v["seed"],
            )
            model = train_logreg(indexed, train_store, tconf)
        with _Stage("predict"):
            if v["method"] == "translation":
                translated = load_dataset(
                    v["translated_test_dataset"], v["translated_test_format"]
                )
                if v["test_language"]:
                    translated = filter_by_language(translated, "include", [v["test_language"]])
                trans_store = load_embedding_store(roles["translated"])
                orig_ids = {r.id for r in test.records}
                trans_ids = {r.id for r in translated.records}
                if orig_ids != trans_ids:
                    raise DataError(
                        "translated test ids do not match test ids "
                        f"(missing {sorted(orig_ids - trans_ids)[:5]}, extra {sorted(trans_ids - orig_ids)[:5]})"
                    )
                preds = predict_batch(
                    model, [(r.id, trans_store.vector(r.id)) for r in translated.records]
                )
            else:
                preds = predict_batch(
                    model, [(r.id, test_store.vector(r.id)) for r in test.records]
                )
        known = frozenset(model.class_order)
        index_languages = sorted(indexed.language_set)
        index_class_counts = indexed.class_counts()

    with _Stage("metrics"):
        report = build_report(
            preds, test,
            name=cfg.name, provider=provider, method=cfg.method_label(),
            dataset_label=_dataset_label(cfg), ties=ties, known_labels=known,
            config=dict(cfg.raw),
        )

    manifest = {
        "name": cfg.name,
        "provider": provider,
        "method": cfg.method_label(),
        "config": dict(cfg.raw),
        "inputs": {path: sha256_file(path) for path in sorted(set(input_paths))},
        "index_language_set": index_languages,
        "index_class_counts": dict(sorted(index_class_counts.items())),
        "index_size": len(indexed.records),
        "test_size": len(test.records),
        "tool": {"name": "simquery", "version": __version__},
    }
    return ExperimentOutcome(report=report, manifest=manifest)


def report_to_json(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def report_to_text(report: MetricsReport) -> str:
    lines = [
        f"experiment : {report.name}",
        f"provider   : {report.provider}",
        f"method     : {report.method}",
        f"dataset    : {report.dataset_label}",
        f"total      : {report.total}",
        f"accuracy   : {report.accuracy:.3f}",
        f"macro_f1   : {report.macro_f1:.3f}",
        f"tie_rate   : {report.tie_rate:.3f}",
        f"unseen gold: {report.unseen_label_count}",
        "",
    ]
    width = max([len("class")] + [len(c.label) for c in report.per_class])
    lines.append(f"{'class'.ljust(width)}  precision  recall  f1     support")
    for c in report.per_class:
        lines.append(
            f"{c.label.ljust(width)}  {c.precision:9.3f}  {c.recall:6.3f}  {c.f1:5.3f}  {c.support:7d}"
        )
    if report.per_language:
        lines.append("")
        lw = max([len("language")] + [len(l.language) for l in report.per_language])
        lines.append(f"{'language'.ljust(lw)}  accuracy  macro_f1  count")
        for l in report.per_language:
            lines.append(
                f"{l.language.ljust(lw)}  {l.accuracy:8.3f}  {l.macro_f1:8.3f}  {l.count:5d}"
            )
    return "\n".join(lines) + "\n"


def _slug(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", s)


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | None = None,
    provider: str | None = None,
    threads: int | None = None,
) -> MetricsReport:
    """Execute one provider arm; persist report + manifest when out_dir is set."""
    outcome = execute_experiment(cfg, provider=provider, threads=threads)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        base = f"{_slug(cfg.name)}.{_slug(outcome.report.provider)}"
        with open(os.path.join(out_dir, base + ".report.json"), "w", encoding="utf-8") as f:
            f.write(report_to_json(outcome.report))
        with open(os.path.join(out_dir, base + ".report.txt"), "w", encoding="utf-8") as f:
            f.write(report_to_text(outcome.report))
        with open(os.path.join(out_dir, base + ".manifest.json"), "w", encoding="utf-8") as f:
            f.write(json.dumps(outcome.manifest, sort_keys=True, indent=2) + "\n")
        log.info("event=run_persisted out_dir=%s base=%s", out_dir, base)
    return outcome.report


def rerun_from_manifest(
    manifest_path: str, out_dir: str | None = None, threads: int | None = None
) -> MetricsReport:
    """Re-execute a persisted run; input files must still match their checksums."""
    with open(manifest_path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    for path, digest in manifest.get("inputs", {}).items():
        if not os.path.exists(path):
            raise DataError(f"manifest input '{path}' no longer exists")
        actual = sha256_file(path)
        if actual != digest:
            raise DataError(
                f"manifest input '{path}' changed (checksum {actual[:12]}.. != {digest[:12]}..)"
            )
    text = "\n".join(f"{k} = {v}" for k, v in manifest["config"].items())
    cfg = parse_config_text(text, base_dir=".")
    return run_experiment(cfg, out_dir=out_dir, provider=manifest["provider"], threads=threads)


# ---------------------------------------------------------------------------
# Cross-run comparison tables.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonTable:
    columns: tuple[str, ...]                      # dataset labels
    rows: tuple[tuple[str, str], ...]             # (provider, method)
    cells: dict[tuple[str, str, str], tuple[float, float]]

    def to_csv(self) -> str:
        header = ["model", "method"]
        for col in self.columns:
            header += [f"{col}_accuracy", f"{col}_f1"]
        lines = [",".join(header)]
        for provider, method in self.rows:
            out = [provider, method]
            for col in self.columns:
                cell = self.cells.get((provider, method, col))
                out += ["", ""] if cell is None else [f"{cell[0]:.3f}", f"{cell[1]:.3f}"]
            lines.append(",".join(out))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        header = ["model", "method"] + list(self.columns)
        body = []
        for provider, method in self.rows:
            cells = []
            for col in self.columns:
                cell = self.cells.get((provider, method, col))
                cells.append("" if cell is None else f"{cell[0]:.3f}, {cell[1]:.3f}")
            body.append([provider, method] + cells)
        widths = [
            max(len(header[i]), *(len(row[i]) for row in body)) if body else len(header[i])
            for i in range(len(header))
        ]
        fmt = "  ".join("{:<" + str(w) + "}" for w in widths)
        lines = [fmt.format(*header)]
        lines += [fmt.format(*row) for row in body]
        return "\n".join(line.rstrip() for line in lines) + "\n"


def compare_reports(reports: list[dict]) -> ComparisonTable:
    """Align reports into (model, method) rows by dataset-label columns."""
    if len(reports) < 2:
        raise DataError("comparison requires at least 2 reports")
    columns: list[str] = []
    rows: list[tuple[str, str]] = []
    cells: dict[tuple[str, str, str], tuple[float, float]] = {}
    for rep in reports:
        provider = rep["provider"]
        method = rep["method"]
        col = rep["dataset_label"]
        if col not in columns:
            columns.append(col)
        key = (provider, method)
        if key not in rows:
            rows.append(key)
        cells[(provider, method, col)] = (rep["accuracy"], rep["macro_f1"])
    return ComparisonTable(columns=tuple(columns), rows=tuple(rows), cells=cells)
