"""Labeled query datasets: loading, language filtering, and balanced sampling.

A dataset is an ordered, immutable collection of labeled utterances. Two
sampling schemes are provided:

* ``sample_balanced`` draws exactly N records per class (or per class and
  language when a language list is given), which is what keeps the query
  index balanced across intents.
* ``paired_semantic_sample`` draws the same utterances (matched through a
  shared semantic key, e.g. parallel-corpus ids) under two different
  language compositions, so that two indexes can be compared while holding
  query count and semantic content fixed.

All randomness routes through :mod:`simquery.rng` so samples are
reproducible from the plan's seed alone.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .errors import DataError
from .rng import PortableRng, derive_seed

log = logging.getLogger("simquery")

TSV_COLUMNS = ("id", "text", "label", "language", "semantic_key")


@dataclass(frozen=True)
class QueryRecord:
    """One labeled utterance."""

    id: str
    text: str
    label: str
    language: str
    semantic_key: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise DataError("record id must be non-empty")
        if not self.text.strip():
            raise DataError(f"record '{self.id}': text is empty")
        if not self.label:
            raise DataError(f"record '{self.id}': label is empty")


@dataclass(frozen=True)
class Dataset:
    """Ordered records plus the derived label and language universes."""

    records: tuple[QueryRecord, ...]
    label_set: frozenset[str] = field(init=False)
    language_set: frozenset[str] = field(init=False)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise DataError(f"duplicate record id '{rec.id}'")
            seen.add(rec.id)
        object.__setattr__(self, "label_set", frozenset(r.label for r in self.records))
        object.__setattr__(self, "language_set", frozenset(r.language for r in self.records))

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self) -> dict[str, QueryRecord]:
        return {r.id: r for r in self.records}

    def class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.records:
            counts[r.label] = counts.get(r.label, 0) + 1
        return counts


@dataclass(frozen=True)
class SamplingPlan:
    """How to draw a balanced subset.

    ``languages`` switches on per-(class, language) stratification by
    default, giving C x N x L records; set ``stratify_by_language=False``
    to draw N per class from the pooled languages instead. When
    ``clamp_to_available`` is set, a class (or class-language stratum) with
    fewer than N records contributes everything it has instead of raising.
    """

    shots_per_class: int
    classes: tuple[str, ...] | None = None
    languages: tuple[str, ...] | None = None
    seed: int = 0
    stratify_by_language: bool = True
    clamp_to_available: bool = False

    def __post_init__(self) -> None:
        if self.shots_per_class < 1:
            raise DataError("shots_per_class must be >= 1")
        if self.classes is not None:
            if not self.classes:
                raise DataError("explicit class list must be non-empty")
            if len(set(self.classes)) != len(self.classes):
                raise DataError("class list contains duplicates")
        if self.languages is not None:
            if not self.languages:
                raise DataError("language list must be non-empty")
            if len(set(self.languages)) != len(self.languages):
                raise DataError("language list contains duplicates")


def _parse_jsonl(path: str) -> list[tuple[int, QueryRecord]]:
    records: list[tuple[int, QueryRecord]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: malformed JSON line: {e}") from e
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            records.append((lineno, _record_from_fields(obj, path, lineno)))
    return records


def _parse_tsv(path: str) -> list[tuple[int, QueryRecord]]:
    # The format forbids quoting, so a plain tab split is the whole parser.
    records: list[tuple[int, QueryRecord]] = []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline()
        if not header:
            raise DataError(f"{path}: empty file (missing TSV header)")
        cols = tuple(header.rstrip("\r\n").split("\t"))
        if cols != TSV_COLUMNS:
            raise DataError(
                f"{path}:1: TSV header must be {list(TSV_COLUMNS)}, got {list(cols)}"
            )
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\r\n").split("\t")
            if len(fields) != len(TSV_COLUMNS):
                raise DataError(
                    f"{path}:{lineno}: expected {len(TSV_COLUMNS)} tab-separated fields, got {len(fields)}"
                )
            obj = dict(zip(TSV_COLUMNS, fields))
            if obj["semantic_key"] == "":
                obj["semantic_key"] = None
            records.append((lineno, _record_from_fields(obj, path, lineno)))
    return records


def _record_from_fields(obj: dict, path: str, lineno: int) -> QueryRecord:
    for key in ("id", "text", "label", "language"):
        if key not in obj:
            raise DataError(f"{path}:{lineno}: missing required field '{key}'")
        if not isinstance(obj[key], str):
            raise DataError(f"{path}:{lineno}: field '{key}' must be a string")
    semantic_key = obj.get("semantic_key")
    if semantic_key is not None and not isinstance(semantic_key, str):
        raise DataError(f"{path}:{lineno}: field 'semantic_key' must be a string")
    try:
        return QueryRecord(
            id=obj["id"],
            text=obj["text"],
            label=obj["label"],
            language=obj["language"],
            semantic_key=semantic_key,
        )
    except DataError as e:
        raise DataError(f"{path}:{lineno}: {e}") from e


def load_dataset(path: str, format: str = "jsonl") -> Dataset:
    """Load a dataset file in ``jsonl`` or ``tsv`` format.

    Record order is preserved. Duplicate ids are rejected with both line
    numbers; an empty file is an error.
    """
    if format == "jsonl":
        numbered = _parse_jsonl(path)
    elif format == "tsv":
        numbered = _parse_tsv(path)
    else:
        raise DataError(f"unknown dataset format '{format}' (expected 'jsonl' or 'tsv')")
    if not numbered:
        raise DataError(f"{path}: dataset contains no records")
    first_line: dict[str, int] = {}
    for lineno, rec in numbered:
        if rec.id in first_line:
            raise DataError(
                f"{path}: duplicate record id '{rec.id}' on lines {first_line[rec.id]} and {lineno}"
            )
        first_line[rec.id] = lineno
    return Dataset(tuple(rec for _, rec in numbered))


def filter_by_language(d: Dataset, mode: str, tags: list[str] | tuple[str, ...]) -> Dataset:
    """Keep (``include``) or drop (``exclude``) records by language tag."""
    if not tags:
        raise DataError("language filter requires at least one tag")
    if mode not in ("include", "exclude"):
        raise DataError(f"unknown filter mode '{mode}'")
    tagset = set(tags)
    unmatched = sorted(tagset - d.language_set)
    if unmatched:
        log.warning("event=language_filter_unmatched mode=%s tags=%s", mode, ",".join(unmatched))
    if mode == "include":
        kept = tuple(r for r in d.records if r.language in tagset)
    else:
        kept = tuple(r for r in d.records if r.language not in tagset)
    if not kept:
        raise DataError(
            f"language filter mode={mode} tags={sorted(tagset)} removed every record"
        )
    return Dataset(kept)


def _stratum_take(
    pool: list[tuple[int, QueryRecord]],
    n: int,
    plan: SamplingPlan,
    stratum_desc: str,
    seed_parts: tuple[str, ...],
) -> list[int]:
    if len(pool) < n:
        if plan.clamp_to_available and pool:
            log.warning(
                "event=shots_clamped stratum=%s available=%d requested=%d",
                stratum_desc, len(pool), n,
            )
            n = len(pool)
        else:
            raise DataError(
                f"{stratum_desc} has only {len(pool)} records, need {n}"
            )
    rng = PortableRng(derive_seed(plan.seed, "sample", *seed_parts))
    picks = rng.sample_positions(len(pool), n)
    return [pool[i][0] for i in picks]


def sample_balanced(d: Dataset, plan: SamplingPlan) -> Dataset:
    """Draw N records per class, without replacement, deterministically.

    With ``plan.languages`` set (and stratification on), the draw is N per
    (class, language) pair. Selected records keep their original dataset
    order, so the same seed yields a byte-identical sample.
    """
    classes = list(plan.classes) if plan.classes is not None else sorted(d.label_set)
    n = plan.shots_per_class
    chosen: list[int] = []
    if plan.languages is not None and plan.stratify_by_language:
        for label in sorted(classes):
            for lang in sorted(plan.languages):
                pool = [
                    (i, r) for i, r in enumerate(d.records)
                    if r.label == label and r.language == lang
                ]
                chosen.extend(
                    _stratum_take(pool, n, plan, f"class '{label}' language '{lang}'",
                                  (label, lang))
                )
    else:
        langs = set(plan.languages) if plan.languages is not None else None
        for label in sorted(classes):
            pool = [
                (i, r) for i, r in enumerate(d.records)
                if r.label == label and (langs is None or r.language in langs)
            ]
            chosen.extend(_stratum_take(pool, n, plan, f"class '{label}'", (label,)))
    chosen.sort()
    return Dataset(tuple(d.records[i] for i in chosen))


def semantic_key_of(record: QueryRecord, delimiter: str = "-") -> str:
    """The record's semantic key, defaulting to the id prefix before ``delimiter``."""
    if record.semantic_key is not None:
        return record.semantic_key
    return record.id.split(delimiter, 1)[0]


def paired_semantic_sample(
    d: Dataset,
    plan: SamplingPlan,
    language_sets: tuple[tuple[str, ...], tuple[str, ...]],
    key_delimiter: str = "-",
) -> tuple[Dataset, Dataset]:
    """Two same-size samples that differ only in language composition.

    N semantic keys are drawn per class; every sampled key then contributes
    ``r = min(|set_a|, |set_b|)`` translations to each output. When a side's
    language set is larger than ``r``, the subset is chosen per key from a
    stream seeded by (seed, class, key) only, so identical language sets
    produce identical outputs. Both outputs therefore share the same
    (class, semantic-key) multiset and have equal sizes.
    """
    set_a, set_b = language_sets
    for name, tags in (("first", set_a), ("second", set_b)):
        if not tags:
            raise DataError(f"{name} language set is empty")
        if len(set(tags)) != len(tags):
            raise DataError(f"{name} language set contains duplicates")
    classes = list(plan.classes) if plan.classes is not None else sorted(d.label_set)
    n = plan.shots_per_class
    r = min(len(set_a), len(set_b))

    # (class, key, language) -> record; duplicates resolved to the smallest id.
    table: dict[tuple[str, str, str], QueryRecord] = {}
    keys_per_class: dict[str, set[str]] = {}
    for rec in d.records:
        key = semantic_key_of(rec, key_delimiter)
        slot = (rec.label, key, rec.language)
        prev = table.get(slot)
        if prev is None or rec.id < prev.id:
            table[slot] = rec
        keys_per_class.setdefault(rec.label, set()).add(key)

    out_a: list[QueryRecord] = []
    out_b: list[QueryRecord] = []
    for label in sorted(classes):
        keys = sorted(keys_per_class.get(label, ()))
        if len(keys) < n:
            raise DataError(
                f"class '{label}' has only {len(keys)} semantic keys, need {n}"
            )
        rng = PortableRng(derive_seed(plan.seed, "pairkeys", label))
        sampled = [keys[i] for i in rng.sample_positions(len(keys), n)]
        for key in sorted(sampled):
            for side_tags, out in ((set_a, out_a), (set_b, out_b)):
                ordered = sorted(side_tags)
                if len(ordered) > r:
                    lrng = PortableRng(derive_seed(plan.seed, "pairlangs", label, key))
                    langs = sorted(ordered[i] for i in lrng.sample_positions(len(ordered), r))
                else:
                    langs = ordered
                for lang in langs:
                    rec = table.get((label, key, lang))
                    if rec is None:
                        raise DataError(
                            f"semantic key '{key}' (class '{label}') has no '{lang}' translation"
                        )
                    out.append(rec)
    return Dataset(tuple(out_a)), Dataset(tuple(out_b))
