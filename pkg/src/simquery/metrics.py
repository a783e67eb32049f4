"""Accuracy, macro-F1, per-class and per-language breakdowns.

Two independent computation routes are kept on purpose: ``accuracy`` and
``macro_f1`` scan raw (gold, predicted) pairs, while ``MetricsReport`` is
assembled from a confusion matrix. Tests assert the routes agree.

Conventions: macro-F1 averages per-class F1 over the *gold* label set
(unweighted); a class with precision + recall = 0 contributes F1 = 0;
labels that are predicted but never appear in gold stay in the confusion
matrix but not in the macro denominator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dataset import Dataset
from .errors import DataError


def _check_alignment(preds: list[tuple[str, str]], gold: Dataset) -> dict[str, str]:
    if len(gold.records) == 0:
        raise DataError("cannot evaluate an empty test set")
    gold_map = {r.id: r.label for r in gold.records}
    pred_ids = [pid for pid, _ in preds]
    if len(set(pred_ids)) != len(pred_ids):
        raise DataError("duplicate prediction ids")
    missing = sorted(set(gold_map) - set(pred_ids))
    extra = sorted(set(pred_ids) - set(gold_map))
    if missing or extra:
        raise DataError(
            f"prediction ids do not match gold ids (missing {missing[:5]}, extra {extra[:5]})"
        )
    return gold_map


def accuracy(preds: list[tuple[str, str]], gold: Dataset) -> float:
    """Exact fraction of predictions equal to the gold label."""
    gold_map = _check_alignment(preds, gold)
    correct = sum(1 for pid, label in preds if gold_map[pid] == label)
    return correct / len(preds)


def _f1_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2.0 * precision * recall / (precision + recall)


def macro_f1(preds: list[tuple[str, str]], gold: Dataset) -> float:
    """Unweighted mean of per-class F1 over the gold label set (pair-scan route)."""
    gold_map = _check_alignment(preds, gold)
    gold_labels = sorted({label for label in gold_map.values()})
    total = 0.0
    for cls in gold_labels:
        tp = sum(1 for pid, label in preds if label == cls and gold_map[pid] == cls)
        fp = sum(1 for pid, label in preds if label == cls and gold_map[pid] != cls)
        fn = sum(1 for pid, label in preds if label != cls and gold_map[pid] == cls)
        total += _f1_from_counts(tp, fp, fn)[2]
    return total / len(gold_labels)


def confusion_counts(preds: list[tuple[str, str]], gold: Dataset) -> dict[str, dict[str, int]]:
    """Nested counts: confusion[gold_label][predicted_label]."""
    gold_map = _check_alignment(preds, gold)
    confusion: dict[str, dict[str, int]] = {}
    for pid, label in preds:
        row = confusion.setdefault(gold_map[pid], {})
        row[label] = row.get(label, 0) + 1
    return confusion


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class LanguageMetrics:
    language: str
    accuracy: float
    macro_f1: float
    count: int


@dataclass(frozen=True)
class MetricsReport:
    """Everything one experiment arm reports."""

    name: str
    provider: str
    method: str
    dataset_label: str
    total: int
    correct: int
    accuracy: float
    macro_f1: float
    tie_rate: float
    unseen_label_count: int
    per_class: tuple[ClassMetrics, ...]
    per_language: tuple[LanguageMetrics, ...]
    confusion: dict[str, dict[str, int]]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "provider": self.provider,
            "method": self.method,
            "dataset_label": self.dataset_label,
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "tie_rate": self.tie_rate,
            "unseen_label_count": self.unseen_label_count,
            "per_class": [
                {
                    "label": c.label,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                }
                for c in self.per_class
            ],
            "per_language": [
                {
                    "language": l.language,
                    "accuracy": l.accuracy,
                    "macro_f1": l.macro_f1,
                    "count": l.count,
                }
                for l in self.per_language
            ],
            "confusion": {g: dict(sorted(row.items())) for g, row in sorted(self.confusion.items())},
            "config": self.config,
        }


def metrics_from_confusion(confusion: dict[str, dict[str, int]]) -> tuple[float, float, tuple[ClassMetrics, ...]]:
    """(accuracy, macro_f1, per_class) derived from a confusion matrix."""
    gold_labels = sorted(confusion)
    total = sum(sum(row.values()) for row in confusion.values())
    if total == 0:
        raise DataError("cannot derive metrics from an empty confusion matrix")
    correct = sum(confusion.get(cls, {}).get(cls, 0) for cls in gold_labels)
    per_class = []
    for cls in gold_labels:
        tp = confusion.get(cls, {}).get(cls, 0)
        fn = sum(cnt for pred, cnt in confusion[cls].items() if pred != cls)
        fp = sum(
            cnt
            for g, row in confusion.items()
            if g != cls
            for pred, cnt in row.items()
            if pred == cls
        )
        precision, recall, f1 = _f1_from_counts(tp, fp, fn)
        per_class.append(
            ClassMetrics(label=cls, precision=precision, recall=recall, f1=f1,
                         support=tp + fn)
        )
    macro = sum(c.f1 for c in per_class) / len(per_class)
    return correct / total, macro, tuple(per_class)


def build_report(
    preds: list[tuple[str, str]],
    gold: Dataset,
    *,
    name: str,
    provider: str,
    method: str,
    dataset_label: str,
    ties: dict[str, bool] | None = None,
    known_labels: frozenset[str] | None = None,
    config: dict | None = None,
) -> MetricsReport:
    """Assemble the full report from predictions (confusion-matrix route).

    ``known_labels`` is the index/train label universe: gold labels outside
    it can never be predicted, are counted as wrong automatically, and are
    surfaced through ``unseen_label_count``.
    """
    confusion = confusion_counts(preds, gold)
    acc, macro, per_class = metrics_from_confusion(confusion)
    total = len(preds)
    correct = sum(confusion.get(c, {}).get(c, 0) for c in confusion)
    tie_rate = 0.0
    if ties is not None:
        tie_rate = sum(1 for pid, _ in preds if ties.get(pid, False)) / total
    unseen = 0
    if known_labels is not None:
        unseen = sum(1 for r in gold.records if r.label not in known_labels)

    by_lang: dict[str, list[tuple[str, str]]] = {}
    lang_of = {r.id: r.language for r in gold.records}
    for pid, label in preds:
        by_lang.setdefault(lang_of[pid], []).append((pid, label))
    per_language = []
    for lang in sorted(by_lang):
        sub_ids = {pid for pid, _ in by_lang[lang]}
        sub_gold = Dataset(tuple(r for r in gold.records if r.id in sub_ids))
        sub_conf = confusion_counts(by_lang[lang], sub_gold)
        sub_acc, sub_macro, _ = metrics_from_confusion(sub_conf)
        per_language.append(
            LanguageMetrics(language=lang, accuracy=sub_acc, macro_f1=sub_macro,
                            count=len(by_lang[lang]))
        )
    return MetricsReport(
        name=name,
        provider=provider,
        method=method,
        dataset_label=dataset_label,
        total=total,
        correct=correct,
        accuracy=acc,
        macro_f1=macro,
        tie_rate=tie_rate,
        unseen_label_count=unseen,
        per_class=per_class,
        per_language=tuple(per_language),
        confusion=confusion,
        config=dict(config or {}),
    )
