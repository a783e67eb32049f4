import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simquery.dataset import Dataset, QueryRecord
from simquery.errors import DataError
from simquery.metrics import (
    accuracy,
    build_report,
    confusion_counts,
    macro_f1,
    metrics_from_confusion,
)


def gold_of(labels: list[str], languages: list[str] | None = None) -> Dataset:
    languages = languages or ["en"] * len(labels)
    return Dataset(tuple(
        QueryRecord(id=f"g{i}", text=f"t {i}", label=label, language=lang)
        for i, (label, lang) in enumerate(zip(labels, languages))
    ))


def preds_of(labels: list[str]) -> list[tuple[str, str]]:
    return [(f"g{i}", label) for i, label in enumerate(labels)]


# --- accuracy -------------------------------------------------------------


def test_accuracy_all_correct():
    gold = gold_of(["A", "B", "A"])
    assert accuracy(preds_of(["A", "B", "A"]), gold) == 1.0


def test_accuracy_hand_counted_fixture():
    gold = gold_of(["A", "A", "B", "B"])
    assert accuracy(preds_of(["A", "B", "B", "B"]), gold) == 0.75


def test_accuracy_empty_test_set_is_error():
    gold = gold_of(["A"])
    with pytest.raises(DataError):
        accuracy([], gold)


def test_accuracy_mismatched_ids_error():
    gold = gold_of(["A", "B"])
    with pytest.raises(DataError, match="match"):
        accuracy([("g0", "A")], gold)
    with pytest.raises(DataError, match="match"):
        accuracy(preds_of(["A", "B"]) + [("extra", "A")], gold)


# --- macro F1 --------------------------------------------------------------


def test_macro_f1_perfect_is_one():
    gold = gold_of(["A", "A", "A", "B"])
    assert macro_f1(preds_of(["A", "A", "A", "B"]), gold) == 1.0


def test_macro_f1_hand_computed_fixture():
    gold = gold_of(["A", "A", "B", "B"])
    value = macro_f1(preds_of(["A", "B", "B", "B"]), gold)
    assert value == pytest.approx(0.7333, abs=1e-4)


def test_macro_f1_single_sided_predictions():
    gold = gold_of(["A", "B"])
    value = macro_f1(preds_of(["A", "A"]), gold)
    assert value == pytest.approx((2.0 / 3.0 + 0.0) / 2.0, abs=1e-4)


def test_macro_f1_ignores_predicted_only_classes_in_denominator():
    gold = gold_of(["A", "A", "B", "B"])
    preds = preds_of(["A", "Z", "B", "B"])
    # classes in macro: A and B only; Z appears in confusion but adds no F1 term
    conf = confusion_counts(preds, gold)
    assert conf["A"]["Z"] == 1
    _, macro, per_class = metrics_from_confusion(conf)
    assert {c.label for c in per_class} == {"A", "B"}
    assert macro_f1(preds, gold) == pytest.approx(macro, abs=1e-12)


def test_macro_equals_accuracy_on_symmetric_confusion():
    gold = gold_of(["A"] * 10 + ["B"] * 10)
    preds = preds_of(["A"] * 8 + ["B"] * 2 + ["B"] * 8 + ["A"] * 2)
    assert macro_f1(preds, gold) == pytest.approx(accuracy(preds, gold), abs=1e-12)


# --- two-path equality -----------------------------------------------------


@settings(deadline=None, max_examples=100)
@given(
    st.lists(
        st.tuples(st.sampled_from("ABCD"), st.sampled_from("ABCDE")),
        min_size=1, max_size=60,
    )
)
def test_pairs_and_confusion_routes_agree(pairs):
    gold = gold_of([g for g, _ in pairs])
    preds = preds_of([p for _, p in pairs])
    acc_conf, macro_conf, _ = metrics_from_confusion(confusion_counts(preds, gold))
    assert accuracy(preds, gold) == pytest.approx(acc_conf, abs=1e-12)
    assert macro_f1(preds, gold) == pytest.approx(macro_conf, abs=1e-12)


@settings(deadline=None, max_examples=60)
@given(
    st.lists(
        st.tuples(st.sampled_from("AB"), st.sampled_from("AB")),
        min_size=2, max_size=40,
    ),
    st.randoms(use_true_random=False),
)
def test_metrics_invariant_under_prediction_order(pairs, rnd):
    gold = gold_of([g for g, _ in pairs])
    preds = preds_of([p for _, p in pairs])
    shuffled = preds[:]
    rnd.shuffle(shuffled)
    assert accuracy(shuffled, gold) == accuracy(preds, gold)
    assert macro_f1(shuffled, gold) == macro_f1(preds, gold)


# --- full report -----------------------------------------------------------


def test_report_supports_sum_to_total_and_exact_accuracy():
    gold = gold_of(["A", "A", "B", "B", "C"])
    preds = preds_of(["A", "B", "B", "B", "A"])
    rep = build_report(preds, gold, name="t", provider="p", method="sim_search",
                       dataset_label="d")
    assert sum(c.support for c in rep.per_class) == rep.total == 5
    assert rep.accuracy == rep.correct / rep.total
    assert rep.confusion["A"]["B"] == 1


def test_report_per_language_breakdown():
    gold = gold_of(["A", "A", "B", "B"], languages=["en", "fr", "en", "fr"])
    preds = preds_of(["A", "A", "B", "A"])
    rep = build_report(preds, gold, name="t", provider="p", method="m", dataset_label="d")
    langs = {l.language: l for l in rep.per_language}
    assert langs["en"].accuracy == 1.0
    assert langs["fr"].accuracy == 0.5
    assert langs["en"].count == langs["fr"].count == 2


def test_report_counts_unseen_gold_labels():
    gold = gold_of(["A", "B", "NEW"])
    preds = preds_of(["A", "B", "A"])
    rep = build_report(preds, gold, name="t", provider="p", method="m", dataset_label="d",
                       known_labels=frozenset({"A", "B"}))
    assert rep.unseen_label_count == 1
    assert rep.accuracy == pytest.approx(2 / 3)


def test_report_tie_rate():
    gold = gold_of(["A", "B", "A", "B"])
    preds = preds_of(["A", "B", "A", "B"])
    ties = {"g0": True, "g1": False, "g2": False, "g3": True}
    rep = build_report(preds, gold, name="t", provider="p", method="m", dataset_label="d",
                       ties=ties)
    assert rep.tie_rate == 0.5


def test_report_to_dict_is_json_ready():
    import json

    gold = gold_of(["A", "B"])
    rep = build_report(preds_of(["A", "B"]), gold, name="t", provider="p", method="m",
                       dataset_label="d", config={"k": "31"})
    blob = json.dumps(rep.to_dict(), sort_keys=True)
    assert '"accuracy": 1.0' in blob
