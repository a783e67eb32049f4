import math

import numpy as np
import pytest

from simquery.baseline import (
    LogRegModel,
    TrainConfig,
    load_model,
    logreg_loss_grad,
    predict_logreg,
    save_model,
    train_logreg,
    translation_pipeline_eval,
)
from simquery.dataset import Dataset, QueryRecord
from simquery.embedding import EmbeddingStore, EmbeddingVector
from simquery.errors import DataError, FormatError

from conftest import store_from_vectors


def blobs(n_per=50, dim=8, gap=4.0, classes=2, seed=5):
    """Linearly separable Gaussian blobs with matching store."""
    rng = np.random.default_rng(seed)
    recs, rows = [], []
    for c in range(classes):
        center = np.zeros(dim)
        center[c % dim] = gap
        center[(c + 1) % dim] = -gap if c % 2 else gap
        for i in range(n_per):
            recs.append(QueryRecord(id=f"b{c}_{i}", text="x", label=f"cls{c}", language="en"))
            rows.append(center + rng.normal(size=dim))
    d = Dataset(tuple(recs))
    return d, store_from_vectors([r.id for r in recs], np.array(rows))


def random_model(classes=3, dim=5, l2=0.01, seed=0) -> LogRegModel:
    rng = np.random.default_rng(seed)
    return LogRegModel(
        weights=(rng.normal(size=(classes, dim)) * 0.5).astype(np.float32),
        bias=(rng.normal(size=classes) * 0.1).astype(np.float32),
        class_order=tuple(f"c{i}" for i in range(classes)),
        train_config=TrainConfig(l2_lambda=l2),
    )


def random_batch(classes=3, dim=5, size=7, seed=1):
    rng = np.random.default_rng(seed)
    return [
        (EmbeddingVector(rng.normal(size=dim).astype(np.float32)), f"c{i % classes}")
        for i in range(size)
    ]


def finite_difference_grads(model: LogRegModel, batch, eps=1e-3):
    """Central-difference oracle for both weight and bias gradients."""
    w64 = model.weights.astype(np.float64)
    b64 = model.bias.astype(np.float64)

    def loss_at(w, b):
        m = LogRegModel(weights=w.astype(np.float32), bias=b.astype(np.float32),
                        class_order=model.class_order, train_config=model.train_config)
        return logreg_loss_grad(m, batch)[0]

    gw = np.zeros_like(w64)
    for r in range(w64.shape[0]):
        for c in range(w64.shape[1]):
            wp, wm = w64.copy(), w64.copy()
            wp[r, c] += eps
            wm[r, c] -= eps
            gw[r, c] = (loss_at(wp, b64) - loss_at(wm, b64)) / (2 * eps)
    gb = np.zeros_like(b64)
    for r in range(b64.size):
        bp, bm = b64.copy(), b64.copy()
        bp[r] += eps
        bm[r] -= eps
        gb[r] = (loss_at(w64, bp) - loss_at(w64, bm)) / (2 * eps)
    return gw, gb


def max_relative_error(analytic, numeric):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


# --- loss and gradients -------------------------------------------------


def test_zero_weights_loss_is_ln2():
    model = LogRegModel(
        weights=np.zeros((2, 4), dtype=np.float32), bias=np.zeros(2, dtype=np.float32),
        class_order=("a", "b"), train_config=TrainConfig(l2_lambda=0.0),
    )
    batch = [(EmbeddingVector(np.ones(4, dtype=np.float32)), "a")]
    loss, _, _ = logreg_loss_grad(model, batch)
    assert loss == pytest.approx(math.log(2.0), abs=1e-6)


def test_gradient_matches_central_differences():
    model = random_model(classes=3, dim=5, l2=0.01)
    batch = random_batch(classes=3, dim=5, size=7)
    _, gw, gb = logreg_loss_grad(model, batch)
    fw, fb = finite_difference_grads(model, batch)
    assert max_relative_error(gw, fw) <= 1e-3
    assert max_relative_error(gb, fb) <= 1e-3


def test_duplicated_batch_gives_identical_loss_and_grads():
    model = random_model()
    batch = random_batch(size=6)
    loss1, gw1, gb1 = logreg_loss_grad(model, batch)
    loss2, gw2, gb2 = logreg_loss_grad(model, batch + batch)
    assert loss1 == pytest.approx(loss2, abs=1e-12)
    assert np.allclose(gw1, gw2, atol=1e-12)
    assert np.allclose(gb1, gb2, atol=1e-12)


def test_loss_grad_rejects_unknown_label_and_empty_batch():
    model = random_model()
    with pytest.raises(DataError, match="unknown label"):
        logreg_loss_grad(model, [(EmbeddingVector(np.ones(5, dtype=np.float32)), "zzz")])
    with pytest.raises(DataError):
        logreg_loss_grad(model, [])


# --- training ---------------------------------------------------------------


def test_separable_blobs_reach_full_training_accuracy():
    d, store = blobs()
    model = train_logreg(d, store, TrainConfig(learning_rate=0.1, l2_lambda=0.0, epochs=200,
                                               batch_size=32, seed=1))
    correct = sum(
        1 for r in d.records if predict_logreg(model, store.vector(r.id))[0] == r.label
    )
    assert correct == len(d.records)


def test_zero_epochs_gives_zero_model_and_uniform_probs():
    d, store = blobs(n_per=10, classes=4, dim=8)
    model = train_logreg(d, store, TrainConfig(epochs=0))
    assert np.array_equal(model.weights, np.zeros_like(model.weights))
    label, probs = predict_logreg(model, store.vector(d.records[0].id))
    assert label == model.class_order[0]
    assert all(p == pytest.approx(0.25, abs=1e-9) for p in probs.values())


def test_huge_l2_keeps_weights_near_zero():
    d, store = blobs(n_per=20)
    small_lr = TrainConfig(learning_rate=1e-7, epochs=50, batch_size=16, seed=2)
    ridge = train_logreg(d, store, TrainConfig(learning_rate=1e-7, l2_lambda=1e6,
                                               epochs=50, batch_size=16, seed=2))
    free = train_logreg(d, store, TrainConfig(learning_rate=1e-7, l2_lambda=0.0,
                                              epochs=50, batch_size=16, seed=2))
    norm_ridge = float(np.linalg.norm(ridge.weights))
    norm_free = float(np.linalg.norm(free.weights))
    assert norm_ridge < norm_free
    assert norm_ridge < 1e-4


def test_divergent_training_reports_epoch():
    d, store = blobs(n_per=20)
    with pytest.raises(DataError, match="epoch"):
        train_logreg(d, store, TrainConfig(learning_rate=0.5, l2_lambda=1e6, epochs=10))


def test_loss_nonincreasing_for_small_lr():
    d, store = blobs(n_per=30)
    model = train_logreg(d, store, TrainConfig(learning_rate=0.01, l2_lambda=0.0,
                                               epochs=40, batch_size=10, seed=3))
    trace = model.loss_trace
    assert all(trace[i + 1] <= trace[i] + 1e-6 for i in range(len(trace) - 1))
    assert trace[-1] <= trace[0]


def test_training_deterministic_bitwise():
    d, store = blobs(n_per=25)
    cfg = TrainConfig(learning_rate=0.1, epochs=30, batch_size=16, seed=9)
    m1 = train_logreg(d, store, cfg)
    m2 = train_logreg(d, store, cfg)
    assert np.array_equal(m1.weights, m2.weights)
    assert np.array_equal(m1.bias, m2.bias)
    m3 = train_logreg(d, store, TrainConfig(learning_rate=0.1, epochs=30, batch_size=16, seed=10))
    assert not np.array_equal(m1.weights, m3.weights)


def test_single_class_training_rejected():
    recs = tuple(QueryRecord(id=f"o{i}", text="x", label="only", language="en") for i in range(5))
    d = Dataset(recs)
    store = store_from_vectors([r.id for r in recs], np.random.default_rng(0).normal(size=(5, 4)))
    with pytest.raises(DataError, match="2 classes"):
        train_logreg(d, store, TrainConfig(epochs=1))


# --- prediction ---------------------------------------------------------------


def test_predict_holdout_blob_points():
    d, store = blobs(n_per=40, seed=11)
    model = train_logreg(d, store, TrainConfig(epochs=100, seed=4))
    held_d, held_store = blobs(n_per=5, seed=99)
    for rec in held_d.records:
        assert predict_logreg(model, held_store.vector(rec.id))[0] == rec.label


def test_probabilities_sum_to_one():
    model = random_model(classes=5, dim=6)
    rng = np.random.default_rng(3)
    for _ in range(10):
        _, probs = predict_logreg(model, EmbeddingVector(rng.normal(size=6).astype(np.float32)))
        assert sum(probs.values()) == pytest.approx(1.0, abs=1e-6)


def test_bias_shift_leaves_prediction_unchanged():
    model = random_model(classes=4, dim=5)
    shifted = LogRegModel(
        weights=model.weights,
        bias=(model.bias.astype(np.float64) + 2.5).astype(np.float32),
        class_order=model.class_order, train_config=model.train_config,
    )
    rng = np.random.default_rng(4)
    for _ in range(10):
        q = EmbeddingVector(rng.normal(size=5).astype(np.float32))
        assert predict_logreg(model, q)[0] == predict_logreg(shifted, q)[0]


def test_predict_dim_mismatch():
    model = random_model(dim=5)
    with pytest.raises(DataError, match="dim"):
        predict_logreg(model, EmbeddingVector(np.ones(6, dtype=np.float32)))


def test_argmax_invariant_under_shared_weight_scaling():
    # with zero bias, scaling every weight row by one positive constant
    # rescales all logits together and cannot move the argmax
    base = random_model(classes=4, dim=6, seed=21)
    model = LogRegModel(weights=base.weights, bias=np.zeros(4, dtype=np.float32),
                        class_order=base.class_order, train_config=base.train_config)
    scaled = LogRegModel(weights=(base.weights.astype(np.float64) * 2.5).astype(np.float32),
                         bias=np.zeros(4, dtype=np.float32),
                         class_order=base.class_order, train_config=base.train_config)
    rng = np.random.default_rng(22)
    for _ in range(20):
        q = EmbeddingVector(rng.normal(size=6).astype(np.float32))
        assert predict_logreg(model, q)[0] == predict_logreg(scaled, q)[0]


# --- persistence ---------------------------------------------------------------


def test_model_roundtrip(tmp_path):
    d, store = blobs(n_per=15)
    model = train_logreg(d, store, TrainConfig(epochs=20, seed=5))
    p = tmp_path / "m.qlrm"
    save_model(model, str(p))
    loaded = load_model(str(p))
    assert loaded.class_order == model.class_order
    assert np.array_equal(loaded.weights, model.weights)
    assert np.array_equal(loaded.bias, model.bias)


def test_model_checksum_detects_corruption(tmp_path):
    d, store = blobs(n_per=15)
    save_model(train_logreg(d, store, TrainConfig(epochs=5)), str(tmp_path / "m.qlrm"))
    blob = bytearray((tmp_path / "m.qlrm").read_bytes())
    blob[12] ^= 0x01
    (tmp_path / "m.qlrm").write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="checksum"):
        load_model(str(tmp_path / "m.qlrm"))


# --- translation pipeline -------------------------------------------------------


def test_identity_translation_equals_plain_metrics():
    d, store = blobs(n_per=30)
    model = train_logreg(d, store, TrainConfig(epochs=60, seed=6))
    test_d, test_store = blobs(n_per=6, seed=77)
    from simquery.baseline import predict_batch
    from simquery.metrics import build_report

    plain = build_report(
        predict_batch(model, [(r.id, test_store.vector(r.id)) for r in test_d.records]),
        test_d, name="x", provider="p", method="classification", dataset_label="d",
        known_labels=frozenset(model.class_order),
    )
    translated = translation_pipeline_eval(test_d, model, test_store, original_test=test_d)
    assert translated.accuracy == plain.accuracy
    assert translated.macro_f1 == plain.macro_f1
    assert translated.method == "translation"


def test_translation_id_mismatch_rejected():
    d, store = blobs(n_per=10)
    model = train_logreg(d, store, TrainConfig(epochs=5))
    test_d, test_store = blobs(n_per=3, seed=78)
    other = Dataset(tuple(
        QueryRecord(id=f"mismatch{i}", text="x", label="cls0", language="en") for i in range(3)
    ))
    with pytest.raises(DataError, match="match"):
        translation_pipeline_eval(other, model, test_store, original_test=test_d)


def test_translation_empty_set_rejected():
    d, store = blobs(n_per=10)
    model = train_logreg(d, store, TrainConfig(epochs=5))
    with pytest.raises(DataError, match="empty"):
        translation_pipeline_eval(Dataset(()), model, store)
