"""Frozen-embedding classification head: multinomial logistic regression.

The model is trained by plain mini-batch gradient descent on mean softmax
cross-entropy with an L2 penalty ((lambda/2) * ||W||_F^2). The objective is
convex, so nothing fancier is needed, and plainness buys determinism: zero
initialization, a seeded portable shuffle per epoch, fixed batch slicing,
and float64 arithmetic throughout make the trained model a pure function
of (data, config).

Parameters are stored as float32 (QLRM file format below); computation
upcasts to float64.

QLRM binary format (little-endian)::

    magic  b"QLRM"
    u16    version (= 1)
    u32    dim
    u32    class count
    per class: u32 name_len + name bytes (UTF-8)
    class_count x dim f32 weights, row-major
    class_count f32 bias
    u32    CRC32 of everything above
"""

from __future__ import annotations

import io
import logging
import zlib
from dataclasses import dataclass

import numpy as np

from . import binio
from .dataset import Dataset
from .embedding import EmbeddingStore, EmbeddingVector
from .errors import DataError, FormatError
from .metrics import MetricsReport, build_report
from .rng import PortableRng, derive_seed

log = logging.getLogger("simquery")

QLRM_MAGIC = b"QLRM"
QLRM_VERSION = 1

_F32_MAX = float(np.finfo(np.float32).max)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    l2_lambda: float = 1e-4
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be positive")
        if self.l2_lambda < 0:
            raise DataError("l2_lambda must be non-negative")
        if self.epochs < 0:
            raise DataError("epochs must be >= 0")
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")


@dataclass(frozen=True)
class LogRegModel:
    weights: np.ndarray          # [num_classes x dim] float32
    bias: np.ndarray             # [num_classes] float32
    class_order: tuple[str, ...]
    train_config: TrainConfig | None = None
    loss_trace: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float32)
        b = np.asarray(self.bias, dtype=np.float32)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.size:
            raise DataError("weight/bias shapes are inconsistent")
        if w.shape[0] != len(self.class_order):
            raise DataError("weight rows must match class_order length")
        if len(set(self.class_order)) != len(self.class_order):
            raise DataError("class_order contains duplicates")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DataError("model parameters contain NaN or infinity")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])

    @property
    def l2_lambda(self) -> float:
        return self.train_config.l2_lambda if self.train_config else 0.0


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _loss_grad64(
    w: np.ndarray, b: np.ndarray, x: np.ndarray, y_idx: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    # log-sum-exp form so an underflowing class probability cannot produce
    # log(0); divergence surfaces as a non-finite loss checked by the caller.
    batch = x.shape[0]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        logits = x @ w.T + b
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        lse = np.log(e.sum(axis=1))
        logp = shifted[np.arange(batch), y_idx] - lse
        loss = -float(logp.mean()) + 0.5 * l2 * float(np.sum(w * w))
        probs = e / e.sum(axis=1, keepdims=True)
        probs[np.arange(batch), y_idx] -= 1.0
        probs /= batch
        grad_w = probs.T @ x + l2 * w
        grad_b = probs.sum(axis=0)
    return loss, grad_w, grad_b


def logreg_loss_grad(
    model: LogRegModel, batch: list[tuple[EmbeddingVector, str]]
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy (+ L2 term) and its exact gradients on one batch."""
    if not batch:
        raise DataError("loss requires a non-empty batch")
    class_pos = {c: i for i, c in enumerate(model.class_order)}
    for _, label in batch:
        if label not in class_pos:
            raise DataError(f"unknown label '{label}'")
    x = np.stack([vec.values.astype(np.float64) for vec, _ in batch])
    if x.shape[1] != model.dim:
        raise DataError(f"batch dim {x.shape[1]} does not match model dim {model.dim}")
    y_idx = np.array([class_pos[label] for _, label in batch], dtype=np.int64)
    return _loss_grad64(
        model.weights.astype(np.float64), model.bias.astype(np.float64),
        x, y_idx, model.l2_lambda,
    )


def train_logreg(
    train: Dataset, store: EmbeddingStore, config: TrainConfig | None = None
) -> LogRegModel:
    """Mini-batch gradient descent from zero initialization.

    Deterministic for a given (data, config): the per-epoch shuffle comes
    from the portable RNG and batches are consecutive slices of it.
    """
    config = config or TrainConfig()
    class_order = tuple(sorted(train.label_set))
    if len(class_order) < 2:
        raise DataError("training requires at least 2 classes")
    class_pos = {c: i for i, c in enumerate(class_order)}
    x = np.stack([store.vector(r.id).values.astype(np.float64) for r in train.records])
    y_idx = np.array([class_pos[r.label] for r in train.records], dtype=np.int64)
    n, dim = x.shape

    w = np.zeros((len(class_order), dim), dtype=np.float64)
    b = np.zeros(len(class_order), dtype=np.float64)
    rng = PortableRng(derive_seed(config.seed, "logreg-shuffle"))
    trace: list[float] = []
    init_loss, _, _ = _loss_grad64(w, b, x, y_idx, config.l2_lambda)
    trace.append(init_loss)
    for epoch in range(config.epochs):
        order = list(range(n))
        rng.shuffle(order)
        perm = np.array(order, dtype=np.int64)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            sel = perm[start : start + config.batch_size]
            loss, gw, gb = _loss_grad64(w, b, x[sel], y_idx[sel], config.l2_lambda)
            if not np.isfinite(loss):
                raise DataError(f"training diverged (loss is not finite) at epoch {epoch + 1}")
            w -= config.learning_rate * gw
            b -= config.learning_rate * gb
            # parameters are contractually float32; exceeding its range is divergence
            # (the comparison is False for NaN, so this also catches NaN)
            if not (np.all(np.abs(w) <= _F32_MAX) and np.all(np.abs(b) <= _F32_MAX)):
                raise DataError(
                    f"training diverged (parameters left float32 range) at epoch {epoch + 1}"
                )
            epoch_loss += loss
            batches += 1
        trace.append(epoch_loss / batches)
    final_loss, _, _ = _loss_grad64(w, b, x, y_idx, config.l2_lambda)
    log.info(
        "event=train_logreg classes=%d n=%d epochs=%d init_loss=%.6f final_loss=%.6f",
        len(class_order), n, config.epochs, init_loss, final_loss,
    )
    return LogRegModel(
        weights=w.astype(np.float32), bias=b.astype(np.float32),
        class_order=class_order, train_config=config, loss_trace=tuple(trace),
    )


def predict_logreg(model: LogRegModel, q: EmbeddingVector) -> tuple[str, dict[str, float]]:
    """Argmax class and the full softmax distribution."""
    if q.dim != model.dim:
        raise DataError(f"query dim {q.dim} does not match model dim {model.dim}")
    logits = model.weights.astype(np.float64) @ q.values.astype(np.float64) + model.bias.astype(np.float64)
    probs = _softmax(logits[None, :])[0]
    best = int(np.argmax(probs))  # first occurrence = class_order position on ties
    return model.class_order[best], {c: float(p) for c, p in zip(model.class_order, probs)}


def predict_batch(model: LogRegModel, items: list[tuple[str, EmbeddingVector]]) -> list[tuple[str, str]]:
    preds = []
    for qid, vec in items:
        label, _ = predict_logreg(model, vec)
        preds.append((qid, label))
    return preds


def translation_pipeline_eval(
    translated_test: Dataset,
    model: LogRegModel,
    store: EmbeddingStore,
    original_test: Dataset | None = None,
    *,
    name: str = "translation",
    provider: str = "",
    dataset_label: str = "",
) -> MetricsReport:
    """Evaluate the head on externally translated test queries.

    The translated records keep the original ids and labels; when the
    original test set is supplied, the id sets must match exactly.
    """
    if len(translated_test.records) == 0:
        raise DataError("translated test set is empty")
    if original_test is not None:
        orig = {r.id for r in original_test.records}
        trans = {r.id for r in translated_test.records}
        if orig != trans:
            missing = sorted(orig - trans)[:5]
            extra = sorted(trans - orig)[:5]
            raise DataError(
                f"translated ids do not match original test ids (missing {missing}, extra {extra})"
            )
    preds = predict_batch(model, [(r.id, store.vector(r.id)) for r in translated_test.records])
    return build_report(
        preds, translated_test,
        name=name, provider=provider, method="translation",
        dataset_label=dataset_label or "translated",
        known_labels=frozenset(model.class_order),
    )


def save_model(model: LogRegModel, path: str) -> None:
    buf = io.BytesIO()
    buf.write(QLRM_MAGIC)
    binio.write_u16(buf, QLRM_VERSION)
    binio.write_u32(buf, model.dim)
    binio.write_u32(buf, len(model.class_order))
    for name in model.class_order:
        binio.write_str(buf, name)
    binio.write_f32_array(buf, model.weights)
    binio.write_f32_array(buf, model.bias)
    payload = buf.getvalue()
    with open(path, "wb") as f:
        f.write(payload)
        f.write(zlib.crc32(payload).to_bytes(4, "little"))


def load_model(path: str) -> LogRegModel:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4:
        raise FormatError(f"{path}: file too short to be a QLRM model")
    payload, stored = blob[:-4], int.from_bytes(blob[-4:], "little")
    if zlib.crc32(payload) != stored:
        raise FormatError(f"{path}: checksum mismatch, file is corrupt")
    f = io.BytesIO(payload)
    magic = binio.read_exact(f, 4, "magic")
    if magic != QLRM_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {QLRM_MAGIC!r}")
    version = binio.read_u16(f, "version")
    if version != QLRM_VERSION:
        raise FormatError(f"{path}: unsupported QLRM version {version}")
    dim = binio.read_u32(f, "dim")
    n_classes = binio.read_u32(f, "class count")
    names = tuple(binio.read_str(f, f"class {i} name") for i in range(n_classes))
    weights = binio.read_f32_array(f, n_classes * dim, "weights").reshape(n_classes, dim)
    bias = binio.read_f32_array(f, n_classes, "bias")
    if f.read(1):
        raise FormatError(f"{path}: trailing bytes after model payload")
    return LogRegModel(weights=weights, bias=bias, class_order=names)
