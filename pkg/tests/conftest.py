"""Shared synthetic-corpus builders for the test suite."""

from __future__ import annotations

import json

import numpy as np
import pytest

from simquery.dataset import Dataset, QueryRecord
from simquery.embedding import EmbeddingStore, EmbeddingVector

CLASS_STEMS = {
    "book_flight": "please book me a flight to",
    "cancel": "cancel my open reservation for",
    "weather": "what is the weather forecast in",
}
CITIES = ["paris", "tokyo", "berlin", "lima", "oslo", "cairo", "quito", "perth", "miami", "dakar"]


def make_records(
    classes: list[str] | None = None,
    per_class: int = 10,
    languages: list[str] | None = None,
    split: str = "t",
) -> list[QueryRecord]:
    classes = classes or list(CLASS_STEMS)
    languages = languages or ["en-US"]
    records = []
    i = 0
    for label in classes:
        stem = CLASS_STEMS.get(label, f"utterance about {label} regarding")
        for lang in languages:
            for j in range(per_class):
                records.append(
                    QueryRecord(
                        id=f"{split}{i:05d}",
                        text=f"{stem} {CITIES[j % len(CITIES)]} variant {j} ({lang})",
                        label=label,
                        language=lang,
                        semantic_key=f"u{j}",
                    )
                )
                i += 1
    return records


def write_jsonl(path, records: list[QueryRecord]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            obj = {"id": r.id, "text": r.text, "label": r.label, "language": r.language}
            if r.semantic_key is not None:
                obj["semantic_key"] = r.semantic_key
            f.write(json.dumps(obj) + "\n")


def store_from_vectors(ids: list[str], vectors: np.ndarray, provider: str = "test") -> EmbeddingStore:
    entries = {rid: EmbeddingVector(vectors[i].astype(np.float32)) for i, rid in enumerate(ids)}
    return EmbeddingStore(dim=vectors.shape[1], provider_name=provider, entries=entries)


def random_index_data(
    n: int, dim: int, seed: int, n_classes: int = 2
) -> tuple[Dataset, EmbeddingStore]:
    """Random unit-free vectors with cyclic class labels (balanced when n % n_classes == 0)."""
    rng = np.random.default_rng(seed)
    vectors = rng.normal(size=(n, dim))
    records = tuple(
        QueryRecord(
            id=f"r{i:05d}", text=f"item {i}", label=f"L{i % n_classes}",
            language="en-US",
        )
        for i in range(n)
    )
    return Dataset(records), store_from_vectors([r.id for r in records], vectors)


def gaussian_clusters(
    n_classes: int = 3,
    per_class: int = 40,
    dim: int = 16,
    sigma: float = 0.1,
    seed: int = 0,
    split: str = "g",
) -> tuple[Dataset, EmbeddingStore]:
    """Axis-aligned unit centers: center distance sqrt(2) >= 6 sigma for sigma <= 0.23."""
    rng = np.random.default_rng(seed)
    records, rows = [], []
    for c in range(n_classes):
        center = np.zeros(dim)
        center[c] = 1.0
        for j in range(per_class):
            records.append(
                QueryRecord(
                    id=f"{split}{c}_{j:04d}", text=f"cluster {c} point {j}",
                    label=f"cluster{c}", language="en-US",
                )
            )
            rows.append(center + sigma * rng.normal(size=dim))
    d = Dataset(tuple(records))
    return d, store_from_vectors([r.id for r in records], np.array(rows))


@pytest.fixture
def small_corpus() -> tuple[Dataset, EmbeddingStore]:
    from simquery.embedding import embed_dataset

    records = make_records(per_class=10)
    d = Dataset(tuple(records))
    return d, embed_dataset(d, 64, 7)


def materialize_corpus(
    root,
    languages: list[str] | None = None,
    train_per_class: int = 8,
    test_per_class: int = 4,
    dim: int = 32,
    with_translation: bool = False,
) -> dict[str, str]:
    """Write train/test jsonl + QEMB files under ``root``; returns path map."""
    from simquery.embedding import embed_dataset, save_embedding_store

    languages = languages or ["en-US", "fr-FR"]
    paths = {}
    train = make_records(per_class=train_per_class, languages=languages, split="t")
    test = make_records(per_class=test_per_class, languages=languages, split="e")
    for name, records in (("train", train), ("test", test)):
        p = root / f"{name}.jsonl"
        write_jsonl(p, records)
        d = Dataset(tuple(records))
        q = root / f"{name}.qemb"
        save_embedding_store(embed_dataset(d, dim, 7), str(q))
        paths[name] = str(p)
        paths[f"{name}_qemb"] = str(q)
    if with_translation:
        # identity "translation": same ids and labels, same text
        p = root / "test_translated.jsonl"
        write_jsonl(p, test)
        q = root / "test_translated.qemb"
        save_embedding_store(embed_dataset(Dataset(tuple(test)), dim, 7), str(q))
        paths["translated"] = str(p)
        paths["translated_qemb"] = str(q)
    return paths
