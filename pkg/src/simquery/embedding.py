"""Embedding vectors, the QEMB vector store format, and a hash test embedder.

Vectors are 32-bit floats; dot products and norms accumulate in 64-bit.
Stores hold vectors exactly as the encoder produced them; normalization
happens once, at index build time.

QEMB binary format (little-endian, no padding)::

    magic  b"QEMB"
    u16    version (= 1)
    u32    dim
    u64    count
    count records of: u32 id_len, id bytes (UTF-8), dim x f32 values
    u32    provider_name_len, provider_name bytes (UTF-8)

Writers emit records sorted by id bytes; readers accept any order but
reject duplicate ids and non-finite components.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import binio
from .dataset import Dataset
from .errors import DataError, FormatError
from .rng import fnv1a64

QEMB_MAGIC = b"QEMB"
QEMB_VERSION = 1

_NORM_TOL = 1e-5


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-length float32 vector; ``normalized`` asserts unit L2 norm."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float32)
        if arr is self.values and arr.flags.writeable:
            arr = arr.copy()  # freeze our own copy, not the caller's array
        if arr.ndim != 1 or arr.size < 1:
            raise DataError("embedding vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(arr)):
            raise DataError("embedding vector contains NaN or infinite components")
        if self.normalized:
            norm = float(np.linalg.norm(arr.astype(np.float64)))
            if abs(norm - 1.0) > _NORM_TOL:
                raise DataError(f"vector flagged normalized but has norm {norm!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class EmbeddingStore:
    """Vectors keyed by record id, all sharing one dimension."""

    dim: int
    provider_name: str
    entries: dict[str, EmbeddingVector] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DataError("embedding store dim must be >= 1")
        for rec_id, vec in self.entries.items():
            if vec.dim != self.dim:
                raise DataError(
                    f"entry '{rec_id}' has dim {vec.dim}, store dim is {self.dim}"
                )

    def __len__(self) -> int:
        return len(self.entries)

    def vector(self, rec_id: str) -> EmbeddingVector:
        try:
            return self.entries[rec_id]
        except KeyError:
            raise DataError(f"no embedding for record id '{rec_id}'") from None


def normalize(v: EmbeddingVector) -> EmbeddingVector:
    """v divided by its L2 norm; raises on a near-zero vector."""
    vals = v.values.astype(np.float64)
    norm = float(np.linalg.norm(vals))
    if norm <= 1e-12:
        raise DataError("cannot normalize a near-zero vector")
    return EmbeddingVector((vals / norm).astype(np.float32), normalized=True)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of the angle between a and b, clamped to [-1, 1]."""
    if a.dim != b.dim:
        raise DataError(f"dimension mismatch: {a.dim} vs {b.dim}")
    av = a.values.astype(np.float64)
    bv = b.values.astype(np.float64)
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na <= 1e-12 or nb <= 1e-12:
        raise DataError("cosine similarity is undefined for a zero vector")
    sim = float(np.dot(av, bv)) / (na * nb)
    return min(1.0, max(-1.0, sim))


def test_embed(text: str, dim: int, seed: int) -> EmbeddingVector:
    """Deterministic stand-in for a sentence encoder; no ML stack required.

    Character 3-grams of the lowercased text (padded with STX/ETX
    sentinels) are hashed with FNV-1a 64 together with the seed; the hash
    picks a bucket and its top bit the sign. The signed counts are then
    L2-normalized. Shared substrings therefore raise cosine similarity,
    which gives synthetic corpora a usable notion of closeness.
    """
    if dim < 8:
        raise DataError("test embedder requires dim >= 8")
    if text == "":
        raise DataError("cannot embed empty text")
    padded = "\x02" + text.lower() + "\x03"
    seed_bytes = (seed & (2**64 - 1)).to_bytes(8, "little")
    acc = np.zeros(dim, dtype=np.float64)
    for i in range(len(padded) - 2):
        h = fnv1a64(seed_bytes + padded[i : i + 3].encode("utf-8"))
        sign = 1.0 if (h >> 63) == 0 else -1.0
        acc[h % dim] += sign
    norm = float(np.linalg.norm(acc))
    if norm <= 1e-12:
        # Pathological sign cancellation; fall back to a single indicator bucket.
        acc[:] = 0.0
        acc[fnv1a64(seed_bytes + padded.encode("utf-8")) % dim] = 1.0
        norm = 1.0
    return EmbeddingVector((acc / norm).astype(np.float32), normalized=True)


# Keep pytest from collecting the embedder when imported into test modules.
test_embed.__test__ = False  # type: ignore[attr-defined]


def embed_dataset(d: Dataset, dim: int, seed: int, provider_name: str = "test-hash") -> EmbeddingStore:
    """Test-hash embeddings for every record of a dataset."""
    entries = {rec.id: test_embed(rec.text, dim, seed) for rec in d.records}
    return EmbeddingStore(dim=dim, provider_name=provider_name, entries=entries)


def save_embedding_store(store: EmbeddingStore, path: str) -> None:
    with open(path, "wb") as f:
        f.write(QEMB_MAGIC)
        binio.write_u16(f, QEMB_VERSION)
        binio.write_u32(f, store.dim)
        binio.write_u64(f, len(store.entries))
        for rec_id in sorted(store.entries, key=lambda s: s.encode("utf-8")):
            binio.write_str(f, rec_id)
            binio.write_f32_array(f, store.entries[rec_id].values)
        binio.write_str(f, store.provider_name)


def load_embedding_store(path: str) -> EmbeddingStore:
    """Read a QEMB file; vectors are returned exactly as stored."""
    with open(path, "rb") as f:
        magic = binio.read_exact(f, 4, "magic")
        if magic != QEMB_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {QEMB_MAGIC!r}")
        version = binio.read_u16(f, "version")
        if version != QEMB_VERSION:
            raise FormatError(f"{path}: unsupported QEMB version {version}")
        dim = binio.read_u32(f, "dim")
        if dim < 1:
            raise FormatError(f"{path}: invalid dim {dim}")
        count = binio.read_u64(f, "count")
        entries: dict[str, EmbeddingVector] = {}
        for i in range(count):
            rec_id = binio.read_str(f, f"record {i} id")
            if rec_id in entries:
                raise FormatError(f"{path}: duplicate record id '{rec_id}'")
            values = binio.read_f32_array(f, dim, f"record '{rec_id}' values")
            if not np.all(np.isfinite(values)):
                raise FormatError(f"{path}: record '{rec_id}' contains non-finite values")
            entries[rec_id] = EmbeddingVector(values)
        provider = binio.read_str(f, "provider name")
        trailing = f.read(1)
        if trailing:
            raise FormatError(f"{path}: trailing bytes after provider name")
    return EmbeddingStore(dim=dim, provider_name=provider, entries=entries)
