"""QEMB writer.

Format (little-endian, no padding): magic "QEMB", u16 version = 1, u32
dim, u64 count, then per record u32 id_len + id bytes (UTF-8) + dim x f32,
then u32 provider_name_len + provider_name bytes. Records are written in
canonical order: sorted by id bytes. Vectors go out exactly as the encoder
produced them (no normalization here; the consumer normalizes at index
build).
"""

from __future__ import annotations

import struct

import numpy as np

from . import ExportError

MAGIC = b"QEMB"
VERSION = 1


def write_qemb(path: str, vectors: dict[str, np.ndarray], provider_name: str) -> None:
    if not vectors:
        raise ExportError("refusing to write an empty QEMB store")
    dims = {int(v.size) for v in vectors.values()}
    if len(dims) != 1:
        raise ExportError(f"inconsistent vector dimensions: {sorted(dims)}")
    dim = dims.pop()
    for rec_id, vec in vectors.items():
        if not np.all(np.isfinite(vec)):
            raise ExportError(f"record '{rec_id}' produced non-finite components")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", VERSION))
        f.write(struct.pack("<I", dim))
        f.write(struct.pack("<Q", len(vectors)))
        for rec_id in sorted(vectors, key=lambda s: s.encode("utf-8")):
            raw = rec_id.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(np.ascontiguousarray(vectors[rec_id], dtype="<f4").tobytes())
        name = provider_name.encode("utf-8")
        f.write(struct.pack("<I", len(name)))
        f.write(name)
