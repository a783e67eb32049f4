"""Core export routine: dataset in, canonical QEMB store out."""

from __future__ import annotations

import numpy as np

from .dataset import read_id_text_pairs
from .qemb import write_qemb


def export_embeddings(
    dataset_path: str,
    encoder,
    out_path: str,
    format: str = "jsonl",
) -> tuple[int, int]:
    """Encode every record and write the store; returns (count, dim).

    Records are encoded and written in sorted-by-id order, so repeated runs
    with a deterministic encoder produce byte-identical files.
    """
    pairs = read_id_text_pairs(dataset_path, format=format)
    pairs.sort(key=lambda p: p[0].encode("utf-8"))
    texts = [text for _, text in pairs]
    matrix = np.asarray(encoder.encode(texts), dtype=np.float32)
    vectors = {rec_id: matrix[i] for i, (rec_id, _) in enumerate(pairs)}
    write_qemb(out_path, vectors, provider_name=encoder.name)
    return len(pairs), int(matrix.shape[1])
