"""Encoder backends.

Each backend exposes ``encode(texts) -> float32 array [n, dim]`` plus a
``name`` recording encoder id, revision, and pooling strategy, which ends
up in the QEMB provider_name so a store is self-describing. The output
dimension is whatever the encoder reports at run time; nothing is
hard-coded.

Backends:

* ``hash``: offline deterministic stand-in (BLAKE2b digest expansion),
  used by the tests and for plumbing checks. No ML dependencies.
* ``sentence-transformers``: any sentence-transformers checkpoint, e.g.
  LaBSE or Sentence-T5 family models, using the model's own pooling.
* ``transformers``: any Hugging Face encoder (e.g. RoBERTa-Large,
  XLM-RoBERTa-Large) with mean pooling over the attention mask, for model
  cards that do not ship a sentence-pooling head.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import ExportError

# friendly aliases -> (backend, checkpoint)
ALIASES = {
    "labse": ("sentence-transformers", "sentence-transformers/LaBSE"),
    "sentence-t5": ("sentence-transformers", "sentence-transformers/sentence-t5-base"),
    "roberta-large": ("transformers", "roberta-large"),
    "xlm-roberta-large": ("transformers", "xlm-roberta-large"),
}


class HashEncoder:
    """Keyed BLAKE2b digest expansion into [-1, 1] floats."""

    def __init__(self, dim: int = 64, seed: int = 0) -> None:
        if dim < 1:
            raise ExportError("hash encoder dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self.name = f"hash:blake2b:dim{dim}:seed{seed}"

    def _one(self, text: str) -> np.ndarray:
        out = np.empty(self.dim, dtype=np.float32)
        key = self.seed.to_bytes(8, "little")
        block = 0
        produced = 0
        while produced < self.dim:
            h = hashlib.blake2b(text.encode("utf-8"), key=key,
                                salt=block.to_bytes(8, "little"))
            words = np.frombuffer(h.digest(), dtype="<u4")
            take = min(len(words), self.dim - produced)
            out[produced : produced + take] = words[:take] / 2147483648.0 - 1.0
            produced += take
            block += 1
        return out

    def encode(self, texts: list[str]) -> np.ndarray:
        return np.stack([self._one(t) for t in texts])


class SentenceTransformersEncoder:
    def __init__(self, checkpoint: str, device: str = "cpu", batch_size: int = 64,
                 revision: str | None = None) -> None:
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as e:
            raise ExportError(
                "sentence-transformers is not installed (pip install 'qemb-exporter[st]')"
            ) from e
        try:
            self.model = SentenceTransformer(checkpoint, device=device, revision=revision)
        except Exception as e:
            raise ExportError(f"failed to load encoder '{checkpoint}': {e}") from e
        self.batch_size = batch_size
        self.name = f"st:{checkpoint}@{revision or 'default'}:model-pooling"

    def encode(self, texts: list[str]) -> np.ndarray:
        try:
            out = self.model.encode(
                texts, batch_size=self.batch_size, convert_to_numpy=True,
                normalize_embeddings=False, show_progress_bar=False,
            )
        except RuntimeError as e:
            if "out of memory" in str(e).lower():
                raise ExportError(
                    f"encoder ran out of memory; retry with a smaller --batch "
                    f"(current {self.batch_size})"
                ) from e
            raise
        return np.asarray(out, dtype=np.float32)


class MeanPoolTransformersEncoder:
    def __init__(self, checkpoint: str, device: str = "cpu", batch_size: int = 64,
                 revision: str | None = None) -> None:
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as e:
            raise ExportError(
                "transformers/torch are not installed (pip install 'qemb-exporter[hf]')"
            ) from e
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(checkpoint, revision=revision)
            self.model = AutoModel.from_pretrained(checkpoint, revision=revision)
        except Exception as e:
            raise ExportError(f"failed to load encoder '{checkpoint}': {e}") from e
        self.model.eval()
        self.model.to(device)
        self.device = device
        self.batch_size = batch_size
        self.name = f"hf:{checkpoint}@{revision or 'default'}:mean"

    def encode(self, texts: list[str]) -> np.ndarray:
        torch = self._torch
        chunks = []
        try:
            with torch.no_grad():
                for start in range(0, len(texts), self.batch_size):
                    batch = texts[start : start + self.batch_size]
                    enc = self.tokenizer(batch, padding=True, truncation=True,
                                         return_tensors="pt").to(self.device)
                    hidden = self.model(**enc).last_hidden_state
                    mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
                    pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1e-9)
                    chunks.append(pooled.cpu().numpy().astype(np.float32))
        except RuntimeError as e:
            if "out of memory" in str(e).lower():
                raise ExportError(
                    f"encoder ran out of memory; retry with a smaller --batch "
                    f"(current {self.batch_size})"
                ) from e
            raise
        return np.concatenate(chunks, axis=0)


def make_encoder(encoder: str, backend: str = "auto", device: str = "cpu",
                 batch_size: int = 64, revision: str | None = None,
                 dim: int = 64, seed: int = 0):
    """Resolve an encoder name (alias, checkpoint id, or 'hash') to a backend."""
    if backend == "auto":
        if encoder == "hash":
            backend = "hash"
        elif encoder in ALIASES:
            backend, encoder = ALIASES[encoder]
        else:
            backend = "sentence-transformers"
    elif encoder in ALIASES:
        encoder = ALIASES[encoder][1]
    if backend == "hash":
        return HashEncoder(dim=dim, seed=seed)
    if backend == "sentence-transformers":
        return SentenceTransformersEncoder(encoder, device=device,
                                           batch_size=batch_size, revision=revision)
    if backend == "transformers":
        return MeanPoolTransformersEncoder(encoder, device=device,
                                           batch_size=batch_size, revision=revision)
    raise ExportError(f"unknown backend '{backend}'")
