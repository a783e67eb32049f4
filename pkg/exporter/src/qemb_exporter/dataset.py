"""Minimal reader for the labeled-query dataset schema.

Only what the exporter needs: (id, text) pairs with duplicate-id and
empty-text validation. JSON-lines objects require string fields id, text,
label, language; TSV is five tab-separated columns with a header row.
"""

from __future__ import annotations

import json

from . import ExportError

_TSV_HEADER = ["id", "text", "label", "language", "semantic_key"]


def read_id_text_pairs(path: str, format: str = "jsonl") -> list[tuple[str, str]]:
    if format == "jsonl":
        pairs = _read_jsonl(path)
    elif format == "tsv":
        pairs = _read_tsv(path)
    else:
        raise ExportError(f"unknown dataset format '{format}'")
    if not pairs:
        raise ExportError(f"{path}: dataset contains no records")
    seen: set[str] = set()
    for rec_id, text in pairs:
        if rec_id in seen:
            raise ExportError(f"{path}: duplicate record id '{rec_id}'")
        seen.add(rec_id)
        if not text.strip():
            raise ExportError(f"{path}: record '{rec_id}' has empty text")
    return pairs


def _read_jsonl(path: str) -> list[tuple[str, str]]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ExportError(f"{path}:{lineno}: malformed JSON: {e}") from e
            for key in ("id", "text", "label", "language"):
                if not isinstance(obj.get(key), str):
                    raise ExportError(f"{path}:{lineno}: missing string field '{key}'")
            pairs.append((obj["id"], obj["text"]))
    return pairs


def _read_tsv(path: str) -> list[tuple[str, str]]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\r\n").split("\t")
        if header != _TSV_HEADER:
            raise ExportError(f"{path}:1: TSV header must be {_TSV_HEADER}")
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\r\n").split("\t")
            if len(fields) != len(_TSV_HEADER):
                raise ExportError(f"{path}:{lineno}: expected {len(_TSV_HEADER)} fields")
            pairs.append((fields[0], fields[1]))
    return pairs
