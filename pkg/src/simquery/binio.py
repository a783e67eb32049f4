"""Low-level helpers for the little-endian binary file formats (QEMB/QIDX/QLRM)."""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .errors import FormatError


def read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"truncated file while reading {what}: expected {n} bytes, got {len(data)}")
    return data


def write_u8(f: BinaryIO, v: int) -> None:
    f.write(struct.pack("<B", v))


def write_u16(f: BinaryIO, v: int) -> None:
    f.write(struct.pack("<H", v))


def write_u32(f: BinaryIO, v: int) -> None:
    f.write(struct.pack("<I", v))


def write_u64(f: BinaryIO, v: int) -> None:
    f.write(struct.pack("<Q", v))


def read_u8(f: BinaryIO, what: str) -> int:
    return struct.unpack("<B", read_exact(f, 1, what))[0]


def read_u16(f: BinaryIO, what: str) -> int:
    return struct.unpack("<H", read_exact(f, 2, what))[0]


def read_u32(f: BinaryIO, what: str) -> int:
    return struct.unpack("<I", read_exact(f, 4, what))[0]


def read_u64(f: BinaryIO, what: str) -> int:
    return struct.unpack("<Q", read_exact(f, 8, what))[0]


def write_str(f: BinaryIO, s: str) -> None:
    raw = s.encode("utf-8")
    write_u32(f, len(raw))
    f.write(raw)


def read_str(f: BinaryIO, what: str) -> str:
    n = read_u32(f, f"{what} length")
    raw = read_exact(f, n, what)
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"{what} is not valid UTF-8: {e}") from e


def write_f32_array(f: BinaryIO, arr: np.ndarray) -> None:
    f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_f32_array(f: BinaryIO, count: int, what: str) -> np.ndarray:
    raw = read_exact(f, 4 * count, what)
    return np.frombuffer(raw, dtype="<f4").astype(np.float32, copy=True)
