"""Bit-exact binary container for one example's token-state matrix.

Layout: 4 ASCII magic bytes "HSF1", then three little-endian unsigned
32-bit fields (version = 1, row count, column count), then rows x cols
IEEE-754 single-precision values, little-endian, row-major. Total size
is therefore exactly 16 + 4 * rows * cols bytes. The same layout is the
interchange contract for external extractors, so every check here is
strict.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import HsfFormatError

MAGIC = b"HSF1"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
HEADER_SIZE = _HEADER.size  # 16 bytes


def write_hsf(path, matrix: np.ndarray) -> None:
    """Serialize a finite 2-D matrix, cast to single precision."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise HsfFormatError(f"payload must be a non-empty 2-D matrix, got shape {m.shape}")
    with np.errstate(over="ignore"):  # overflow is caught by the finite check
        m = np.ascontiguousarray(m, dtype="<f4")
    if not np.isfinite(m).all():
        raise HsfFormatError("payload contains non-finite values after single-precision cast")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(m.tobytes())


def read_hsf(path) -> np.ndarray:
    """Read back a matrix; any header or size deviation is a format error."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise HsfFormatError(f"{path}: {len(raw)} bytes is shorter than the 16-byte header")
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise HsfFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise HsfFormatError(f"{path}: unsupported version {version}, expected {VERSION}")
    if rows < 1 or cols < 1:
        raise HsfFormatError(f"{path}: empty shape {rows}x{cols}")
    expected = HEADER_SIZE + 4 * rows * cols
    if len(raw) != expected:
        raise HsfFormatError(f"{path}: size {len(raw)} bytes, header implies {expected}")
    payload = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE).reshape(rows, cols)
    if not np.isfinite(payload).all():
        raise HsfFormatError(f"{path}: payload contains non-finite values")
    return payload.copy()


def probe_hsf(path) -> tuple[int, int]:
    """Shape from the header alone, with the same strictness as a read."""
    p = Path(path)
    size = p.stat().st_size
    with open(p, "rb") as fh:
        head = fh.read(HEADER_SIZE)
    if len(head) < HEADER_SIZE:
        raise HsfFormatError(f"{path}: {len(head)} bytes is shorter than the 16-byte header")
    magic, version, rows, cols = _HEADER.unpack(head)
    if magic != MAGIC:
        raise HsfFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise HsfFormatError(f"{path}: unsupported version {version}, expected {VERSION}")
    if rows < 1 or cols < 1:
        raise HsfFormatError(f"{path}: empty shape {rows}x{cols}")
    expected = HEADER_SIZE + 4 * rows * cols
    if size != expected:
        raise HsfFormatError(f"{path}: size {size} bytes, header implies {expected}")
    return rows, cols


def validate_hsf(path) -> tuple[int, int]:
    """Full validation: header, size, and finite payload. Returns shape."""
    payload = read_hsf(path)
    return payload.shape
