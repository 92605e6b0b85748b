"""Writer/reader for the SLMX dense-matrix interchange format.

Layout: magic ``SLMX`` (4 bytes), version u32 = 1, rows u64, cols u64,
dtype u32 (1 = float32), then the row-major little-endian payload. The
format is shared with the style-regression toolkit, which is the primary
consumer of files written here; this module implements it independently so
the exporter has no import-level coupling to that package.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SLMX"
VERSION = 1
DTYPE_F32 = 1
_HEADER = struct.Struct("<4sIQQI")
HEADER_SIZE = _HEADER.size  # 28


class FormatError(ValueError):
    """The file does not parse as an SLMX matrix."""


def write_matrix(mat: np.ndarray, path: str | Path) -> None:
    """Write a finite 2-D array as float32; float64 input is downcast."""
    arr = np.asarray(mat)
    if arr.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite values")
    payload = np.ascontiguousarray(arr, dtype="<f4")
    header = _HEADER.pack(MAGIC, VERSION, arr.shape[0], arr.shape[1], DTYPE_F32)
    Path(path).write_bytes(header + payload.tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < HEADER_SIZE:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, rows, cols, dtype = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    expected = HEADER_SIZE + rows * cols * 4
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=HEADER_SIZE)
    return data.reshape(rows, cols).copy()
