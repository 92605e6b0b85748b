"""Design/target matrix assembly and the SLMX binary interchange format.

SLMX layout (little-endian throughout):

    offset  size  field
    0       4     magic ``SLMX``
    4       4     version, u32 = 1
    8       8     rows, u64
    16      8     cols, u64
    24      4     dtype, u32 (1 = IEEE-754 float32)
    28      -     payload, rows*cols float32 values, row-major

Round-trips are bit-exact for finite float32 matrices. Targets are kept as
an integer index list (the sparse form of the one-hot Y); the dense form is
materialized only inside solvers that need it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import SensorialRecord

MAGIC = b"SLMX"
VERSION = 1
DTYPE_F32 = 1
HEADER = struct.Struct("<4sIQQI")
HEADER_SIZE = HEADER.size  # 28 bytes


class MatrixFormatError(ValueError):
    """The file is not a valid SLMX matrix (bad magic, truncation, dtype...)."""


def write_matrix(mat: np.ndarray, path: str | Path) -> None:
    """Write a 2-D float32 matrix; other float dtypes are cast to float32."""
    arr = np.asarray(mat)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite values")
    rows, cols = arr.shape
    with Path(path).open("wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, rows, cols, DTYPE_F32))
        fh.write(arr.tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    """Read an SLMX file back into a (rows, cols) float32 array."""
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise MatrixFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, rows, cols, dtype = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise MatrixFormatError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_F32:
        raise MatrixFormatError(f"{path}: unsupported dtype code {dtype}")
    expected = HEADER_SIZE + rows * cols * 4
    if len(data) != expected:
        raise MatrixFormatError(
            f"{path}: payload size mismatch, expected {expected} bytes got {len(data)}"
        )
    arr = np.frombuffer(data, dtype="<f4", offset=HEADER_SIZE)
    return arr.reshape(rows, cols).copy()


@dataclass(frozen=True)
class IndexedTargets:
    """Sparse one-hot targets: row i is the ``indices[i]``-th basis vector of R^n."""

    indices: np.ndarray
    n: int

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 1:
            raise ValueError("target indices must be 1-D")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise ValueError("target index out of range")

    @property
    def k(self) -> int:
        return len(self.indices)

    def dense(self, dtype=np.float64) -> np.ndarray:
        out = np.zeros((self.k, self.n), dtype=dtype)
        out[np.arange(self.k), self.indices] = 1.0
        return out


@dataclass
class Dataset:
    """Aligned design matrix, target indices, and optional embeddings."""

    X: np.ndarray  # (k, m) float32 style features
    y: np.ndarray  # (k,) int64 target indices
    n: int  # vocabulary size
    E: np.ndarray | None = None  # (k, d) float32 embeddings

    @property
    def k(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def targets(self) -> IndexedTargets:
        return IndexedTargets(indices=self.y, n=self.n)


def assemble(
    records: Sequence[SensorialRecord], embeddings: np.ndarray | None = None
) -> Dataset:
    """Stack record style vectors into X and target indices into y.

    If embeddings are given they must have one row per record, in record
    order.
    """
    if not records:
        raise ValueError("no records to assemble")
    n = records[0].target.n
    m = len(records[0].style.values)
    X = np.empty((len(records), m), dtype=np.float32)
    y = np.empty(len(records), dtype=np.int64)
    for i, rec in enumerate(records):
        if rec.target.n != n or len(rec.style.values) != m:
            raise ValueError(f"record {i} has inconsistent dimensions")
        X[i] = rec.style.values
        y[i] = rec.target.index
    E = None
    if embeddings is not None:
        E = np.asarray(embeddings, dtype=np.float32)
        if E.shape[0] != len(records):
            raise ValueError(
                f"embedding rows ({E.shape[0]}) != record count ({len(records)})"
            )
    return Dataset(X=X, y=y, n=n, E=E)
