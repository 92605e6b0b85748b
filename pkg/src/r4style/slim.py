"""Rank-r compression of an embedding matrix by truncated SVD.

E (k x d) is factored as U_r diag(sigma) V_r^T keeping the top r singular
triplets; by the Eckart-Young theorem the reconstruction is the best rank-r
approximation in Frobenius norm, and the squared error equals the sum of
the discarded squared singular values. New vectors are projected into the
r-dimensional coordinate system via z = V_r^T e.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matrixio import read_matrix, write_matrix

# compression levels used by the shipped experiments
DEFAULT_RANKS = (80, 240)


@dataclass(frozen=True)
class TruncatedSVD:
    """Top-r singular triplets of an embedding matrix."""

    U_r: np.ndarray      # (k, r)
    sigma: np.ndarray    # (r,), non-increasing, >= 0
    V_r: np.ndarray      # (d, r), orthonormal columns
    rank: int
    discarded_energy: float  # sum of squared singular values beyond r
    mean: np.ndarray | None = None  # set when fitted with centering

    @property
    def d(self) -> int:
        return self.V_r.shape[0]

    def reconstruct(self) -> np.ndarray:
        """Best rank-r approximation of the original matrix."""
        out = (self.U_r * self.sigma) @ self.V_r.T
        if self.mean is not None:
            out = out + self.mean
        return out

    def rows(self) -> np.ndarray:
        """Compressed per-row coordinates U_r * sigma, (k, r)."""
        return self.U_r * self.sigma


def truncated_svd(E, rank: int, center: bool = False) -> TruncatedSVD:
    """Keep the top ``rank`` singular triplets of E (k x d)."""
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2:
        raise ValueError(f"E must be 2-D, got shape {E.shape}")
    if not np.all(np.isfinite(E)):
        raise ValueError("E contains non-finite values")
    k, d = E.shape
    rank = int(rank)
    if not 1 <= rank <= min(k, d):
        raise ValueError(f"rank must be in [1, {min(k, d)}], got {rank}")
    mean = None
    if center:
        mean = E.mean(axis=0)
        E = E - mean
    U, s, Vt = np.linalg.svd(E, full_matrices=False)
    discarded = float(np.sum(s[rank:] ** 2))
    return TruncatedSVD(
        U_r=np.ascontiguousarray(U[:, :rank]),
        sigma=np.ascontiguousarray(s[:rank]),
        V_r=np.ascontiguousarray(Vt[:rank].T),
        rank=rank,
        discarded_energy=discarded,
        mean=mean,
    )


def project(svd: TruncatedSVD, e) -> np.ndarray:
    """Coordinates of one d-vector in the retained basis: z = V_r^T e."""
    e = np.asarray(e, dtype=np.float64)
    if e.ndim != 1 or e.shape[0] != svd.d:
        raise ValueError(f"vector must have {svd.d} entries, got shape {e.shape}")
    if svd.mean is not None:
        e = e - svd.mean
    return svd.V_r.T @ e


def transform(svd: TruncatedSVD, E) -> np.ndarray:
    """Row-wise projection of a (k', d) matrix: E @ V_r."""
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[1] != svd.d:
        raise ValueError(f"matrix must have {svd.d} columns")
    if svd.mean is not None:
        E = E - svd.mean
    return E @ svd.V_r


def save_svd(svd: TruncatedSVD, prefix: str | Path, source_hash: str | None = None) -> None:
    """Persist the factorization as three SLMX files plus a JSON sidecar."""
    prefix = str(prefix)
    write_matrix(svd.U_r.astype(np.float32), prefix + ".U.slmx")
    write_matrix(svd.sigma.astype(np.float32).reshape(-1, 1), prefix + ".sigma.slmx")
    write_matrix(svd.V_r.astype(np.float32), prefix + ".V.slmx")
    meta = {
        "rank": svd.rank,
        "discarded_energy": svd.discarded_energy,
        "centered": svd.mean is not None,
    }
    if svd.mean is not None:
        write_matrix(svd.mean.astype(np.float32).reshape(1, -1), prefix + ".mean.slmx")
    if source_hash is not None:
        meta["source_hash"] = source_hash
    Path(prefix + ".json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_svd(prefix: str | Path) -> TruncatedSVD:
    prefix = str(prefix)
    U_r = read_matrix(prefix + ".U.slmx").astype(np.float64)
    sigma = read_matrix(prefix + ".sigma.slmx").astype(np.float64).ravel()
    V_r = read_matrix(prefix + ".V.slmx").astype(np.float64)
    meta = json.loads(Path(prefix + ".json").read_text(encoding="utf-8"))
    mean = None
    if meta.get("centered"):
        mean = read_matrix(prefix + ".mean.slmx").astype(np.float64).ravel()
    return TruncatedSVD(
        U_r=U_r,
        sigma=sigma,
        V_r=V_r,
        rank=int(meta["rank"]),
        discarded_energy=float(meta["discarded_energy"]),
        mean=mean,
    )
