"""Low-rank multivariate regression of one-hot targets on style features.

The coefficient matrix is factored as B = U V^T with V orthonormal. Two
penalties are supported, both fit by alternating minimization in which each
half-step is the exact minimizer of its block, so the objective never
increases:

* ridge (R4):  J = 0.5 ||Y - X U V^T||_F^2 + lam * ||U||_F^2
    - U-step: solve (X^T X + 2 lam I) U = X^T Y V
    - V-step: orthogonal Procrustes, V = P Q^T from the thin SVD
      Y^T X U = P S Q^T
* row group lasso (SRRR): J = 0.5 ||Y - X U V^T||_F^2 + lam * sum_j ||U_j||_2
    - same V-step; the U-step runs cyclic block-coordinate descent with
      exact row-wise group soft-thresholding, which drives uninformative
      feature rows to exact zero

V is initialized to the top-r right singular vectors of X^T Y. Iteration
stops when the relative objective decrease falls below ``tol`` or after
``max_iters`` rounds.

Targets may be passed dense (k x n) or as IndexedTargets; the index form
never materializes Y — cross products use scatter/gather kernels with
identical results up to roundoff. All computation is float64.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._accel import gather_trace, scatter_add_rows, thread_cap
from .lexicon import CategoryLexicon
from .matrixio import IndexedTargets, read_matrix, write_matrix

_RELDROP_FLOOR = 1.0  # relative decrease measured against max(1, |J|)


class SingularDesignError(ArithmeticError):
    """X^T X is numerically singular; a ridge penalty (lam > 0) regularizes it."""


class NonFiniteObjectiveError(ArithmeticError):
    """The objective became non-finite, signalling numerical blow-up."""


@dataclass
class R4Model:
    """Ridge-penalized rank-r factor pair; B = U @ V.T."""

    U: np.ndarray  # (m, r)
    V: np.ndarray  # (n, r), orthonormal columns
    lam: float
    rank: int
    objective_trace: list[float]
    orthogonality_trace: list[float] = field(default_factory=list)
    converged: bool = True

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[0]

    def coefficients(self) -> np.ndarray:
        return self.U @ self.V.T


@dataclass
class SRRRModel:
    """Group-lasso rank-r factor pair; rows of U listed in zero_rows are exactly 0."""

    U: np.ndarray
    V: np.ndarray
    lam: float
    rank: int
    zero_rows: list[int]
    objective_trace: list[float]
    orthogonality_trace: list[float] = field(default_factory=list)
    converged: bool = True

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[0]

    def coefficients(self) -> np.ndarray:
        return self.U @ self.V.T


@dataclass(frozen=True)
class SweepResult:
    """Per-rank train/test MSE from a seeded train/test split."""

    entries: tuple[tuple[int, float, float], ...]  # (rank, train_mse, test_mse)
    split_seed: int

    def best_rank(self) -> int:
        return min(self.entries, key=lambda e: e[2])[0]

    def write_csv(self, path: str | Path) -> None:
        lines = ["rank,train_mse,test_mse"]
        for r, tr, te in self.entries:
            lines.append(f"{r},{tr!r},{te!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def write_long_csv(self, path: str | Path) -> None:
        lines = ["rank,split,mse"]
        for r, tr, te in self.entries:
            lines.append(f"{r},train,{tr!r}")
            lines.append(f"{r},test,{te!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# target adapters: dense (k, n) array or IndexedTargets
# ---------------------------------------------------------------------------


class _Targets:
    """Uniform view over dense and index-form targets."""

    def __init__(self, Y):
        if isinstance(Y, IndexedTargets):
            self.indices = np.ascontiguousarray(Y.indices, dtype=np.int64)
            self.n = Y.n
            self.k = Y.k
            self.dense = None
            self.ssq = float(self.k)  # each one-hot row has unit norm
        else:
            dense = np.asarray(Y, dtype=np.float64)
            if dense.ndim != 2:
                raise ValueError(f"Y must be 2-D or IndexedTargets, got shape {dense.shape}")
            if not np.all(np.isfinite(dense)):
                raise ValueError("Y contains non-finite values")
            self.indices = None
            self.n = dense.shape[1]
            self.k = dense.shape[0]
            self.dense = dense
            self.ssq = float(np.sum(dense * dense))

    def xty(self, X: np.ndarray) -> np.ndarray:
        """X^T Y, (m, n)."""
        if self.dense is not None:
            return X.T @ self.dense
        return scatter_add_rows(X, self.indices, self.n).T

    def ytw(self, W: np.ndarray) -> np.ndarray:
        """Y^T W for row-aligned W, (n, r)."""
        if self.dense is not None:
            return self.dense.T @ W
        return scatter_add_rows(W, self.indices, self.n)

    def trace_vtytw(self, W: np.ndarray, V: np.ndarray) -> float:
        """trace(V^T Y^T W)."""
        if self.dense is not None:
            return float(np.einsum("ij,ij->", self.dense @ V, W))
        return gather_trace(W, V, self.indices)

    def residual_ssq(self, W: np.ndarray, V: np.ndarray) -> float:
        """||Y - W V^T||_F^2, assuming V has orthonormal columns."""
        if self.dense is not None:
            R = self.dense - W @ V.T
            return float(np.sum(R * R))
        return self.ssq - 2.0 * self.trace_vtytw(W, V) + float(np.sum(W * W))


def _as_design(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    return X


def _check_rank(r: int, m: int, n: int) -> int:
    r = int(r)
    if not 1 <= r <= min(m, n):
        raise ValueError(f"rank must be in [1, {min(m, n)}], got {r}")
    return r


def _check_gram(G: np.ndarray) -> None:
    # LAPACK can spin forever on non-finite input, so test before any SVD/solve
    if not np.all(np.isfinite(G)):
        raise NonFiniteObjectiveError(
            "X^T X overflowed to non-finite values; rescale the design"
        )


def _gram_is_singular(G: np.ndarray) -> bool:
    s = np.linalg.svd(G, compute_uv=False)
    return bool(s[-1] <= s[0] * 1e-12 or s[0] == 0.0)


def _init_v(xty: np.ndarray, r: int) -> np.ndarray:
    # top-r right singular vectors of X^T Y: deterministic, cross-covariance aware
    _, _, vt = np.linalg.svd(xty, full_matrices=False)
    return np.ascontiguousarray(vt[:r].T)


def _orth_error(V: np.ndarray) -> float:
    r = V.shape[1]
    return float(np.linalg.norm(V.T @ V - np.eye(r)))


def _procrustes(M: np.ndarray, V_prev: np.ndarray) -> np.ndarray:
    # exact-zero M carries no rotation information; keep the previous V
    if not np.any(M):
        return V_prev
    P, _, Qt = np.linalg.svd(M, full_matrices=False)
    return P @ Qt


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def fit_ols(X, Y) -> np.ndarray:
    """Least-squares coefficients B = (X^T X)^{-1} X^T Y, (m, n)."""
    X = _as_design(X)
    tgt = _Targets(Y)
    if X.shape[0] != tgt.k:
        raise ValueError(f"X has {X.shape[0]} rows but Y has {tgt.k}")
    with np.errstate(over="ignore"):
        G = X.T @ X
    _check_gram(G)
    if _gram_is_singular(G):
        raise SingularDesignError(
            "X^T X is singular; use ridge (fit_r4 with lam > 0) instead"
        )
    return np.linalg.solve(G, tgt.xty(X))


def fit_r4(
    X,
    Y,
    rank: int,
    lam: float = 0.0,
    max_iters: int = 200,
    tol: float = 1e-8,
) -> R4Model:
    """Alternating-minimization fit of the ridge-penalized rank-r model."""
    X = _as_design(X)
    tgt = _Targets(Y)
    if X.shape[0] != tgt.k:
        raise ValueError(f"X has {X.shape[0]} rows but Y has {tgt.k}")
    m = X.shape[1]
    r = _check_rank(rank, m, tgt.n)
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    with np.errstate(over="ignore"):
        G = X.T @ X + 2.0 * lam * np.eye(m)
    _check_gram(G)
    if lam == 0.0 and _gram_is_singular(G):
        raise SingularDesignError(
            "X^T X is singular; a positive lam regularizes the U-step"
        )
    xty = tgt.xty(X)
    V = _init_v(xty, r)
    U = np.zeros((m, r))

    trace: list[float] = []
    orth: list[float] = [_orth_error(V)]
    J_prev = None
    converged = False
    for _ in range(max_iters):
        U = np.linalg.solve(G, xty @ V)
        W = X @ U
        V = _procrustes(tgt.ytw(W), V)
        orth.append(_orth_error(V))
        J = 0.5 * tgt.residual_ssq(W, V) + lam * float(np.sum(U * U))
        if not np.isfinite(J):
            raise NonFiniteObjectiveError(f"objective became non-finite (lam={lam})")
        trace.append(J)
        if J_prev is not None and (J_prev - J) <= tol * max(_RELDROP_FLOOR, abs(J_prev)):
            converged = True
            break
        J_prev = J
    return R4Model(
        U=U, V=V, lam=float(lam), rank=r,
        objective_trace=trace, orthogonality_trace=orth, converged=converged,
    )


def srrr_lambda_max(X, Y, rank: int) -> float:
    """Smallest lam that zeroes every row of U on the first U-step."""
    X = _as_design(X)
    tgt = _Targets(Y)
    xty = tgt.xty(X)
    V = _init_v(xty, _check_rank(rank, X.shape[1], tgt.n))
    return float(np.linalg.norm(xty @ V, axis=1).max())


def fit_srrr(
    X,
    Y,
    rank: int,
    lam: float = 0.0,
    max_iters: int = 200,
    tol: float = 1e-8,
    inner_tol: float = 1e-9,
    max_inner: int = 1000,
) -> SRRRModel:
    """Alternating fit of the row-sparse (group lasso) rank-r model."""
    X = _as_design(X)
    tgt = _Targets(Y)
    if X.shape[0] != tgt.k:
        raise ValueError(f"X has {X.shape[0]} rows but Y has {tgt.k}")
    m = X.shape[1]
    r = _check_rank(rank, m, tgt.n)
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")

    from ._accel import group_lasso_bcd

    with np.errstate(over="ignore"):
        G = X.T @ X
    _check_gram(G)
    xty = tgt.xty(X)
    V = _init_v(xty, r)
    U = np.zeros((m, r))

    trace: list[float] = []
    orth: list[float] = [_orth_error(V)]
    J_prev = None
    converged = False
    for _ in range(max_iters):
        group_lasso_bcd(G, xty @ V, U, lam, tol=inner_tol, max_sweeps=max_inner)
        W = X @ U
        V = _procrustes(tgt.ytw(W), V)
        orth.append(_orth_error(V))
        pen = lam * float(np.linalg.norm(U, axis=1).sum())
        J = 0.5 * tgt.residual_ssq(W, V) + pen
        if not np.isfinite(J):
            raise NonFiniteObjectiveError(f"objective became non-finite (lam={lam})")
        trace.append(J)
        if J_prev is not None and (J_prev - J) <= tol * max(_RELDROP_FLOOR, abs(J_prev)):
            converged = True
            break
        J_prev = J
    zero_rows = [j for j in range(m) if not U[j].any()]
    return SRRRModel(
        U=U, V=V, lam=float(lam), rank=r, zero_rows=zero_rows,
        objective_trace=trace, orthogonality_trace=orth, converged=converged,
    )


def predict(model: R4Model | SRRRModel, X_new) -> np.ndarray:
    """Predicted targets X_new @ U @ V.T, (k', n)."""
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim == 1:
        X_new = X_new[None, :]
    if X_new.shape[1] != model.m:
        raise ValueError(f"X_new has {X_new.shape[1]} columns, model expects {model.m}")
    return (X_new @ model.U) @ model.V.T


def prediction_mse(model: R4Model | SRRRModel, X, Y) -> float:
    """||Y - X U V^T||_F^2 / (k * n); works for dense and indexed targets."""
    X = _as_design(X)
    tgt = _Targets(Y)
    W = (X @ model.U)
    return tgt.residual_ssq(W, model.V) / (tgt.k * tgt.n)


def rank_sweep(
    X,
    Y,
    ranks: Sequence[int],
    lam: float = 0.0,
    split: float = 0.8,
    seed: int = 0,
    max_iters: int = 200,
    tol: float = 1e-8,
) -> SweepResult:
    """Fit each rank on a seeded train split; record train and test MSE.

    Ranks may evaluate in parallel (capped by R4STYLE_THREADS); results are
    identical to sequential execution because every fit is independent and
    deterministic.
    """
    X = _as_design(X)
    tgt = _Targets(Y)
    if X.shape[0] != tgt.k:
        raise ValueError(f"X has {X.shape[0]} rows but Y has {tgt.k}")
    m, n = X.shape[1], tgt.n
    rank_list = sorted({_check_rank(r, m, n) for r in ranks})
    if len(rank_list) != len(list(ranks)):
        raise ValueError("ranks must be unique")
    if not 0.0 < split < 1.0:
        raise ValueError(f"split must be in (0, 1), got {split}")
    k = tgt.k
    n_train = int(round(split * k))
    if n_train < 1 or n_train >= k:
        raise ValueError(f"split {split} leaves an empty train or test set for k={k}")

    perm = np.random.default_rng(seed).permutation(k)
    tr, te = perm[:n_train], perm[n_train:]
    X_tr, X_te = X[tr], X[te]
    if tgt.dense is not None:
        Y_tr, Y_te = tgt.dense[tr], tgt.dense[te]
    else:
        Y_tr = IndexedTargets(indices=tgt.indices[tr], n=n)
        Y_te = IndexedTargets(indices=tgt.indices[te], n=n)

    def one(r: int) -> tuple[int, float, float]:
        model = fit_r4(X_tr, Y_tr, r, lam=lam, max_iters=max_iters, tol=tol)
        return (
            r,
            prediction_mse(model, X_tr, Y_tr),
            prediction_mse(model, X_te, Y_te),
        )

    cap = thread_cap()
    if cap > 1 and len(rank_list) > 1:
        with ThreadPoolExecutor(max_workers=min(cap, len(rank_list))) as pool:
            entries = list(pool.map(one, rank_list))
    else:
        entries = [one(r) for r in rank_list]
    return SweepResult(entries=tuple(entries), split_seed=seed)


def latent_liwc(model: R4Model | SRRRModel, x) -> np.ndarray:
    """Project a style vector onto the latent factors: z = U^T x."""
    x = getattr(x, "values", x)  # StyleVector or plain array
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.m:
        raise ValueError(f"style vector must have {model.m} entries, got shape {x.shape}")
    return model.U.T @ x


def latent_features(model: R4Model | SRRRModel, X) -> np.ndarray:
    """Row-wise latent projection of a (k, m) style matrix: X @ U."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.m:
        raise ValueError(f"style matrix must have {model.m} columns")
    return X @ model.U


def export_heatmap(
    model: R4Model | SRRRModel, lex: CategoryLexicon, path: str | Path
) -> tuple[Path, Path]:
    """Write per-category latent loadings: raw U, plus |U| row-normalized.

    The raw CSV has header ``category,dim_1..dim_r`` and one row per
    category. The companion ``.abs.csv`` holds absolute values scaled so
    each row's max is 1 (all-zero rows stay 0).
    """
    names = lex.names if isinstance(lex, CategoryLexicon) else tuple(lex)
    if len(names) != model.m:
        raise ValueError(f"lexicon has {len(names)} categories, model expects {model.m}")
    path = Path(path)
    abs_path = (
        path.with_suffix(".abs.csv") if path.suffix == ".csv" else Path(str(path) + ".abs.csv")
    )
    header = "category," + ",".join(f"dim_{j + 1}" for j in range(model.rank))

    lines = [header]
    for name, row in zip(names, model.U):
        lines.append(name + "," + ",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    A = np.abs(model.U)
    peaks = A.max(axis=1)
    scaled = np.divide(A, peaks[:, None], out=np.zeros_like(A), where=peaks[:, None] > 0)
    lines = [header]
    for name, row in zip(names, scaled):
        lines.append(name + "," + ",".join(repr(float(v)) for v in row))
    abs_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path, abs_path


# ---------------------------------------------------------------------------
# model persistence: two SLMX matrices plus a JSON sidecar
# ---------------------------------------------------------------------------


def save_model(
    model: R4Model | SRRRModel,
    prefix: str | Path,
    category_names: Sequence[str] | None = None,
    vocab_hash: str | None = None,
) -> None:
    prefix = str(prefix)
    write_matrix(model.U.astype(np.float32), prefix + ".U.slmx")
    write_matrix(model.V.astype(np.float32), prefix + ".V.slmx")
    meta = {
        "kind": "srrr" if isinstance(model, SRRRModel) else "r4",
        "lambda": model.lam,
        "rank": model.rank,
        "objective_trace": model.objective_trace,
        "converged": model.converged,
    }
    if isinstance(model, SRRRModel):
        meta["zero_rows"] = model.zero_rows
    if category_names is not None:
        meta["category_names"] = list(category_names)
    if vocab_hash is not None:
        meta["vocab_hash"] = vocab_hash
    Path(prefix + ".json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_model(prefix: str | Path) -> R4Model | SRRRModel:
    prefix = str(prefix)
    U = read_matrix(prefix + ".U.slmx").astype(np.float64)
    V = read_matrix(prefix + ".V.slmx").astype(np.float64)
    meta = json.loads(Path(prefix + ".json").read_text(encoding="utf-8"))
    common = dict(
        U=U,
        V=V,
        lam=float(meta["lambda"]),
        rank=int(meta["rank"]),
        objective_trace=list(meta["objective_trace"]),
        converged=bool(meta.get("converged", True)),
    )
    if meta.get("kind") == "srrr":
        return SRRRModel(zero_rows=list(meta.get("zero_rows", [])), **common)
    return R4Model(**common)
