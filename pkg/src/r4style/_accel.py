"""Hot numeric kernels: numba-compiled with a pure-numpy fallback.

The backend is chosen once, at import time, from the ``R4STYLE_BACKEND``
environment variable:

* ``auto`` (default) — numba when importable, numpy otherwise
* ``numba``          — require numba, fail loudly if missing
* ``numpy``          — force the pure-numpy fallback

Both backends implement the same contracts; results agree to floating-point
roundoff (summation order may differ). ``R4STYLE_THREADS`` caps thread-level
parallelism in the drivers that opt into it and is read per call, not at
import.
"""

from __future__ import annotations

import os

import numpy as np

ENV_BACKEND = "R4STYLE_BACKEND"
ENV_THREADS = "R4STYLE_THREADS"


def _choose_backend() -> str:
    choice = os.environ.get(ENV_BACKEND, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{ENV_BACKEND} must be one of auto/numba/numpy, got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise RuntimeError(f"{ENV_BACKEND}=numba but numba is not importable")
        return "numpy"
    return "numba"


BACKEND = _choose_backend()


def thread_cap() -> int:
    """Effective parallelism cap, >= 1. Invalid values raise ValueError."""
    raw = os.environ.get(ENV_THREADS, "1").strip()
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    return max(1, cap)


# ---------------------------------------------------------------------------
# numpy fallback implementations
# ---------------------------------------------------------------------------


def _scatter_add_rows_np(W, idx, n):
    out = np.zeros((n, W.shape[1]), dtype=W.dtype)
    np.add.at(out, idx, W)
    return out


def _gather_trace_np(W, V, idx):
    return float(np.einsum("ij,ij->", W, V[idx]))


def _group_lasso_bcd_np(XtX, XtC, U, lam, tol, max_sweeps):
    m = XtX.shape[0]
    diag = np.diagonal(XtX)
    for sweep in range(1, max_sweeps + 1):
        delta = 0.0
        for j in range(m):
            cj = XtC[j] - XtX[j] @ U + diag[j] * U[j]
            nrm = float(np.sqrt(cj @ cj))
            if diag[j] <= 0.0 or nrm <= lam:
                new = np.zeros_like(cj)
            else:
                new = cj * ((1.0 - lam / nrm) / diag[j])
            step = float(np.max(np.abs(new - U[j]))) if U.shape[1] else 0.0
            if step > delta:
                delta = step
            U[j] = new
        if delta <= tol:
            return sweep
    return max_sweeps


# ---------------------------------------------------------------------------
# numba implementations (same semantics, explicit loops)
# ---------------------------------------------------------------------------

if BACKEND == "numba":
    from numba import njit

    @njit(cache=True)
    def _scatter_add_rows_nb(W, idx, n):
        k, r = W.shape
        out = np.zeros((n, r), dtype=W.dtype)
        for i in range(k):
            j = idx[i]
            for t in range(r):
                out[j, t] += W[i, t]
        return out

    @njit(cache=True)
    def _gather_trace_nb(W, V, idx):
        k, r = W.shape
        acc = 0.0
        for i in range(k):
            j = idx[i]
            for t in range(r):
                acc += W[i, t] * V[j, t]
        return acc

    @njit(cache=True)
    def _group_lasso_bcd_nb(XtX, XtC, U, lam, tol, max_sweeps):
        m, r = U.shape
        c = np.empty(r, dtype=U.dtype)
        for sweep in range(1, max_sweeps + 1):
            delta = 0.0
            for j in range(m):
                gjj = XtX[j, j]
                for t in range(r):
                    acc = XtC[j, t] + gjj * U[j, t]
                    for l in range(m):
                        acc -= XtX[j, l] * U[l, t]
                    c[t] = acc
                nrm = 0.0
                for t in range(r):
                    nrm += c[t] * c[t]
                nrm = np.sqrt(nrm)
                if gjj <= 0.0 or nrm <= lam:
                    for t in range(r):
                        step = abs(U[j, t])
                        if step > delta:
                            delta = step
                        U[j, t] = 0.0
                else:
                    scale = (1.0 - lam / nrm) / gjj
                    for t in range(r):
                        new = c[t] * scale
                        step = abs(new - U[j, t])
                        if step > delta:
                            delta = step
                        U[j, t] = new
            if delta <= tol:
                return sweep
        return max_sweeps

    _scatter_impl = _scatter_add_rows_nb
    _trace_impl = _gather_trace_nb
    _bcd_impl = _group_lasso_bcd_nb
else:
    _scatter_impl = _scatter_add_rows_np
    _trace_impl = _gather_trace_np
    _bcd_impl = _group_lasso_bcd_np


# ---------------------------------------------------------------------------
# public wrappers: normalize dtypes/contiguity, then dispatch
# ---------------------------------------------------------------------------


def scatter_add_rows(W: np.ndarray, idx: np.ndarray, n: int) -> np.ndarray:
    """Accumulate rows of W into an (n, r) output: out[idx[i]] += W[i].

    With W = X @ U and idx the target indices, this is Y^T (X U) without
    materializing the dense one-hot Y.
    """
    W = np.ascontiguousarray(W, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    return _scatter_impl(W, idx, int(n))


def gather_trace(W: np.ndarray, V: np.ndarray, idx: np.ndarray) -> float:
    """sum_i W[i] . V[idx[i]], i.e. trace(V^T Y^T W) in index form."""
    W = np.ascontiguousarray(W, dtype=np.float64)
    V = np.ascontiguousarray(V, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    return float(_trace_impl(W, V, idx))


def group_lasso_bcd(
    XtX: np.ndarray,
    XtC: np.ndarray,
    U: np.ndarray,
    lam: float,
    tol: float = 1e-9,
    max_sweeps: int = 1000,
) -> int:
    """Cyclic block-coordinate descent for 0.5||C - XU||_F^2 + lam*sum_j ||U_j||_2.

    Works on the precomputed Gram pieces XtX = X^T X and XtC = X^T C. Each
    row update is the exact group soft-threshold minimizer, so the objective
    never increases. U is updated in place; returns the number of sweeps run.
    """
    U64 = np.ascontiguousarray(U, dtype=np.float64)
    sweeps = _bcd_impl(
        np.ascontiguousarray(XtX, dtype=np.float64),
        np.ascontiguousarray(XtC, dtype=np.float64),
        U64,
        float(lam),
        float(tol),
        int(max_sweeps),
    )
    if U64 is not U:
        U[...] = U64
    return int(sweeps)
