"""Times the hot kernels under both backends and prints a comparison.

The backend is fixed at import, so this script re-invokes itself in a
subprocess per backend (R4STYLE_BACKEND=numba / numpy) and merges the
results. Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --scale large --repeats 7
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

SCALES = {
    # k sentences, m categories, n vocabulary, r latent rank
    "small": dict(k=20_000, m=30, n=2_000, r=8),
    "medium": dict(k=100_000, m=60, n=10_000, r=16),
    "large": dict(k=300_000, m=80, n=19_000, r=24),
}


def _time(fn, repeats: int) -> float:
    fn()  # warmup; also triggers JIT compilation on the numba backend
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def run_single(scale: str, repeats: int) -> dict:
    import numpy as np

    from r4style import _accel

    dims = SCALES[scale]
    k, m, n, r = dims["k"], dims["m"], dims["n"], dims["r"]
    rng = np.random.default_rng(0)

    W = rng.normal(size=(k, r))
    V = rng.normal(size=(n, r))
    idx = rng.integers(0, n, size=k)

    X = rng.normal(size=(2_000, m))
    C = rng.normal(size=(2_000, r))
    XtX = X.T @ X
    XtC = X.T @ C
    U0 = np.zeros((m, r))

    def bcd():
        U = U0.copy()
        _accel.group_lasso_bcd(XtX, XtC, U, lam=5.0, max_sweeps=200)

    timings = {
        "scatter_add_rows": _time(lambda: _accel.scatter_add_rows(W, idx, n), repeats),
        "gather_trace": _time(lambda: _accel.gather_trace(W, V, idx), repeats),
        "group_lasso_bcd": _time(bcd, repeats),
    }
    return {"backend": _accel.BACKEND, "scale": scale, "timings": timings}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scale", choices=sorted(SCALES), default="medium")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--single", choices=["numba", "numpy"],
                        help=argparse.SUPPRESS)  # internal: one-backend child run
    args = parser.parse_args()

    if args.single:
        result = run_single(args.scale, args.repeats)
        if result["backend"] != args.single:
            print(f"requested backend {args.single} unavailable", file=sys.stderr)
            return 1
        print(json.dumps(result))
        return 0

    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, R4STYLE_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, __file__, "--single", backend,
             "--scale", args.scale, "--repeats", str(args.repeats)],
            capture_output=True, text=True, env=env,
        )
        if proc.returncode != 0:
            print(f"skipping {backend}: {proc.stderr.strip()}", file=sys.stderr)
            continue
        results[backend] = json.loads(proc.stdout)["timings"]

    dims = SCALES[args.scale]
    print(f"scale={args.scale} (k={dims['k']}, m={dims['m']}, n={dims['n']}, "
          f"r={dims['r']}), best of {args.repeats}")
    header = f"{'kernel':<20} " + "".join(f"{b + ' (s)':>14}" for b in results)
    print(header)
    print("-" * len(header))
    kernels = next(iter(results.values())).keys() if results else []
    for kernel in kernels:
        row = f"{kernel:<20} " + "".join(f"{results[b][kernel]:>14.6f}" for b in results)
        if len(results) == 2:
            ratio = results["numpy"][kernel] / max(results["numba"][kernel], 1e-12)
            row += f"   numpy/numba = {ratio:.2f}x"
        print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())
