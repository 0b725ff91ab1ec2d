"""Benchmark the compiled scatter-add kernels against the pure-python
fallback, and check the nnz-proportional scaling of the sketch.

Run:  python3 benchmarks/bench_kernels.py
"""

import importlib
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))


def _load_kernels(force_fallback: bool):
    os.environ.pop("QRSAMPLE_NO_EXT", None)
    if force_fallback:
        os.environ["QRSAMPLE_NO_EXT"] = "1"
    import qrsample._kernels as k

    importlib.reload(k)
    return k


def bench_dense(k, n=200_000, d=20, r1=512, repeats=5):
    rng = np.random.default_rng(0)
    targets = rng.integers(0, r1, size=n).astype(np.int64)
    scales = rng.standard_cauchy(n)
    block = rng.standard_normal((n, d))
    best = np.inf
    for _ in range(repeats):
        out = np.zeros((r1, d))
        t0 = time.perf_counter()
        k.scatter_rows_dense(targets, scales, block, out)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_sparse(k, nnz=2_000_000, d=50, r1=512, repeats=5):
    rng = np.random.default_rng(1)
    entry_targets = rng.integers(0, r1, size=nnz).astype(np.int64)
    entry_scales = rng.standard_cauchy(nnz)
    cols = rng.integers(0, d, size=nnz).astype(np.int32)
    vals = rng.standard_normal(nnz)
    best = np.inf
    for _ in range(repeats):
        out = np.zeros((r1, d))
        t0 = time.perf_counter()
        k.scatter_entries_sparse(entry_targets, entry_scales, cols, vals, out)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    compiled = _load_kernels(force_fallback=False)
    if not compiled.COMPILED:
        print("warning: compiled extension unavailable; comparing fallback "
              "to itself")
    td_c, out_dc = bench_dense(compiled)
    ts_c, out_sc = bench_sparse(compiled)

    fallback = _load_kernels(force_fallback=True)
    assert not fallback.COMPILED
    td_p, out_dp = bench_dense(fallback)
    ts_p, out_sp = bench_sparse(fallback)
    _load_kernels(force_fallback=False)

    print(f"dense scatter  (200k rows x 20): compiled {td_c*1e3:8.2f} ms | "
          f"fallback {td_p*1e3:8.2f} ms | speedup {td_p/td_c:5.1f}x | "
          f"bit-identical {np.array_equal(out_dc, out_dp)}")
    print(f"sparse scatter (2M entries):     compiled {ts_c*1e3:8.2f} ms | "
          f"fallback {ts_p*1e3:8.2f} ms | speedup {ts_p/ts_c:5.1f}x | "
          f"bit-identical {np.array_equal(out_sc, out_sp)}")

    # nnz-proportional scaling of the full sketch application.
    from qrsample import SparseMatrix, build_sct
    from qrsample.rng import CounterStream
    from qrsample.sketch import apply_sct

    print("\napply_sct scaling (sparse, d = 20):")
    times = []
    for nnz in (100_000, 1_000_000, 10_000_000):
        n = nnz
        rows = np.arange(n, dtype=np.int64)
        cols = np.random.default_rng(2).integers(0, 20, size=n).astype(np.int32)
        vals = np.ones(n)
        A = SparseMatrix(n, 20, rows, cols, vals)
        sct = build_sct(n, 512, CounterStream.from_seed(0, "bench"))
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            apply_sct(sct, A)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
        print(f"  nnz = {nnz:>10,}: {best*1e3:9.2f} ms")
    expo = np.polyfit(np.log([1e5, 1e6, 1e7]), np.log(times), 1)[0]
    print(f"  fitted power-law exponent: {expo:.3f}")


if __name__ == "__main__":
    main()
