"""Cauchy embeddings: the sparse one-target-per-row transform used for
conditioning, the dense Cauchy transform, and distortion diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, rng
from .core import SparseMatrix, matmul
from .exceptions import InputError


def sample_cauchy(stream: rng.CounterStream) -> float:
    """One standard Cauchy draw, tan(pi*(u - 1/2)) with u in the open unit
    interval."""
    return float(np.tan(np.pi * (stream.uniform(1) - 0.5))[0])


def default_embedding_rows(d: int) -> int:
    """Practical default for the sparse transform's output rows.

    The theoretical requirement is a huge polynomial in d; small sketches work
    in practice and the conditioning-number diagnostic acts as the safety
    check.
    """
    return max(64, math.ceil(8.0 * d * math.log(d + 1)) + d)


def default_dense_rows(d: int) -> int:
    return max(2 * d, math.ceil(8.0 * d * math.log(d + 1)))


@dataclass(frozen=True)
class SparseCauchyTransform:
    """One (target row, Cauchy scale) pair per input row, keyed so that both
    are pure functions of the absolute row index."""

    n: int
    r1: int
    key: int

    def targets_at(self, indices) -> np.ndarray:
        u = rng.uniform_at(rng.derive_key(self.key, "target"), indices)
        return np.minimum((u * self.r1).astype(np.int64), self.r1 - 1)

    def scales_at(self, indices) -> np.ndarray:
        return rng.cauchy_at(rng.derive_key(self.key, "scale"), indices)

    def targets(self, lo: int = 0, hi: int = None) -> np.ndarray:
        hi = self.n if hi is None else hi
        return self.targets_at(np.arange(lo, hi))

    def scales(self, lo: int = 0, hi: int = None) -> np.ndarray:
        hi = self.n if hi is None else hi
        return self.scales_at(np.arange(lo, hi))


def build_sct(n: int, r1: int, stream: rng.CounterStream) -> SparseCauchyTransform:
    if r1 < 1:
        raise InputError(f"embedding rows must be >= 1, got {r1}")
    if n < 1:
        raise InputError(f"input rows must be >= 1, got {n}")
    return SparseCauchyTransform(n=n, r1=r1, key=stream.key)


def apply_sct(sct: SparseCauchyTransform, A, out: np.ndarray = None,
              row_offset: int = 0) -> np.ndarray:
    """Accumulate scale[i] * A_(i) into output row target[i].

    Accumulation runs in ascending input-row order, so feeding the matrix in
    consecutive row blocks (``row_offset`` = absolute index of the block's
    first row) into a shared ``out`` reproduces the in-memory result bit for
    bit.  Cost is proportional to nnz(A).
    """
    n_rows, d = A.shape
    if row_offset + n_rows > sct.n:
        raise InputError("block exceeds the transform's input rows")
    if out is None:
        out = np.zeros((sct.r1, d))
    elif out.shape != (sct.r1, d):
        raise InputError("output shape mismatch")
    if isinstance(A, SparseMatrix):
        # Evaluate the per-row draws directly at each entry's absolute row
        # index; identical values to materializing the row arrays first.
        entry_rows = A.rows + np.int64(row_offset)
        _kernels.scatter_entries_sparse(
            sct.targets_at(entry_rows), sct.scales_at(entry_rows),
            A.cols, A.vals, out,
        )
    else:
        targets = sct.targets(row_offset, row_offset + n_rows)
        scales = sct.scales(row_offset, row_offset + n_rows)
        block = np.ascontiguousarray(A, dtype=np.float64)
        _kernels.scatter_rows_dense(targets, scales, block, out)
    return out


@dataclass(frozen=True)
class DenseCauchyTransform:
    """r x n matrix of independent Cauchy variates (the slow transform)."""

    r: int
    n: int
    key: int

    def values(self) -> np.ndarray:
        idx = np.arange(self.r * self.n, dtype=np.uint64)
        return rng.cauchy_at(self.key, idx).reshape(self.r, self.n)


def build_dense_cauchy(n: int, r: int, stream: rng.CounterStream) -> DenseCauchyTransform:
    if r < 1:
        raise InputError(f"rows must be >= 1, got {r}")
    return DenseCauchyTransform(r=r, n=n, key=stream.key)


def apply_dense_cauchy(t: DenseCauchyTransform, A) -> np.ndarray:
    if A.shape[0] != t.n:
        raise InputError(f"expected {t.n} rows, got {A.shape[0]}")
    G = t.values()
    if isinstance(A, SparseMatrix):
        return np.asarray((A.tocsr().T @ G.T).T)
    return G @ np.asarray(A, dtype=np.float64)


def measure_distortion(embedA, A, trials: int, gen: np.random.Generator):
    """Sampled min/max of |embed(Ax)|_1 / |Ax|_1 over random unit directions.

    A diagnostic certificate, not a proof: the extremes over `trials` random
    directions bracket the embedding distortion seen in practice.
    """
    d = A.shape[1]
    if embedA.shape[1] != d:
        raise InputError("column counts differ")
    lo, hi = np.inf, -np.inf
    for _ in range(trials):
        x = gen.standard_normal(d)
        x /= np.linalg.norm(x)
        denom = np.abs(matmul(A, x)).sum()
        if denom == 0.0:
            raise InputError("A is rank-deficient along a sampled direction")
        ratio = np.abs(matmul(embedA, x)).sum() / denom
        lo = min(lo, ratio)
        hi = max(hi, ratio)
    return float(lo), float(hi)
