"""Problem containers, matrix storage, and the quantile loss.

Dense matrices are plain float64 C-order numpy arrays.  Sparse matrices are
kept as row-sorted COO triples (append-friendly for the generators and the
chunk files) and converted to CSR once before any heavy use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import InputError


@dataclass(frozen=True)
class SparseMatrix:
    """Row-sorted COO triples with explicit shape.

    Invariants (checked at construction): indices in range, entries sorted by
    (row, col) without duplicates, values finite and nonzero.
    """

    n_rows: int
    n_cols: int
    rows: np.ndarray  # int64
    cols: np.ndarray  # int32
    vals: np.ndarray  # float64

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int32)
        vals = np.ascontiguousarray(self.vals, dtype=np.float64)
        if not (len(rows) == len(cols) == len(vals)):
            raise InputError("triple arrays must have equal length")
        if len(rows):
            if rows.min() < 0 or rows.max() >= self.n_rows:
                raise InputError("row index out of range")
            if cols.min() < 0 or cols.max() >= self.n_cols:
                raise InputError("column index out of range")
            order = np.lexsort((cols, rows))
            if not np.array_equal(order, np.arange(len(rows))):
                raise InputError("entries must be sorted by (row, col)")
            key = rows.astype(np.int64) * self.n_cols + cols
            if np.any(np.diff(key) == 0):
                raise InputError("duplicate (row, col) entry")
        if not np.all(np.isfinite(vals)) or np.any(vals == 0.0):
            raise InputError("values must be finite and nonzero")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "vals", vals)

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    def tocsr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.vals, (self.rows, self.cols)), shape=self.shape
        )

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.vals
        return out

    @classmethod
    def from_csr(cls, m: sp.spmatrix) -> "SparseMatrix":
        coo = m.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return cls(
            m.shape[0],
            m.shape[1],
            coo.row[order].astype(np.int64),
            coo.col[order].astype(np.int32),
            coo.data[order].astype(np.float64),
        )

    def row_slice(self, lo: int, hi: int) -> "SparseMatrix":
        """Rows [lo, hi) as a new matrix with re-based row indices."""
        lo_k, hi_k = np.searchsorted(self.rows, [lo, hi])
        return SparseMatrix(
            hi - lo,
            self.n_cols,
            self.rows[lo_k:hi_k] - lo,
            self.cols[lo_k:hi_k],
            self.vals[lo_k:hi_k],
        )


Matrix = "np.ndarray | SparseMatrix"


def as_dense(a) -> np.ndarray:
    if isinstance(a, SparseMatrix):
        return a.toarray()
    return np.ascontiguousarray(a, dtype=np.float64)


def matshape(a) -> tuple:
    return a.shape


def matmul(a, x: np.ndarray) -> np.ndarray:
    """a @ x for dense or sparse a."""
    if isinstance(a, SparseMatrix):
        return a.tocsr() @ x
    return a @ x


def rmatmul(a, y: np.ndarray) -> np.ndarray:
    """a.T @ y for dense or sparse a."""
    if isinstance(a, SparseMatrix):
        return a.tocsr().T @ y
    return a.T @ y


@dataclass(frozen=True)
class QuantileProblem:
    """Design matrix A (n x d), response b (n), quantile tau in (0, 1)."""

    A: object
    b: np.ndarray
    tau: float

    def __post_init__(self):
        n, d = matshape(self.A)
        if not (n >= d >= 1):
            raise InputError(f"need n >= d >= 1, got {n} x {d}")
        if not (0.0 < self.tau < 1.0):
            raise InputError(f"tau must lie in (0, 1), got {self.tau}")
        b = np.ascontiguousarray(self.b, dtype=np.float64)
        if b.shape != (n,):
            raise InputError("b must have length n")
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return matshape(self.A)[0]

    @property
    def d(self) -> int:
        return matshape(self.A)[1]

    def flipped(self) -> "QuantileProblem":
        """The equivalent problem with tau -> 1 - tau and (A, b) negated.

        The objective is pointwise identical, so minimizers carry over
        unchanged; used to normalize tau < 1/2 into the tau >= 1/2 range
        assumed by the sampling-size formulas.
        """
        if isinstance(self.A, SparseMatrix):
            neg = SparseMatrix(
                self.A.n_rows, self.A.n_cols, self.A.rows, self.A.cols, -self.A.vals
            )
        else:
            neg = -self.A
        return QuantileProblem(neg, -self.b, 1.0 - self.tau)


@dataclass(frozen=True)
class AugmentedProblem:
    """The lifted form: Aaug = [b, -A], minimized over x with x[0] = 1."""

    Aaug: object
    tau: float
    d_aug: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "d_aug", matshape(self.Aaug)[1])


def quantile_loss(z: float, tau: float) -> float:
    """tau * z for z >= 0, (tau - 1) * z otherwise."""
    if not (0.0 < tau < 1.0):
        raise InputError(f"tau must lie in (0, 1), got {tau}")
    if not np.isfinite(z):
        raise InputError("loss argument must be finite")
    return tau * z if z >= 0.0 else (tau - 1.0) * z


def rho(v: np.ndarray, tau: float) -> float:
    """Sum of the quantile loss over the components of v."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise InputError("loss argument must be finite")
    pos = v.clip(min=0.0).sum()
    neg = v.clip(max=0.0).sum()
    return float(tau * pos + (tau - 1.0) * neg)


def objective(problem: QuantileProblem, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.d,):
        raise InputError(f"x must have length {problem.d}, got shape {x.shape}")
    return rho(problem.b - matmul(problem.A, x), problem.tau)


def augment_matrix(A, b: np.ndarray):
    """The matrix [b, -A] in the same storage layout as A."""
    if isinstance(A, SparseMatrix):
        brows = np.flatnonzero(b != 0.0).astype(np.int64)
        rows = np.concatenate([brows, A.rows])
        cols = np.concatenate(
            [np.zeros(len(brows), dtype=np.int32), A.cols + np.int32(1)]
        )
        vals = np.concatenate([b[brows], -A.vals])
        order = np.lexsort((cols, rows))
        return SparseMatrix(A.n_rows, A.n_cols + 1, rows[order], cols[order], vals[order])
    return np.hstack([np.asarray(b, dtype=np.float64)[:, None],
                      -np.asarray(A, dtype=np.float64)])


def augment(problem: QuantileProblem) -> AugmentedProblem:
    """Build Aaug = [b, -A]; rho_tau(Aaug @ (1, y)) == rho_tau(b - A y)."""
    return AugmentedProblem(augment_matrix(problem.A, problem.b), problem.tau)


def reduce_augmented(x_aug: np.ndarray) -> np.ndarray:
    """Invert the lift: drop the leading coordinate (which must equal 1)."""
    x_aug = np.asarray(x_aug, dtype=np.float64)
    if abs(x_aug[0] - 1.0) > 1e-9:
        raise InputError("augmented solution must have first coordinate 1")
    return x_aug[1:]
