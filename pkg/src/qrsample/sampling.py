"""Row-norm estimation, sampling probabilities, and the weighted row draw."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .core import QuantileProblem, SparseMatrix, matmul, rho
from .exceptions import InputError, SamplingError

_BLOCK = 1 << 16  # row block for streaming products; keeps temporaries small


@dataclass(frozen=True)
class RowNormEstimates:
    lam: np.ndarray       # per-row nonnegative norm (estimate or exact)
    mode: str             # "estimated" or "exact"
    r2: int               # projection width used (0 if exact)


@dataclass(frozen=True)
class SamplingPlan:
    probabilities: np.ndarray
    s_target: int
    expected_size: float


@dataclass(frozen=True)
class SampledProblem:
    row_indices: np.ndarray
    weights: np.ndarray
    SA: np.ndarray
    Sb: np.ndarray
    tau: float


def projection_width(n: int) -> int:
    """r2 = ceil(15 * ln(40 n)) columns for the Cauchy row-norm sketch."""
    return math.ceil(15.0 * math.log(40.0 * n))


def _basis_blocks(A, R):
    """Yield (lo, hi, U_block) for U = A R^{-1} without materializing U."""
    n = A.shape[0]
    rinv = np.linalg.inv(R)
    csr = A.tocsr() if isinstance(A, SparseMatrix) else None
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        if csr is not None:
            yield lo, hi, csr[lo:hi] @ rinv
        else:
            yield lo, hi, A[lo:hi] @ rinv


def estimate_row_norms(A, R, stream: rng.CounterStream) -> RowNormEstimates:
    """Median-of-Cauchy-projections estimate of the l1 row norms of A R^{-1}.

    Computes Lambda = A (R^{-1} Pi2) block by block; the i-th estimate is the
    median of |Lambda_(i)| and concentrates within [1/2, 3/2] of the true row
    norm with probability at least 0.95 per row.
    """
    n, d = A.shape
    if R.shape != (d, d):
        raise InputError("R must be d x d")
    r2 = projection_width(n)
    pi2 = rng.cauchy_at(stream.key, np.arange(d * r2, dtype=np.uint64)).reshape(d, r2)
    t = np.linalg.solve(R, pi2)  # R^{-1} Pi2, d x r2
    lam = np.empty(n)
    csr = A.tocsr() if isinstance(A, SparseMatrix) else None
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        block = (csr[lo:hi] @ t) if csr is not None else (A[lo:hi] @ t)
        lam[lo:hi] = np.median(np.abs(block), axis=1)
    return RowNormEstimates(lam=lam, mode="estimated", r2=r2)


def exact_row_norms(A, R) -> RowNormEstimates:
    """lambda_i = l1 norm of row i of A R^{-1}, computed in row blocks."""
    n, d = A.shape
    if R.shape != (d, d):
        raise InputError("R must be d x d")
    lam = np.empty(n)
    for lo, hi, u in _basis_blocks(A, R):
        lam[lo:hi] = np.abs(u).sum(axis=1)
    return RowNormEstimates(lam=lam, mode="exact", r2=0)


def theoretical_sample_size(
    tau: float, kappa: float, d: int, eps: float, constant: float = 81.0
) -> int:
    """Sample size making the weighted draw a (1 +/- eps) distortion of the
    loss with constant probability.

    ``constant`` is 81 for estimated row norms (the factor 3 absorbs the
    estimate slack); 27 suffices when the norms are exact.
    """
    if not (0.0 < eps <= 0.5):
        raise InputError(f"eps must lie in (0, 1/2], got {eps}")
    if not (0.5 <= tau < 1.0):
        raise InputError(f"tau must lie in [1/2, 1), got {tau}")
    mu = tau / (1.0 - tau)
    s = mu * (constant * kappa / eps**2) * (
        d * math.log(mu * 18.0 / eps) + math.log(80.0)
    )
    return math.ceil(s)


def sampling_probabilities(lam: RowNormEstimates, s: int) -> SamplingPlan:
    """p_i = min(1, s * lambda_i / sum(lambda)), with the mass clipped at 1
    redistributed over the remaining rows.

    Redistribution only increases probabilities over the plain min form, so
    the distortion guarantee is preserved; it makes the expected sample size
    exactly min(s, #positive rows), and s = n selects every row with a
    positive norm.
    """
    if s < 1:
        raise InputError(f"sample size must be >= 1, got {s}")
    values = lam.lam
    total = float(np.sum(values))
    if total <= 0.0:
        raise SamplingError("all row norms are zero; rank lost upstream")
    p = np.zeros(len(values))
    capped = np.zeros(len(values), dtype=bool)
    budget = float(s)
    while True:
        free = ~capped & (values > 0)
        free_total = float(values[free].sum())
        if budget <= 0 or free_total <= 0:
            break
        scaled = budget * values[free] / free_total
        if scaled.max() <= 1.0:
            p[free] = scaled
            break
        newly = np.zeros(len(values), dtype=bool)
        newly[np.flatnonzero(free)[scaled >= 1.0]] = True
        p[newly] = 1.0
        capped |= newly
        budget = s - float(capped.sum())
    return SamplingPlan(probabilities=p, s_target=int(s), expected_size=float(p.sum()))


def bernoulli_select(plan: SamplingPlan, stream: rng.CounterStream,
                     lo: int = 0, hi: int = None) -> np.ndarray:
    """Absolute indices of selected rows in [lo, hi).

    The per-row uniform is a pure function of (stream key, absolute row
    index), so any chunking of the range yields the same selection.
    """
    hi = len(plan.probabilities) if hi is None else hi
    u = rng.uniform_at(stream.key, np.arange(lo, hi, dtype=np.uint64))
    return lo + np.flatnonzero(u < plan.probabilities[lo:hi])


def extract_rows(problem: QuantileProblem, idx: np.ndarray,
                 weights: np.ndarray) -> SampledProblem:
    A = problem.A
    if isinstance(A, SparseMatrix):
        sa = np.asarray(A.tocsr()[idx].todense()) * weights[:, None]
    else:
        sa = A[idx] * weights[:, None]
    sb = problem.b[idx] * weights
    return SampledProblem(
        row_indices=idx, weights=weights, SA=sa, Sb=sb, tau=problem.tau
    )


def draw_sample(plan: SamplingPlan, problem: QuantileProblem,
                stream: rng.CounterStream) -> SampledProblem:
    """Independent Bernoulli row draw; selected rows of (A, b) are scaled by
    1/p_i so the sampled loss is unbiased."""
    if len(plan.probabilities) != problem.n:
        raise InputError("plan length does not match the problem")
    idx = bernoulli_select(plan, stream)
    if len(idx) == 0:
        raise SamplingError("empty sample; retry with a fresh seed or larger s")
    weights = 1.0 / plan.probabilities[idx]
    sampled = extract_rows(problem, idx, weights)
    sv = np.linalg.svd(sampled.SA, compute_uv=False)
    if len(idx) < problem.d or sv[-1] < 1e-12 * max(sv[0], 1e-300):
        raise SamplingError("sampled design is rank-deficient; retry or raise s")
    return sampled


def verify_distortion(sampled: SampledProblem, problem: QuantileProblem,
                      test_points: int, gen: np.random.Generator,
                      xstar: np.ndarray = None) -> float:
    """Max relative deviation of the sampled loss over random directions of
    the augmented column space (and the exact solution, when provided)."""
    tau = problem.tau
    worst = 0.0
    b = problem.b
    directions = []
    for _ in range(test_points):
        y = gen.standard_normal(problem.d + 1)
        directions.append(y / np.linalg.norm(y))
    if xstar is not None:
        directions.append(np.concatenate([[1.0], np.asarray(xstar)]))
    sb = sampled.Sb / sampled.weights  # unweighted rows of b
    sa = sampled.SA / sampled.weights[:, None]
    for y in directions:
        # [b, -A] @ y evaluated on the full and the sampled rows
        full = rho(y[0] * b - matmul(problem.A, y[1:]), tau)
        part = rho(sampled.weights * (y[0] * sb - sa @ y[1:]), tau)
        if full > 0:
            worst = max(worst, abs(part - full) / full)
    return float(worst)
