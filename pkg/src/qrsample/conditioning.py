"""Factors R making A R^{-1} an l1 well-conditioned basis.

Five routes: QR of a sparse-Cauchy sketch (SPC1), the same followed by a
constant-distortion row sample and either rounding (SPC2) or a second QR
(SPC3), QR of a dense Cauchy sketch (SC), and the identity (NOCO).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import rng, sampling, sketch
from .core import SparseMatrix
from .exceptions import ConditioningError, InputError

METHODS = ("NOCO", "SC", "SPC1", "SPC2", "SPC3")


@dataclass(frozen=True)
class RFactor:
    R: np.ndarray
    method: str
    report: dict = field(default_factory=dict)


def qr_r_factor(M: np.ndarray) -> np.ndarray:
    """Upper-triangular R with positive diagonal from the thin QR of M.

    The sign convention makes the factor deterministic across runs and
    LAPACK builds.
    """
    M = np.asarray(M, dtype=np.float64)
    _, R = np.linalg.qr(M)
    diag = np.diag(R)
    bad = int(np.sum(np.abs(diag) < 1e-10 * max(np.abs(diag).max(), 1e-300)))
    if bad:
        raise ConditioningError(
            f"rank deficiency: {bad} of {M.shape[1]} columns are dependent"
        )
    signs = np.sign(diag)
    return signs[:, None] * R


def ellipsoid_round(M: np.ndarray, tol: float = 0.02, max_iter: int = 200):
    """R such that |x|_2 <= |M R^{-1} x|_1 <= eta |x|_2 with eta <= 2d.

    Computed by the l1 Lewis-weight fixed point w_i <- sqrt(m_i^T (M^T W^{-1}
    M)^{-1} m_i), which converges geometrically; at tolerance ``tol`` the
    certified bound is eta = (1 + tol) d / (1 - tol).  Returns (R, info) with
    the iteration count and final tolerance in ``info``.
    """
    M = np.asarray(M, dtype=np.float64)
    s, d = M.shape
    if s < d:
        raise InputError("rounding needs at least d rows")
    w = np.linalg.norm(M, axis=1)
    nonzero = w > 0
    if not nonzero.any():
        raise ConditioningError("zero matrix cannot be rounded")
    floor = 1e-300
    w = np.maximum(w, floor)

    theta = np.inf
    R = None
    for it in range(1, max_iter + 1):
        G = (M / w[:, None]).T @ M
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise ConditioningError(
                "rank deficiency during rounding (singular weighted Gram matrix)"
            )
        # l_i = sqrt(m_i^T G^{-1} m_i) = row 2-norm of M R^{-1}
        half = np.linalg.solve(L, M.T)
        ell = np.linalg.norm(half, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(nonzero, ell / w, 1.0)
        theta = float(np.abs(ratio - 1.0).max())
        w = np.maximum(ell, floor)
        if theta <= tol:
            G = (M / w[:, None]).T @ M
            R = np.linalg.cholesky(G).T
            break
    if R is None:
        G = (M / w[:, None]).T @ M
        best = np.linalg.cholesky(G).T / (1.0 + theta)
        raise ConditioningError(
            f"rounding did not reach tol {tol} in {max_iter} iterations "
            f"(best {theta:.3g})",
            best_r=best,
            eta=(1.0 + theta) * d / max(1.0 - theta, 1e-6),
        )
    # Rescale so the certified lower bound is exactly 1.
    R = R / (1.0 + theta)
    info = {"iterations": it, "theta": theta, "eta": (1.0 + theta) * d / (1.0 - theta)}
    return R, info


def certify_rounding(M, R, directions: int, gen: np.random.Generator):
    """Sampled (min, max) of |M R^{-1} x|_1 / |x|_2 over random unit x."""
    M = np.asarray(M, dtype=np.float64)
    d = R.shape[0]
    x = gen.standard_normal((d, directions))
    x /= np.linalg.norm(x, axis=0)
    u = M @ np.linalg.solve(R, x)
    ratios = np.abs(u).sum(axis=0)
    return float(ratios.min()), float(ratios.max())


def _constant_distortion_sample(A, r_tilde, seed: int):
    """(1 +/- 1/2)-distortion weighted row sample of A, using exact row norms
    of the intermediate basis A r_tilde^{-1}."""
    n, d = A.shape
    lam = sampling.exact_row_norms(A, r_tilde)
    s_tilde = min(n, max(20 * d * d, 2000))
    plan = sampling.sampling_probabilities(lam, s_tilde)
    for attempt in range(2):
        stream = rng.CounterStream.from_seed(seed, "cond-sample", attempt)
        idx = sampling.bernoulli_select(plan, stream)
        if len(idx) < d:
            continue
        weights = 1.0 / plan.probabilities[idx]
        if isinstance(A, SparseMatrix):
            sa = np.asarray(A.tocsr()[idx].todense()) * weights[:, None]
        else:
            sa = A[idx] * weights[:, None]
        sv = np.linalg.svd(sa, compute_uv=False)
        if sv[-1] >= 1e-12 * max(sv[0], 1e-300):
            return sa
    raise ConditioningError("intermediate row sample lost rank twice")


def condition(method: str, A, seed: int, r1: int = None) -> RFactor:
    """Compute an RFactor for A with the requested method.

    SPC1: sketch -> QR.  SPC2: sketch -> QR -> row sample -> rounding.
    SPC3: sketch -> QR -> row sample -> QR.  SC: dense Cauchy sketch -> QR.
    NOCO: identity.
    """
    method = method.upper()
    if method not in METHODS:
        raise InputError(f"unknown conditioning method {method!r}")
    n, d = A.shape
    report = {}
    t0 = time.perf_counter()

    if method == "NOCO":
        R = np.eye(d)
    elif method == "SC":
        r = sketch.default_dense_rows(d)
        t = sketch.build_dense_cauchy(n, r, rng.CounterStream.from_seed(seed, "sc"))
        B = sketch.apply_dense_cauchy(t, A)
        report["sketch_rows"] = r
        R = qr_r_factor(B)
    else:
        r1 = r1 or sketch.default_embedding_rows(d)
        sct = sketch.build_sct(n, r1, rng.CounterStream.from_seed(seed, "sct"))
        B = sketch.apply_sct(sct, A)
        report["sketch_rows"] = r1
        _check_sketch_rank(B)
        r_tilde = qr_r_factor(B)
        if method == "SPC1":
            R = r_tilde
        else:
            sa = _constant_distortion_sample(A, r_tilde, seed)
            report["intermediate_rows"] = sa.shape[0]
            if method == "SPC2":
                R, info = ellipsoid_round(sa)
                report["rounding"] = info
            else:  # SPC3
                R = qr_r_factor(sa)

    report["seconds"] = time.perf_counter() - t0
    return RFactor(R=R, method=method, report=report)


def _check_sketch_rank(B: np.ndarray):
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[-1] < 1e-10 * max(sv[0], 1e-300):
        raise ConditioningError(
            "sketch is numerically rank-deficient; input may lack full column rank"
        )


def estimate_kappa(A, R, max_rows: int = None, seed: int = 0):
    """(alpha, beta, kappa) for the basis U = A R^{-1}.

    alpha is the elementwise l1 norm of U; beta maximizes 1 / min{|U x|_1 :
    x_j = 1} over coordinates j, each inner problem solved exactly via the
    tau = 1/2 solver.  When n exceeds ``max_rows`` a uniformly row-sampled
    surrogate (scaled by n/m) is used and the result is an estimate.
    """
    from .core import QuantileProblem
    from .solver import solve_exact

    n, d = A.shape
    u = None
    if max_rows is not None and n > max_rows:
        gen = np.random.default_rng(rng.derive_key(seed, "kappa-rows"))
        idx = np.sort(gen.choice(n, size=max_rows, replace=False))
        if isinstance(A, SparseMatrix):
            u = np.asarray(A.tocsr()[idx].todense())
        else:
            u = A[idx]
        u = (n / max_rows) * (u @ np.linalg.inv(R))
    else:
        if isinstance(A, SparseMatrix):
            u = A.tocsr() @ np.linalg.inv(R)
            u = np.asarray(u)
        else:
            u = np.asarray(A, dtype=np.float64) @ np.linalg.inv(R)

    return kappa_from_basis(u)


def kappa_from_basis(u: np.ndarray):
    """(alpha, beta, kappa) for an explicit dense basis matrix u."""
    from .core import QuantileProblem
    from .solver import solve_exact

    d = u.shape[1]
    alpha = float(np.abs(u).sum())
    beta = 0.0
    for j in range(d):
        c = u[:, j]
        rest = np.delete(u, j, axis=1)
        if rest.shape[1] == 0:
            min_norm = float(np.abs(c).sum())
        else:
            sol = solve_exact(QuantileProblem(rest, -c, 0.5))
            if sol.status == "infeasible_input":
                raise ConditioningError(f"kappa diagnostic failed on coordinate {j}")
            min_norm = 2.0 * sol.objective
        if min_norm <= 0:
            raise ConditioningError(f"basis is degenerate along coordinate {j}")
        beta = max(beta, 1.0 / min_norm)
    return alpha, beta, alpha * beta
