"""Exact quantile-regression solver, a brute-force oracle for small
instances, and the end-to-end randomized driver."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from . import rng
from .core import QuantileProblem, SparseMatrix, augment, matmul, objective, rho
from .exceptions import InputError, SamplingError

_STATUS_OPTIMAL = "optimal"
_STATUS_MAX_ITER = "max_iter"
_STATUS_INFEASIBLE = "infeasible_input"


@dataclass(frozen=True)
class Solution:
    x: np.ndarray
    objective: float
    status: str
    iterations: int
    duality_gap: float


@dataclass
class RandomizedReport:
    method: str
    sample_size: int = 0
    expected_sample_size: float = 0.0
    kappa: float = float("nan")
    timings: dict = field(default_factory=dict)
    distortion: float = float("nan")
    retries: int = 0


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-9
    max_iter: int = 100
    step_fraction: float = 0.9995


def _normal_matrix(A, dvec):
    """A.T @ diag(dvec) @ A as a dense d x d array."""
    if sp.issparse(A):
        return np.asarray((A.T.multiply(dvec) @ A).todense())
    return (A * dvec[:, None]).T @ A


def solve_exact(problem: QuantileProblem, cfg: SolverConfig = SolverConfig()) -> Solution:
    """Primal-dual path following with a Mehrotra corrector on the bounded
    dual max{b.a : A.a = (1-tau) A.1, a in [0,1]^n}.

    Each Newton step only factors the d x d weighted normal matrix, so the
    cost per iteration is O(nnz(A) + d^3).
    """
    A = problem.A.tocsr() if isinstance(problem.A, SparseMatrix) else np.asarray(
        problem.A, dtype=np.float64
    )
    b = problem.b
    tau = problem.tau
    n, d = A.shape

    # Rank check on the normal matrix; degenerate columns make the Newton
    # systems singular from the start.
    gram = _normal_matrix(A, np.ones(n))
    sv = np.linalg.svd(gram, compute_uv=False)
    if sv[-1] < 1e-12 * max(sv[0], 1e-300):
        return Solution(np.zeros(d), float("nan"), _STATUS_INFEASIBLE, 0, float("inf"))

    ones = np.ones(n)
    c_d = (1.0 - tau) * (A.T @ ones)

    # Starting point: dual at the analytic center of the box constraint
    # (feasible by construction), primal from least squares.
    x = np.linalg.lstsq(gram, A.T @ b, rcond=None)[0]
    r = b - A @ x
    delta = 0.1 * (1.0 + np.abs(r).mean())
    z = np.maximum(r, 0.0) + delta
    w = z - r
    a = np.full(n, 1.0 - tau)
    s = np.full(n, tau)

    frac = cfg.step_fraction
    status = _STATUS_MAX_ITER
    it = 0
    gap = z @ s + w @ a
    for it in range(1, cfg.max_iter + 1):
        f = rho(b - A @ x, tau)
        gap = z @ s + w @ a
        rd = c_d - A.T @ a
        rp = b - A @ x - z + w
        rel_gap = gap / (1.0 + abs(f))
        if rel_gap <= cfg.tol and np.abs(rp).max() <= cfg.tol * (
            1.0 + np.abs(b).max()
        ):
            status = _STATUS_OPTIMAL
            break

        zs = z / s
        wa = w / a
        dvec = 1.0 / (zs + wa)
        M = _normal_matrix(A, dvec)
        try:
            L = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            M = M + (1e-12 * np.trace(M) / d) * np.eye(d)
            L = np.linalg.cholesky(M)

        def newton(rc1, rc2):
            g = rc1 / s - rc2 / a
            rhs = A.T @ (dvec * (rp - g)) - rd
            dx = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
            da = dvec * (rp - A @ dx - g)
            ds = -da
            dz = rc1 / s + zs * da
            dw = rc2 / a - wa * da
            return dx, da, ds, dz, dw

        def step_lengths(da, ds, dz, dw):
            def ratio(v, dv):
                neg = dv < 0
                if not neg.any():
                    return 1.0
                return min(1.0, float((-v[neg] / dv[neg]).min()))

            alpha_d = min(ratio(a, da), ratio(s, ds))
            alpha_p = min(ratio(z, dz), ratio(w, dw))
            return alpha_p, alpha_d

        # Affine (predictor) direction.
        dx, da, ds, dz, dw = newton(-s * z, -a * w)
        ap, ad = step_lengths(da, ds, dz, dw)
        gap_aff = (z + ap * dz) @ (s + ad * ds) + (w + ap * dw) @ (a + ad * da)
        mu = gap / (2.0 * n)
        sigma = min(1.0, (max(gap_aff, 0.0) / gap) ** 3) if gap > 0 else 0.0

        # Corrector.
        rc1 = sigma * mu - s * z - ds * dz
        rc2 = sigma * mu - a * w - da * dw
        dx, da, ds, dz, dw = newton(rc1, rc2)
        ap, ad = step_lengths(da, ds, dz, dw)
        ap = min(1.0, frac * ap)
        ad = min(1.0, frac * ad)

        x = x + ap * dx
        z = z + ap * dz
        w = w + ap * dw
        a = a + ad * da
        s = s + ad * ds

    f = rho(b - A @ x, tau)
    return Solution(x, f, status, it, gap / (1.0 + abs(f)))


def brute_force_small(problem: QuantileProblem) -> Solution:
    """Exhaustive oracle: optima occur at interpolation points of d rows.

    Only for tiny instances (n <= 14, d <= 3); this is the independent check
    for the interior-point solver.
    """
    n, d = problem.n, problem.d
    if n > 14 or d > 3:
        raise InputError("brute force limited to n <= 14, d <= 3")
    A = np.asarray(
        problem.A.toarray() if isinstance(problem.A, SparseMatrix) else problem.A,
        dtype=np.float64,
    )
    b = problem.b
    best_x, best_f = None, np.inf
    for subset in combinations(range(n), d):
        sub = A[list(subset)]
        if abs(np.linalg.det(sub)) < 1e-12 * max(1.0, np.abs(sub).max() ** d):
            continue
        x = np.linalg.solve(sub, b[list(subset)])
        f = rho(b - A @ x, problem.tau)
        if f < best_f:
            best_f, best_x = f, x
    if best_x is None:
        return Solution(np.zeros(d), float("nan"), _STATUS_INFEASIBLE, 0, float("inf"))
    return Solution(best_x, best_f, _STATUS_OPTIMAL, 0, 0.0)


class ErrorReport(NamedTuple):
    objective: float
    l1: float
    l2: float
    linf: float
    absolute: bool  # True when fstar == 0 and the objective error is absolute


def relative_errors(xhat, xstar, fhat: float, fstar: float) -> ErrorReport:
    """Objective and l1/l2/linf solution errors relative to the reference."""
    xhat = np.asarray(xhat, dtype=np.float64)
    xstar = np.asarray(xstar, dtype=np.float64)
    absolute = not fstar > 0
    obj_err = abs(fhat - fstar) if absolute else abs(fhat - fstar) / abs(fstar)

    def vec_err(p):
        denom = np.linalg.norm(xstar, p)
        diff = np.linalg.norm(xhat - xstar, p)
        return float(diff / denom if denom > 0 else diff)

    return ErrorReport(float(obj_err), vec_err(1), vec_err(2), vec_err(np.inf), absolute)


def solve_randomized(
    problem: QuantileProblem,
    method: str,
    seed: int,
    s: int = None,
    eps: float = None,
    exact_norms: bool = True,
    cfg: SolverConfig = SolverConfig(),
    measure_distortion_points: int = 0,
):
    """Condition, sample, and solve the small weighted subproblem exactly.

    The conditioner and the row-norm sampling operate on the augmented matrix
    [b, -A], so rows with outlying responses are picked up by the sampling
    probabilities.  ``method`` is one of SC, SPC1, SPC2, SPC3, NOCO, UNIF.
    With the theoretical sample size the returned objective is within a factor
    (1+eps)/(1-eps) of optimal with probability at least 0.8.
    """
    from . import conditioning, sampling

    if s is None and eps is None:
        raise InputError("either a sample size or a tolerance must be given")
    if s is not None and s < problem.d:
        raise InputError(f"sample size must be >= d = {problem.d}")

    work = problem if problem.tau >= 0.5 else problem.flipped()
    report = RandomizedReport(method=method.upper())
    aug = augment(work).Aaug

    t0 = time.perf_counter()
    if method.upper() == "UNIF":
        rfac = conditioning.condition("NOCO", aug, seed=seed)
    else:
        rfac = conditioning.condition(method, aug, seed=seed)
    report.timings["condition"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if method.upper() == "UNIF":
        lam = sampling.RowNormEstimates(
            lam=np.ones(work.n), mode="exact", r2=0
        )
    elif exact_norms:
        lam = sampling.exact_row_norms(aug, rfac.R)
    else:
        lam = sampling.estimate_row_norms(
            aug, rfac.R, rng.CounterStream.from_seed(seed, "rownorm")
        )
    report.timings["estimate"] = time.perf_counter() - t0

    if s is None:
        t0 = time.perf_counter()
        _, _, kappa = conditioning.estimate_kappa(aug, rfac.R, max_rows=20000, seed=seed)
        report.kappa = kappa
        s = sampling.theoretical_sample_size(work.tau, kappa, work.d, eps)
        report.timings["kappa"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    plan = sampling.sampling_probabilities(lam, s)
    report.expected_sample_size = plan.expected_size
    sampled = None
    for attempt in range(2):
        try:
            sampled = sampling.draw_sample(
                plan, work, rng.CounterStream.from_seed(seed, "draw", attempt)
            )
            break
        except SamplingError:
            report.retries += 1
            if attempt == 1:
                raise
    report.sample_size = len(sampled.row_indices)
    report.timings["sample"] = time.perf_counter() - t0

    if measure_distortion_points:
        gen = np.random.default_rng(rng.derive_key(seed, "distortion-cert"))
        report.distortion = sampling.verify_distortion(
            sampled, work, measure_distortion_points, gen
        )

    t0 = time.perf_counter()
    sub = QuantileProblem(sampled.SA, sampled.Sb, work.tau)
    sol = solve_exact(sub, cfg)
    report.timings["solve"] = time.perf_counter() - t0

    # Map back through the tau < 1/2 flip (solution vector is unchanged);
    # recompute the objective on the full problem.
    f_full = objective(problem, sol.x)
    return (
        Solution(sol.x, f_full, sol.status, sol.iterations, sol.duality_gap),
        report,
    )


def subgradient_infeasibility(problem: QuantileProblem, x, zero_tol: float = 1e-9) -> float:
    """Best achievable infinity-norm of A.T w over valid subgradient weights.

    Weights are fixed at -tau (positive residual) or 1-tau (negative
    residual) and free in [-tau, 1-tau] on ties; the minimization over the
    free components is a small LP solved with scipy.  At an optimum the value
    can be driven to ~0.
    """
    from scipy.optimize import linprog

    A = problem.A.toarray() if isinstance(problem.A, SparseMatrix) else np.asarray(
        problem.A, dtype=np.float64
    )
    r = problem.b - A @ np.asarray(x, dtype=np.float64)
    tau = problem.tau
    fixed_w = np.where(r > zero_tol, -tau, np.where(r < -zero_tol, 1.0 - tau, 0.0))
    free = np.abs(r) <= zero_tol
    g0 = A.T @ fixed_w
    d = problem.d
    m = int(free.sum())
    if m == 0:
        return float(np.abs(g0).max())
    # minimize t  s.t.  -t <= g0 + Af.T wf <= t,  wf in [-tau, 1-tau]
    Af = A[free]
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A_ub = np.vstack(
        [
            np.hstack([Af.T, -np.ones((d, 1))]),
            np.hstack([-Af.T, -np.ones((d, 1))]),
        ]
    )
    b_ub = np.concatenate([-g0, g0])
    bounds = [(-tau, 1.0 - tau)] * m + [(0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        return float(np.abs(g0).max())
    return float(res.x[-1])
