"""Out-of-core execution of the randomized solve, plus the experiment
harness.

Pass structure over the chunk files: one pass for the conditioning sketch
(SPC2/SPC3 add a norm pass and a gather pass for their intermediate sample),
one pass for row norms, and one gather pass for the sampled rows; the small
weighted subproblem is solved in memory.  All per-row randomness is keyed on
absolute row indices and reductions run in ascending chunk order, so results
are bit-identical to the in-memory path and independent of the worker count.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import conditioning, rng, sampling, sketch, solver
from .core import QuantileProblem, SparseMatrix, augment_matrix, rho
from .data import ChunkedDataset
from .exceptions import ConditioningError, InputError, SamplingError

_KAPPA_MAX_ROWS = 20000


@dataclass(frozen=True)
class PassPlan:
    """Execution plan for streaming passes: chunks are always reduced in
    ascending index order; workers only parallelize per-chunk loading and
    assembly, never the reduction itself."""

    workers: int = 1


def _flip_chunk(a, b):
    if isinstance(a, SparseMatrix):
        a = SparseMatrix(a.n_rows, a.n_cols, a.rows, a.cols, -a.vals)
    else:
        a = -a
    return a, -b


def _chunk_blocks(dataset: ChunkedDataset, flip: bool, augmented: bool,
                  plan: PassPlan):
    """Yield (lo, hi, matrix_block) in ascending order."""

    def prepare(ref):
        a, b = dataset.load_chunk(ref)
        if flip:
            a, b = _flip_chunk(a, b)
        return augment_matrix(a, b) if augmented else a

    if plan.workers > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            for ref, block in zip(dataset.chunks, pool.map(prepare, dataset.chunks)):
                yield ref.row_lo, ref.row_hi, block
    else:
        for ref in dataset.chunks:
            yield ref.row_lo, ref.row_hi, prepare(ref)


def pass_sketch(dataset: ChunkedDataset, sct: sketch.SparseCauchyTransform,
                plan: PassPlan = PassPlan(), flip: bool = False,
                augmented: bool = False) -> np.ndarray:
    """Streaming sparse-Cauchy sketch; accumulation order is ascending input
    row regardless of chunking or workers, so the output is bit-identical to
    the in-memory product."""
    d = dataset.d + 1 if augmented else dataset.d
    out = np.zeros((sct.r1, d))
    for lo, hi, block in _chunk_blocks(dataset, flip, augmented, plan):
        sketch.apply_sct(sct, block, out=out, row_offset=lo)
    return out


def _pass_row_norms(dataset, R, mode: str, seed: int, plan: PassPlan,
                    flip: bool, augmented: bool) -> sampling.RowNormEstimates:
    """Streaming replica of sampling.exact_row_norms / estimate_row_norms.

    Each row norm only depends on that row of the basis, so any chunking
    yields the same per-row values as the in-memory pass.
    """
    n = dataset.n
    lam = np.empty(n)
    if mode == "exact":
        rinv = np.linalg.inv(R)
        for lo, hi, block in _chunk_blocks(dataset, flip, augmented, plan):
            csr = block.tocsr() if isinstance(block, SparseMatrix) else block
            lam[lo:hi] = np.abs(csr @ rinv).sum(axis=1)
        return sampling.RowNormEstimates(lam=lam, mode="exact", r2=0)
    key = rng.derive_key(seed, "rownorm")
    r2 = sampling.projection_width(n)
    d = R.shape[0]
    pi2 = rng.cauchy_at(key, np.arange(d * r2, dtype=np.uint64)).reshape(d, r2)
    t = np.linalg.solve(R, pi2)
    for lo, hi, block in _chunk_blocks(dataset, flip, augmented, plan):
        csr = block.tocsr() if isinstance(block, SparseMatrix) else block
        lam[lo:hi] = np.median(np.abs(csr @ t), axis=1)
    return sampling.RowNormEstimates(lam=lam, mode="estimated", r2=r2)


def _pass_gather(dataset, idx: np.ndarray, plan: PassPlan, flip: bool,
                 augmented: bool) -> np.ndarray:
    """Dense rows of the (possibly flipped/augmented) matrix at sorted
    absolute indices."""
    d = dataset.d + 1 if augmented else dataset.d
    out = np.empty((len(idx), d))
    for lo, hi, block in _chunk_blocks(dataset, flip, augmented, plan):
        sel = idx[(idx >= lo) & (idx < hi)] - lo
        if not len(sel):
            continue
        if isinstance(block, SparseMatrix):
            rows = np.asarray(block.tocsr()[sel].todense())
        else:
            rows = block[sel]
        out[np.searchsorted(idx, sel + lo)] = rows
    return out


def _pass_gather_b(dataset, idx: np.ndarray, flip: bool) -> np.ndarray:
    out = np.empty(len(idx))
    for ref in dataset.chunks:
        sel = idx[(idx >= ref.row_lo) & (idx < ref.row_hi)]
        if not len(sel):
            continue
        _, b = dataset.load_chunk(ref)
        if flip:
            b = -b
        out[np.searchsorted(idx, sel)] = b[sel - ref.row_lo]
    return out


def _full_rank(sa: np.ndarray, d: int) -> bool:
    if sa.shape[0] < d:
        return False
    sv = np.linalg.svd(sa, compute_uv=False)
    return sv[-1] >= 1e-12 * max(sv[0], 1e-300)


def _condition_streaming(method: str, dataset, seed: int, plan: PassPlan,
                         flip: bool) -> conditioning.RFactor:
    """Chunked replica of conditioning.condition on the augmented matrix."""
    method = method.upper()
    if method not in conditioning.METHODS and method != "UNIF":
        raise InputError(f"unknown conditioning method {method!r}")
    d = dataset.d + 1
    n = dataset.n
    report = {}
    t0 = time.perf_counter()
    if method in ("NOCO", "UNIF"):
        R = np.eye(d)
        method = "NOCO"
    elif method == "SC":
        raise InputError("the dense Cauchy conditioner is in-memory only")
    else:
        r1 = sketch.default_embedding_rows(d)
        sct = sketch.build_sct(n, r1, rng.CounterStream.from_seed(seed, "sct"))
        B = pass_sketch(dataset, sct, plan, flip=flip, augmented=True)
        report["sketch_rows"] = r1
        conditioning._check_sketch_rank(B)
        r_tilde = conditioning.qr_r_factor(B)
        if method == "SPC1":
            R = r_tilde
        else:
            lam = _pass_row_norms(dataset, r_tilde, "exact", seed, plan, flip, True)
            s_tilde = min(n, max(20 * d * d, 2000))
            cplan = sampling.sampling_probabilities(lam, s_tilde)
            sa = None
            for attempt in range(2):
                stream = rng.CounterStream.from_seed(seed, "cond-sample", attempt)
                idx = sampling.bernoulli_select(cplan, stream)
                if len(idx) < d:
                    continue
                weights = 1.0 / cplan.probabilities[idx]
                cand = _pass_gather(dataset, idx, plan, flip, True) * weights[:, None]
                if _full_rank(cand, d):
                    sa = cand
                    break
            if sa is None:
                raise ConditioningError("intermediate row sample lost rank twice")
            report["intermediate_rows"] = sa.shape[0]
            if method == "SPC2":
                R, info = conditioning.ellipsoid_round(sa)
                report["rounding"] = info
            else:  # SPC3
                R = conditioning.qr_r_factor(sa)
    report["seconds"] = time.perf_counter() - t0
    return conditioning.RFactor(R=R, method=method, report=report)


def _draw_chunked(dataset, splan: sampling.SamplingPlan, seed: int,
                  plan: PassPlan, flip: bool, tau: float):
    """Bernoulli draw plus gather pass, with one rank-failure retry; mirrors
    the retry loop around sampling.draw_sample."""
    retries = 0
    for attempt in range(2):
        stream = rng.CounterStream.from_seed(seed, "draw", attempt)
        idx = sampling.bernoulli_select(splan, stream)
        if len(idx):
            weights = 1.0 / splan.probabilities[idx]
            sa = _pass_gather(dataset, idx, plan, flip, False) * weights[:, None]
            if _full_rank(sa, dataset.d):
                sb = _pass_gather_b(dataset, idx, flip) * weights
                return sampling.SampledProblem(
                    row_indices=idx, weights=weights, SA=sa, Sb=sb, tau=tau
                ), retries
        retries += 1
    raise SamplingError("empty or rank-deficient sample after one retry")


def pass_norms_then_sample(dataset: ChunkedDataset, R: np.ndarray, s: int,
                           seed: int, mode: str = "exact",
                           plan: PassPlan = PassPlan(), flip: bool = False,
                           augmented: bool = True, tau: float = 0.5):
    """Norm pass then Bernoulli draw; identical selection and weights to the
    in-memory draw with the same master seed."""
    lam = _pass_row_norms(dataset, R, mode, seed, plan, flip, augmented)
    splan = sampling.sampling_probabilities(lam, s)
    sampled, retries = _draw_chunked(dataset, splan, seed, plan, flip, tau)
    return sampled, splan, retries


def _kappa_chunked(dataset, R, seed: int, plan: PassPlan, flip: bool):
    """Chunked replica of the kappa diagnostic with its row-sampled
    surrogate."""
    n = dataset.n
    if n > _KAPPA_MAX_ROWS:
        gen = np.random.default_rng(rng.derive_key(seed, "kappa-rows"))
        idx = np.sort(gen.choice(n, size=_KAPPA_MAX_ROWS, replace=False))
        u = _pass_gather(dataset, idx, plan, flip, True)
        u = (n / _KAPPA_MAX_ROWS) * (u @ np.linalg.inv(R))
    else:
        u = _pass_gather(dataset, np.arange(n, dtype=np.int64), plan, flip, True)
        u = u @ np.linalg.inv(R)
    return conditioning.kappa_from_basis(u)


def solve_chunked(dataset: ChunkedDataset, tau: float, method: str, seed: int,
                  s: int = None, eps: float = None, mode: str = "exact",
                  plan: PassPlan = PassPlan(),
                  cfg: solver.SolverConfig = solver.SolverConfig()):
    """Chunked end-to-end randomized solve; mirrors solver.solve_randomized
    stage by stage and draws bit-identical samples and solutions.

    Returns (solution, report, sampled).
    """
    if s is None and eps is None:
        raise InputError("either a sample size or a tolerance must be given")
    if not (0.0 < tau < 1.0):
        raise InputError(f"tau must lie in (0, 1), got {tau}")
    if s is not None and s < dataset.d:
        raise InputError(f"sample size must be >= d = {dataset.d}")
    flip = tau < 0.5
    work_tau = tau if not flip else 1.0 - tau
    report = solver.RandomizedReport(method=method.upper())

    t0 = time.perf_counter()
    rfac = _condition_streaming(method, dataset, seed, plan, flip)
    report.timings["condition"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if method.upper() == "UNIF":
        lam = sampling.RowNormEstimates(lam=np.ones(dataset.n), mode="exact", r2=0)
    else:
        lam = _pass_row_norms(dataset, rfac.R, mode, seed, plan, flip, True)
    report.timings["estimate"] = time.perf_counter() - t0

    if s is None:
        t0 = time.perf_counter()
        _, _, kappa = _kappa_chunked(dataset, rfac.R, seed, plan, flip)
        report.kappa = kappa
        s = sampling.theoretical_sample_size(work_tau, kappa, dataset.d, eps)
        report.timings["kappa"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    splan = sampling.sampling_probabilities(lam, s)
    report.expected_sample_size = splan.expected_size
    sampled, report.retries = _draw_chunked(
        dataset, splan, seed, plan, flip, work_tau
    )
    report.sample_size = len(sampled.row_indices)
    report.timings["sample"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sub = QuantileProblem(sampled.SA, sampled.Sb, work_tau)
    sol = solver.solve_exact(sub, cfg)
    report.timings["solve"] = time.perf_counter() - t0

    # Full objective at the original tau via one more streaming pass.
    f = 0.0
    for _, _, a, b in dataset.iter_chunks():
        csr = a.tocsr() if isinstance(a, SparseMatrix) else a
        f += rho(b - csr @ sol.x, tau)
    return (
        solver.Solution(sol.x, f, sol.status, sol.iterations, sol.duality_gap),
        report,
        sampled,
    )


# ---------------------------------------------------------------------------
# Experiment harness
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    dataset: str
    methods: list = field(default_factory=lambda: ["SPC3"])
    taus: list = field(default_factory=lambda: [0.5])
    sizes: list = field(default_factory=list)
    trials: int = 50
    seed: int = 0
    norm_mode: str = "exact"
    output: str = "results.csv"

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        """Plain-text key=value config; repeated method/tau/s keys build
        lists."""
        kv = {"method": [], "tau": [], "s": []}
        scalars = {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                key, value = key.strip(), value.strip()
                if key in kv:
                    kv[key].append(value)
                else:
                    scalars[key] = value
        if "dataset" not in scalars:
            raise InputError("config must name a dataset")
        try:
            return cls(
                dataset=scalars["dataset"],
                methods=[m.upper() for m in kv["method"]] or ["SPC3"],
                taus=[float(t) for t in kv["tau"]] or [0.5],
                sizes=[int(s) for s in kv["s"]],
                trials=int(scalars.get("trials", 50)),
                seed=int(scalars.get("seed", 0)),
                norm_mode=scalars.get("norms", "exact"),
                output=scalars.get("output", "results.csv"),
            )
        except ValueError as exc:
            raise InputError(f"bad config value: {exc}")


_METRICS = ("relobj", "l1", "l2", "linf")

CSV_FIELDS = ["method", "tau", "s", "metric", "q1", "median", "q3",
              "trials", "failures"]


def run_experiment(config: ExperimentConfig, reference: dict = None) -> list:
    """Per (method, tau, s): independent randomized solves and quartiles of
    the four relative errors against the exact solution.  Returns the CSV
    rows (list of dicts) and writes them to the configured output path.

    ``reference`` optionally maps tau -> (xstar, fstar) when the optimum is
    already known, skipping the exact reference solve.
    """
    manifest = (os.path.join(config.dataset, "manifest.txt")
                if os.path.isdir(config.dataset) else config.dataset)
    ds = ChunkedDataset(manifest)
    A, b = ds.load_all()
    refs = {}
    for tau in config.taus:
        if reference and tau in reference:
            refs[tau] = reference[tau]
        else:
            ref = solver.solve_exact(QuantileProblem(A, b, tau))
            refs[tau] = (ref.x, ref.objective)

    rows = []
    for method in config.methods:
        for tau in config.taus:
            xstar, fstar = refs[tau]
            sizes = [ds.n] if method == "EXACT" else config.sizes
            for s in sizes:
                per_metric = {m: [] for m in _METRICS}
                failures = 0
                for trial in range(config.trials):
                    if method == "EXACT":
                        err = solver.relative_errors(xstar, xstar, fstar, fstar)
                    else:
                        trial_seed = rng.derive_key(
                            config.seed, method, f"{tau:.6g}", s, trial
                        )
                        try:
                            sol, _ = solver.solve_randomized(
                                QuantileProblem(A, b, tau), method,
                                seed=trial_seed, s=s,
                                exact_norms=config.norm_mode == "exact",
                            )
                        except (SamplingError, ConditioningError):
                            failures += 1
                            continue
                        err = solver.relative_errors(
                            sol.x, xstar, sol.objective, fstar
                        )
                    for m, v in zip(_METRICS, err[:4]):
                        per_metric[m].append(v)
                for m in _METRICS:
                    vals = per_metric[m]
                    if vals:
                        q1, med, q3 = np.percentile(vals, [25, 50, 75])
                    else:
                        q1 = med = q3 = float("nan")
                    rows.append({
                        "method": method, "tau": f"{tau:.6g}", "s": s,
                        "metric": m, "q1": f"{q1:.12g}",
                        "median": f"{med:.12g}", "q3": f"{q3:.12g}",
                        "trials": config.trials, "failures": failures,
                    })
    write_results(config.output, rows)
    return rows


def write_results(path: str, rows: list):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
