"""Randomized quantile regression by conditioned row sampling.

Condition the design to an l1 well-conditioned basis, sample rows by their
basis l1 norms, and solve the small weighted subproblem exactly with an
interior-point method.  Works in memory or out of core over chunk files with
bit-identical results.
"""

from ._kernels import COMPILED
from .conditioning import RFactor, condition, ellipsoid_round, estimate_kappa
from .core import (AugmentedProblem, QuantileProblem, SparseMatrix, augment,
                   objective, quantile_loss, rho)
from .data import (ChunkedDataset, GaussianSpec, SkewedSpec, generate_gaussian,
                   generate_skewed, replicate_stack, save_chunked)
from .exceptions import (ConditioningError, DataError, InputError,
                         QrSampleError, SamplingError, SolverError)
from .pipeline import (ExperimentConfig, PassPlan, pass_norms_then_sample,
                       pass_sketch, run_experiment, solve_chunked)
from .rng import CounterStream, derive_key
from .sampling import (draw_sample, estimate_row_norms, exact_row_norms,
                       sampling_probabilities, theoretical_sample_size,
                       verify_distortion)
from .sketch import apply_sct, build_sct, measure_distortion
from .solver import (Solution, SolverConfig, brute_force_small,
                     relative_errors, solve_exact, solve_randomized)

__version__ = "1.0.0"

__all__ = [
    "COMPILED",
    "RFactor", "condition", "ellipsoid_round", "estimate_kappa",
    "AugmentedProblem", "QuantileProblem", "SparseMatrix", "augment",
    "objective", "quantile_loss", "rho",
    "ChunkedDataset", "GaussianSpec", "SkewedSpec", "generate_gaussian",
    "generate_skewed", "replicate_stack", "save_chunked",
    "ConditioningError", "DataError", "InputError", "QrSampleError",
    "SamplingError", "SolverError",
    "ExperimentConfig", "PassPlan", "pass_norms_then_sample", "pass_sketch",
    "run_experiment", "solve_chunked",
    "CounterStream", "derive_key",
    "draw_sample", "estimate_row_norms", "exact_row_norms",
    "sampling_probabilities", "theoretical_sample_size", "verify_distortion",
    "apply_sct", "build_sct", "measure_distortion",
    "Solution", "SolverConfig", "brute_force_small", "relative_errors",
    "solve_exact", "solve_randomized",
    "__version__",
]
