"""Exception hierarchy shared across the package."""


class QrSampleError(Exception):
    """Base class for all package errors."""


class InputError(QrSampleError, ValueError):
    """Invalid argument values or malformed inputs."""


class ConditioningError(QrSampleError):
    """Conditioning failed (rank deficiency, rounding non-convergence).

    May carry the best factor found so far in ``best_r`` together with its
    certified distortion bound ``eta``.
    """

    def __init__(self, message, best_r=None, eta=None):
        super().__init__(message)
        self.best_r = best_r
        self.eta = eta


class SamplingError(QrSampleError):
    """Row sampling produced an unusable subproblem (empty or rank-deficient)."""


class SolverError(QrSampleError):
    """Exact solver failed in a way that cannot be reported as a status."""


class DataError(QrSampleError):
    """Corrupt or malformed on-disk data (bad magic, checksum, truncation)."""
