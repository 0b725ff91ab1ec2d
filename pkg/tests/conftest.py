import numpy as np
import pytest

import qrsample as q


@pytest.fixture(scope="session")
def small_skewed():
    """Skewed 2000 x 4 problem with its exact tau = 0.75 reference."""
    A, b, xstar = q.generate_skewed(q.SkewedSpec(n=3000, d=4, seed=7))
    problem = q.QuantileProblem(A, b, 0.75)
    ref = q.solve_exact(problem)
    assert ref.status == "optimal"
    return problem, ref, xstar


@pytest.fixture(scope="session")
def small_gaussian():
    A, b, xstar = q.generate_gaussian(q.GaussianSpec(n=1500, d=5, seed=3))
    return q.QuantileProblem(A, b, 0.5), xstar


@pytest.fixture()
def gen():
    return np.random.default_rng(0)
