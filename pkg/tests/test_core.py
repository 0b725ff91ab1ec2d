"""Matrix containers, the quantile loss and its axioms, augmentation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qrsample import InputError, QuantileProblem, SparseMatrix, core

TAUS = (0.5, 0.75, 0.95)

vectors = arrays(
    np.float64, st.integers(1, 12),
    elements=st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False),
)


# ---------------------------------------------------------------------------
# Quantile loss
# ---------------------------------------------------------------------------

def test_loss_trivial_values():
    assert core.quantile_loss(2.0, 0.75) == pytest.approx(1.5)
    assert core.quantile_loss(-2.0, 0.75) == pytest.approx(0.5)
    assert core.quantile_loss(0.0, 0.3) == 0.0
    # tau = 1/2 gives half the absolute value
    assert core.quantile_loss(-3.0, 0.5) == pytest.approx(1.5)
    assert core.rho(np.array([1.0, -1.0]), 0.5) == pytest.approx(1.0)


def test_loss_rejects_bad_inputs():
    with pytest.raises(InputError):
        core.quantile_loss(1.0, 0.0)
    with pytest.raises(InputError):
        core.quantile_loss(np.inf, 0.5)
    with pytest.raises(InputError):
        core.rho(np.array([np.nan]), 0.5)


@settings(max_examples=200, deadline=None)
@given(x=vectors, y=vectors, tau=st.sampled_from(TAUS))
def test_loss_subadditive(x, y, tau):
    if len(x) != len(y):
        y = np.resize(y, len(x))
    lhs = core.rho(x + y, tau)
    rhs = core.rho(x, tau) + core.rho(y, tau)
    assert lhs <= rhs + 1e-12 * (1.0 + abs(rhs))


@settings(max_examples=200, deadline=None)
@given(x=vectors, tau=st.sampled_from(TAUS))
def test_loss_l1_sandwich(x, tau):
    l1 = np.abs(x).sum()
    r = core.rho(x, tau)
    tol = 1e-12 * (1.0 + l1)
    assert (1.0 - tau) * l1 - tol <= r <= tau * l1 + tol


@settings(max_examples=200, deadline=None)
@given(x=vectors, a=st.floats(0, 1e3), tau=st.sampled_from(TAUS))
def test_loss_positive_homogeneous(x, a, tau):
    lhs = core.rho(a * x, tau)
    rhs = a * core.rho(x, tau)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(x=vectors, y=vectors, tau=st.sampled_from(TAUS))
def test_loss_lipschitz(x, y, tau):
    if len(x) != len(y):
        y = np.resize(y, len(x))
    gap = abs(core.rho(x, tau) - core.rho(y, tau))
    bound = tau * np.abs(x - y).sum()
    assert gap <= bound + 1e-12 * (1.0 + bound)


# ---------------------------------------------------------------------------
# SparseMatrix
# ---------------------------------------------------------------------------

def _tiny_sparse():
    return SparseMatrix(
        3, 2,
        np.array([0, 1, 2]), np.array([0, 1, 0]), np.array([1.0, -2.0, 3.0]),
    )


def test_sparse_roundtrip():
    m = _tiny_sparse()
    dense = np.array([[1.0, 0.0], [0.0, -2.0], [3.0, 0.0]])
    assert np.array_equal(m.toarray(), dense)
    assert np.array_equal(m.tocsr().toarray(), dense)
    again = SparseMatrix.from_csr(m.tocsr())
    assert np.array_equal(again.toarray(), dense)
    assert m.nnz == 3 and m.shape == (3, 2)


def test_sparse_row_slice():
    m = _tiny_sparse()
    s = m.row_slice(1, 3)
    assert np.array_equal(s.toarray(), m.toarray()[1:3])


@pytest.mark.parametrize("rows,cols,vals", [
    ([0, 0], [1, 0], [1.0, 1.0]),          # unsorted
    ([0, 0], [1, 1], [1.0, 1.0]),          # duplicate
    ([0, 5], [0, 0], [1.0, 1.0]),          # row out of range
    ([0, 1], [0, 0], [1.0, 0.0]),          # explicit zero
    ([0, 1], [0, 0], [1.0, np.nan]),       # non-finite
])
def test_sparse_validation(rows, cols, vals):
    with pytest.raises(InputError):
        SparseMatrix(3, 2, np.array(rows), np.array(cols),
                     np.array(vals, dtype=float))


def test_matmul_matches_dense():
    m = _tiny_sparse()
    x = np.array([2.0, -1.0])
    assert np.allclose(core.matmul(m, x), m.toarray() @ x)
    y = np.array([1.0, 2.0, 3.0])
    assert np.allclose(core.rmatmul(m, y), m.toarray().T @ y)


# ---------------------------------------------------------------------------
# Problems and augmentation
# ---------------------------------------------------------------------------

def test_problem_validation():
    with pytest.raises(InputError):
        QuantileProblem(np.ones((2, 3)), np.ones(2), 0.5)  # n < d
    with pytest.raises(InputError):
        QuantileProblem(np.ones((3, 1)), np.ones(3), 1.0)  # tau out of range
    with pytest.raises(InputError):
        QuantileProblem(np.ones((3, 1)), np.ones(2), 0.5)  # b length


def test_flip_preserves_objective(gen):
    A = gen.standard_normal((20, 3))
    b = gen.standard_normal(20)
    x = gen.standard_normal(3)
    p = QuantileProblem(A, b, 0.3)
    f = p.flipped()
    assert f.tau == pytest.approx(0.7)
    assert core.objective(p, x) == pytest.approx(core.objective(f, x))


def test_augment_identity(gen):
    A = gen.standard_normal((15, 3))
    b = gen.standard_normal(15)
    p = QuantileProblem(A, b, 0.75)
    aug = core.augment(p)
    x = gen.standard_normal(3)
    y = np.concatenate([[1.0], x])
    assert core.rho(aug.Aaug @ y, p.tau) == pytest.approx(core.objective(p, x))
    assert np.array_equal(core.reduce_augmented(y), x)
    with pytest.raises(InputError):
        core.reduce_augmented(np.array([2.0, 0.0]))


def test_augment_sparse_matches_dense():
    m = _tiny_sparse()
    b = np.array([1.0, 0.0, -2.0])  # zero entry must be dropped, not stored
    aug = core.augment_matrix(m, b)
    dense = core.augment_matrix(m.toarray(), b)
    assert isinstance(aug, SparseMatrix)
    assert np.array_equal(aug.toarray(), dense)
    assert np.array_equal(dense, np.hstack([b[:, None], -m.toarray()]))
