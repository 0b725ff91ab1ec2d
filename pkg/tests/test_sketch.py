"""Sparse and dense Cauchy embeddings."""

import numpy as np
import pytest
import scipy.sparse as sp

import qrsample as q
from qrsample import InputError, rng, sketch


def _sct(n=3000, r1=40, seed=0):
    return sketch.build_sct(n, r1, rng.CounterStream.from_seed(seed, "sct"))


def test_sct_matches_explicit_matrix(gen):
    n, d = 3000, 5
    A = gen.standard_normal((n, d))
    sct = _sct(n)
    # independent oracle: materialize Pi and multiply
    Pi = np.zeros((sct.r1, n))
    Pi[sct.targets(), np.arange(n)] = sct.scales()
    assert np.allclose(sketch.apply_sct(sct, A), Pi @ A, rtol=1e-12, atol=1e-9)


def test_sct_sparse_dense_agree(gen):
    n, d = 2000, 4
    dense = np.where(gen.random((n, d)) < 0.3, gen.standard_normal((n, d)), 0.0)
    dense[:, 0] += 1e-3  # keep every row nonempty
    sparse = q.SparseMatrix.from_csr(sp.csr_matrix(dense))
    sct = _sct(n)
    out_d = sketch.apply_sct(sct, dense)
    out_s = sketch.apply_sct(sct, sparse)
    assert np.array_equal(out_d, out_s)


def test_sct_chunked_accumulation_bit_exact(gen):
    n, d = 5000, 6
    A = gen.standard_normal((n, d))
    sct = _sct(n)
    full = sketch.apply_sct(sct, A)
    out = np.zeros_like(full)
    for lo, hi in [(0, 1), (1, 1234), (1234, 4000), (4000, 5000)]:
        sketch.apply_sct(sct, A[lo:hi], out=out, row_offset=lo)
    assert np.array_equal(full, out)


def test_sct_targets_scales_deterministic():
    a, b = _sct(seed=5), _sct(seed=5)
    assert np.array_equal(a.targets(), b.targets())
    assert np.array_equal(a.scales(), b.scales())
    assert not np.array_equal(a.scales(), _sct(seed=6).scales())
    assert a.targets().min() >= 0 and a.targets().max() < a.r1


def test_sct_shape_errors(gen):
    sct = _sct(n=10)
    with pytest.raises(InputError):
        sketch.apply_sct(sct, gen.standard_normal((11, 2)))
    with pytest.raises(InputError):
        sketch.apply_sct(sct, gen.standard_normal((5, 2)),
                         out=np.zeros((3, 3)))
    with pytest.raises(InputError):
        sketch.build_sct(0, 5, rng.CounterStream.from_seed(0))
    with pytest.raises(InputError):
        sketch.build_sct(5, 0, rng.CounterStream.from_seed(0))


def test_dense_cauchy_matches_matrix(gen):
    n, d, r = 500, 3, 20
    A = gen.standard_normal((n, d))
    t = sketch.build_dense_cauchy(n, r, rng.CounterStream.from_seed(1, "sc"))
    assert np.allclose(sketch.apply_dense_cauchy(t, A), t.values() @ A)


def test_measure_distortion_identity(gen):
    A = gen.standard_normal((100, 4))
    lo, hi = sketch.measure_distortion(A, A, 50, gen)
    assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)


def test_sct_embedding_distortion_bounded(gen):
    # the sketch preserves l1 norms of the column space up to a modest factor
    A, b, _ = q.generate_skewed(q.SkewedSpec(n=5000, d=4, seed=1))
    sct = _sct(n=5000, r1=sketch.default_embedding_rows(4))
    B = sketch.apply_sct(sct, A)
    lo, hi = sketch.measure_distortion(B, A, 100, gen)
    assert lo > 1e-2 and hi < 1e3 and lo <= hi
