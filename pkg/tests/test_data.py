"""Generators, chunk files, manifests, and stacking."""

import os

import numpy as np
import pytest

import qrsample as q
from qrsample import DataError, InputError, data, rng


# ---------------------------------------------------------------------------
# Skewed generator
# ---------------------------------------------------------------------------

def test_block_sizes_geometric():
    sizes = data.skewed_block_sizes(10_000, 5, 2.0)
    assert sizes.sum() == 10_000
    assert sizes[0] >= 161
    # geometric growth up to the remainder fold
    for j in range(1, len(sizes) - 1):
        assert sizes[j] == int(np.floor(sizes[0] * 2.0 ** j))
    assert np.all(np.diff(sizes) > 0)


def test_block_sizes_too_small_names_minimum():
    with pytest.raises(InputError, match="need n >="):
        data.skewed_block_sizes(100_000, 10, 2.0)


def test_skewed_rows_are_canonical():
    A, b, xstar = q.generate_skewed(q.SkewedSpec(n=3000, d=4, seed=0))
    assert A.nnz == 3000  # exactly one entry per row
    assert np.all(A.vals == 1.0)
    assert np.array_equal(A.rows, np.arange(3000))
    # column blocks are contiguous and nondecreasing
    assert np.all(np.diff(A.cols) >= 0)


def test_skewed_noise_ratio_and_corruption():
    spec = q.SkewedSpec(n=200_000, d=3, q=1.5, seed=1)
    A, b, xstar = q.generate_skewed(spec)
    bstar = xstar[A.cols]
    key = rng.derive_key(spec.seed, "skewed", "corrupt")
    corrupt = rng.uniform_at(key, np.arange(spec.n)) < spec.corrupt_prob
    clean = ~corrupt
    ratio = np.linalg.norm(b[clean] - bstar[clean]) / np.linalg.norm(bstar)
    assert ratio == pytest.approx(spec.noise_ratio, rel=0.02)
    assert 0.0002 < corrupt.mean() < 0.005
    # corrupted entries are large outliers on average
    assert np.abs(b[corrupt]).mean() > 10 * np.abs(b[clean]).mean()


def test_generators_deterministic():
    a1 = q.generate_skewed(q.SkewedSpec(n=2000, d=3, seed=5))
    a2 = q.generate_skewed(q.SkewedSpec(n=2000, d=3, seed=5))
    assert np.array_equal(a1[1], a2[1]) and np.array_equal(a1[2], a2[2])
    g1 = q.generate_gaussian(q.GaussianSpec(n=100, d=4, seed=5))
    g2 = q.generate_gaussian(q.GaussianSpec(n=100, d=4, seed=5))
    assert np.array_equal(g1[0], g2[0]) and np.array_equal(g1[1], g2[1])
    g3 = q.generate_gaussian(q.GaussianSpec(n=100, d=4, seed=6))
    assert not np.array_equal(g1[0], g3[0])


def test_spec_validation():
    with pytest.raises(InputError):
        q.SkewedSpec(n=100, d=3, q=2.5)
    with pytest.raises(InputError):
        q.SkewedSpec(n=2, d=3)


# ---------------------------------------------------------------------------
# Chunk files
# ---------------------------------------------------------------------------

def test_dense_chunk_roundtrip(tmp_path, gen):
    v = gen.standard_normal((100, 7))
    path = str(tmp_path / "c.qrdx")
    data.save_dense_chunk(path, v)
    assert np.array_equal(data.load_dense_chunk(path), v)
    # vectors become n x 1
    data.save_dense_chunk(path, v[:, 0])
    assert np.array_equal(data.load_dense_chunk(path)[:, 0], v[:, 0])


def test_sparse_chunk_roundtrip(tmp_path):
    A, b, _ = q.generate_skewed(q.SkewedSpec(n=2000, d=3, seed=0))
    path = str(tmp_path / "c.qrsx")
    data.save_sparse_chunk(path, A)
    back = data.load_sparse_chunk(path)
    assert np.array_equal(back.toarray(), A.toarray())


def test_chunk_magic_and_truncation_errors(tmp_path, gen):
    path = str(tmp_path / "bad.qrdx")
    with open(path, "wb") as fh:
        fh.write(b"NOPE" + b"\x00" * 20)
    with pytest.raises(DataError, match="not a dense chunk"):
        data.load_dense_chunk(path)
    good = str(tmp_path / "good.qrdx")
    data.save_dense_chunk(good, gen.standard_normal((10, 2)))
    raw = open(good, "rb").read()
    with open(good, "wb") as fh:
        fh.write(raw[:-8])
    with pytest.raises(DataError, match="truncated"):
        data.load_dense_chunk(good)


# ---------------------------------------------------------------------------
# Chunked datasets
# ---------------------------------------------------------------------------

def test_save_chunked_roundtrip_sparse(tmp_path):
    A, b, _ = q.generate_skewed(q.SkewedSpec(n=2800, d=4, q=1.5, seed=0))
    ds = data.save_chunked(A, b, str(tmp_path / "ds"), chunk_rows=400)
    assert len(ds.chunks) == 7
    A2, b2 = ds.load_all(verify=True)
    assert np.array_equal(b, b2)
    assert np.array_equal(A.toarray(), A2.toarray())


def test_save_chunked_roundtrip_dense(tmp_path, gen):
    A = gen.standard_normal((500, 3))
    b = gen.standard_normal(500)
    ds = data.save_chunked(A, b, str(tmp_path / "ds"), chunk_rows=128)
    A2, b2 = ds.load_all()
    assert np.array_equal(A, A2) and np.array_equal(b, b2)


def test_checksum_verification(tmp_path, gen):
    A = gen.standard_normal((100, 2))
    ds = data.save_chunked(A, gen.standard_normal(100), str(tmp_path / "ds"))
    target = os.path.join(ds.root, ds.chunks[0].a_path)
    raw = bytearray(open(target, "rb").read())
    raw[-1] ^= 0xFF
    open(target, "wb").write(raw)
    with pytest.raises(DataError, match="checksum"):
        ds.load_chunk(ds.chunks[0], verify=True)
    # unverified load still works (the flipped byte is a data bit)
    ds.load_chunk(ds.chunks[0], verify=False)


def test_manifest_validation(tmp_path):
    bad = tmp_path / "manifest.txt"
    bad.write_text("n=10\nd=2\nformat=dense\nchunk=a;b;0;5;x;y\nchunk=a;b;6;10;x;y\n")
    with pytest.raises(DataError, match="partition"):
        data.ChunkedDataset(str(bad))
    bad.write_text("n=10\nformat=dense\n")
    with pytest.raises(DataError, match="missing key"):
        data.ChunkedDataset(str(bad))
    bad.write_text("n=10\nd=2\nformat=weird\n")
    with pytest.raises(DataError, match="unknown format"):
        data.ChunkedDataset(str(bad))


def test_replicate_stack_scales_objective(tmp_path):
    A, b, _ = q.generate_skewed(q.SkewedSpec(n=1500, d=3, seed=2))
    ds = data.save_chunked(A, b, str(tmp_path / "base"), chunk_rows=400)
    stacked = data.replicate_stack(ds, 3, str(tmp_path / "stk"))
    assert stacked.n == 3 * ds.n
    A3, b3 = stacked.load_all()
    x = np.array([0.3, -0.1, 0.7])
    p1 = q.QuantileProblem(A, b, 0.75)
    p3 = q.QuantileProblem(A3, b3, 0.75)
    assert q.objective(p3, x) == pytest.approx(3 * q.objective(p1, x), rel=1e-12)
    with pytest.raises(InputError):
        data.replicate_stack(ds, 0, str(tmp_path / "z"))


def test_csv_roundtrip(tmp_path, gen):
    v = gen.standard_normal(6)
    path = str(tmp_path / "v.csv")
    data.save_csv(path, v)
    assert np.allclose(data.load_csv(path)[0], v)
