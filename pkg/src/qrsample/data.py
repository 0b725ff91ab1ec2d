"""Synthetic problem generators, chunked on-disk storage, and file IO.

Chunk files are little-endian binary: dense chunks carry magic ``QRDX``,
sparse chunks ``QRSX``; a plain-text manifest lists row ranges and CRC32
checksums.  The response vector is stored as a dense n x 1 chunk series
alongside the design matrix.
"""

from __future__ import annotations

import math
import os
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import rng
from .core import SparseMatrix
from .exceptions import DataError, InputError

_DENSE_MAGIC = b"QRDX"
_SPARSE_MAGIC = b"QRSX"
_VERSION = 1
_SPARSE_DTYPE = np.dtype([("row", "<i8"), ("col", "<i4"), ("val", "<f8")])


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SkewedSpec:
    """Canonical-vector design with geometrically growing column blocks."""

    n: int
    d: int
    q: float = 2.0
    noise_ratio: float = 0.2
    corrupt_prob: float = 0.001
    corrupt_scale: float = 500.0
    seed: int = 0

    def __post_init__(self):
        if not (1.0 < self.q <= 2.0):
            raise InputError(f"block growth ratio must lie in (1, 2], got {self.q}")
        if self.n < self.d or self.d < 1:
            raise InputError("need n >= d >= 1")


@dataclass(frozen=True)
class GaussianSpec:
    n: int
    d: int
    noise_ratio: float = 0.2
    corrupt_prob: float = 0.001
    corrupt_scale: float = 500.0
    seed: int = 0


def skewed_block_sizes(n: int, d: int, q: float) -> np.ndarray:
    """Geometric block sizes c_j = floor(c_1 q^(j-1)) with the remainder
    folded into the last block; c_1 >= 161 is required so that uniform
    sampling at a 1% rate still hits the first block with probability 0.8."""
    c1 = math.ceil(n * (q - 1.0) / (q**d - 1.0)) if d > 1 else n
    if c1 < 161:
        n_min = int(math.floor(160.0 * (q**d - 1.0) / (q - 1.0))) + 1
        raise InputError(
            f"first block would have {c1} rows (< 161); "
            f"need n >= {n_min} for d={d}, q={q}"
        )
    sizes = [c1]
    for j in range(1, d - 1):
        sizes.append(int(math.floor(c1 * q**j)))
    if d > 1:
        last = n - sum(sizes)
        if last < 1:
            raise InputError("block sizes exceed n; decrease d or q")
        sizes.append(last)
    return np.asarray(sizes, dtype=np.int64)


def _noisy_response(bstar: np.ndarray, spec, seed_tags):
    """Shared response pipeline: scaled Laplace noise plus rare large
    corruptions drawn from an independent Bernoulli stream."""
    n = len(bstar)
    idx = np.arange(n, dtype=np.uint64)
    eps = rng.laplace_at(rng.derive_key(spec.seed, *seed_tags, "noise"), idx)
    norm_b = np.linalg.norm(bstar)
    if norm_b > 0:
        eps *= spec.noise_ratio * norm_b / np.linalg.norm(eps)
    corrupt = (
        rng.uniform_at(rng.derive_key(spec.seed, *seed_tags, "corrupt"), idx)
        < spec.corrupt_prob
    )
    b = np.where(corrupt, spec.corrupt_scale * eps, bstar + eps)
    return b


def generate_skewed(spec: SkewedSpec):
    """(A, b, xstar): each design row is a canonical vector; measurement
    counts per column grow geometrically, so uniform sampling at small rates
    misses the first coordinates."""
    sizes = skewed_block_sizes(spec.n, spec.d, spec.q)
    cols = np.repeat(np.arange(spec.d, dtype=np.int32), sizes)
    rows = np.arange(spec.n, dtype=np.int64)
    A = SparseMatrix(spec.n, spec.d, rows, cols, np.ones(spec.n))
    xstar = rng.normal_at(
        rng.derive_key(spec.seed, "skewed", "xstar"), np.arange(spec.d, dtype=np.uint64)
    )
    bstar = xstar[cols]
    b = _noisy_response(bstar, spec, ("skewed",))
    return A, b, xstar


def generate_gaussian(spec: GaussianSpec):
    """(A, b, xstar) with dense i.i.d. standard Gaussian design."""
    key_a = rng.derive_key(spec.seed, "gaussian", "design")
    A = rng.normal_at(key_a, np.arange(spec.n * spec.d, dtype=np.uint64)).reshape(
        spec.n, spec.d
    )
    xstar = rng.normal_at(
        rng.derive_key(spec.seed, "gaussian", "xstar"),
        np.arange(spec.d, dtype=np.uint64),
    )
    bstar = A @ xstar
    b = _noisy_response(bstar, spec, ("gaussian",))
    return A, b, xstar


# ---------------------------------------------------------------------------
# Chunk files
# ---------------------------------------------------------------------------

def save_dense_chunk(path: str, values: np.ndarray):
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim == 1:
        values = values[:, None]
    with open(path, "wb") as fh:
        fh.write(_DENSE_MAGIC)
        fh.write(struct.pack("<IQI", _VERSION, values.shape[0], values.shape[1]))
        fh.write(values.tobytes())


def load_dense_chunk(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(20)
        if len(head) < 20 or head[:4] != _DENSE_MAGIC:
            raise DataError(f"{path}: not a dense chunk file")
        version, nrows, ncols = struct.unpack("<IQI", head[4:])
        if version != _VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        raw = fh.read(8 * nrows * ncols)
    if len(raw) != 8 * nrows * ncols:
        raise DataError(f"{path}: truncated dense chunk")
    return np.frombuffer(raw, dtype="<f8").reshape(nrows, ncols).copy()


def save_sparse_chunk(path: str, m: SparseMatrix):
    rec = np.empty(m.nnz, dtype=_SPARSE_DTYPE)
    rec["row"] = m.rows
    rec["col"] = m.cols
    rec["val"] = m.vals
    with open(path, "wb") as fh:
        fh.write(_SPARSE_MAGIC)
        fh.write(struct.pack("<IQIQ", _VERSION, m.n_rows, m.n_cols, m.nnz))
        fh.write(rec.tobytes())


def load_sparse_chunk(path: str) -> SparseMatrix:
    with open(path, "rb") as fh:
        head = fh.read(28)
        if len(head) < 28 or head[:4] != _SPARSE_MAGIC:
            raise DataError(f"{path}: not a sparse chunk file")
        version, nrows, ncols, nnz = struct.unpack("<IQIQ", head[4:])
        if version != _VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        raw = fh.read(_SPARSE_DTYPE.itemsize * nnz)
    if len(raw) != _SPARSE_DTYPE.itemsize * nnz:
        raise DataError(f"{path}: truncated sparse chunk")
    rec = np.frombuffer(raw, dtype=_SPARSE_DTYPE)
    return SparseMatrix(
        int(nrows), int(ncols), rec["row"].copy(), rec["col"].copy(), rec["val"].copy()
    )


def _crc(path: str) -> str:
    crc = 0
    with open(path, "rb") as fh:
        while True:
            block = fh.read(1 << 20)
            if not block:
                break
            crc = zlib.crc32(block, crc)
    return f"{crc:08x}"


def save_csv(path: str, values: np.ndarray):
    np.savetxt(path, np.atleast_2d(values), delimiter=",")


def load_csv(path: str) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


# ---------------------------------------------------------------------------
# Chunked datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChunkRef:
    a_path: str
    b_path: str
    row_lo: int
    row_hi: int
    a_crc: str
    b_crc: str


class ChunkedDataset:
    """A manifest plus on-disk row-range chunks of (A, b)."""

    def __init__(self, manifest_path: str):
        self.manifest_path = os.path.abspath(manifest_path)
        self.root = os.path.dirname(self.manifest_path)
        self.n = self.d = 0
        self.format = ""
        self.chunks = []
        self._parse()

    def _parse(self):
        kv = {}
        chunks = []
        try:
            lines = open(self.manifest_path).read().splitlines()
        except OSError as exc:
            raise DataError(f"cannot read manifest: {exc}")
        for line in lines:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            if key == "chunk":
                parts = value.split(";")
                if len(parts) != 6:
                    raise DataError(f"malformed chunk line: {line!r}")
                chunks.append(
                    ChunkRef(parts[0], parts[1], int(parts[2]), int(parts[3]),
                             parts[4], parts[5])
                )
            else:
                kv[key] = value
        for field_name in ("n", "d", "format"):
            if field_name not in kv:
                raise DataError(f"manifest missing key {field_name!r}")
        self.n, self.d = int(kv["n"]), int(kv["d"])
        self.format = kv["format"]
        if self.format not in ("dense", "sparse"):
            raise DataError(f"unknown format {self.format!r}")
        pos = 0
        for ref in chunks:
            if ref.row_lo != pos or ref.row_hi <= ref.row_lo:
                raise DataError("chunk row ranges do not partition [0, n)")
            pos = ref.row_hi
        if pos != self.n:
            raise DataError("chunk row ranges do not cover all rows")
        self.chunks = chunks

    def _resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.root, path)

    def load_chunk(self, ref: ChunkRef, verify: bool = False):
        a_path, b_path = self._resolve(ref.a_path), self._resolve(ref.b_path)
        if verify:
            for path, want in ((a_path, ref.a_crc), (b_path, ref.b_crc)):
                got = _crc(path)
                if got != want:
                    raise DataError(f"{path}: checksum mismatch ({got} != {want})")
        a = load_sparse_chunk(a_path) if self.format == "sparse" else load_dense_chunk(a_path)
        b = load_dense_chunk(b_path)[:, 0]
        rows = ref.row_hi - ref.row_lo
        if a.shape[0] != rows or len(b) != rows:
            raise DataError(f"{a_path}: chunk row count disagrees with manifest")
        return a, b

    def iter_chunks(self, verify: bool = False):
        for ref in self.chunks:
            a, b = self.load_chunk(ref, verify=verify)
            yield ref.row_lo, ref.row_hi, a, b

    def load_all(self, verify: bool = False):
        """The concatenated in-memory (A, b)."""
        bs, sparse_parts, dense_parts = [], [], []
        for lo, hi, a, b in self.iter_chunks(verify=verify):
            bs.append(b)
            if self.format == "sparse":
                sparse_parts.append((lo, a))
            else:
                dense_parts.append(a)
        b = np.concatenate(bs)
        if self.format == "sparse":
            rows = np.concatenate([lo + a.rows for lo, a in sparse_parts])
            cols = np.concatenate([a.cols for _, a in sparse_parts])
            vals = np.concatenate([a.vals for _, a in sparse_parts])
            return SparseMatrix(self.n, self.d, rows, cols, vals), b
        return np.vstack(dense_parts), b


def save_chunked(A, b, out_dir: str, chunk_rows: int = None) -> ChunkedDataset:
    """Write (A, b) as a chunked dataset and return its handle.

    The default chunk size targets 2^22 stored values per chunk.
    """
    n, d = A.shape
    sparse = isinstance(A, SparseMatrix)
    if chunk_rows is None:
        per_row = max(1, (A.nnz + n - 1) // n) if sparse else d
        chunk_rows = max(1, (1 << 22) // per_row)
    os.makedirs(out_dir, exist_ok=True)
    lines = [f"version={_VERSION}", f"n={n}", f"d={d}",
             f"format={'sparse' if sparse else 'dense'}"]
    for ci, lo in enumerate(range(0, n, chunk_rows)):
        hi = min(lo + chunk_rows, n)
        a_name = f"a_{ci:05d}.{'qrsx' if sparse else 'qrdx'}"
        b_name = f"b_{ci:05d}.qrdx"
        a_path = os.path.join(out_dir, a_name)
        b_path = os.path.join(out_dir, b_name)
        if sparse:
            save_sparse_chunk(a_path, A.row_slice(lo, hi))
        else:
            save_dense_chunk(a_path, A[lo:hi])
        save_dense_chunk(b_path, b[lo:hi])
        lines.append(
            f"chunk={a_name};{b_name};{lo};{hi};{_crc(a_path)};{_crc(b_path)}"
        )
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return ChunkedDataset(manifest)


def replicate_stack(dataset: ChunkedDataset, times: int, out_dir: str) -> ChunkedDataset:
    """Vertically stack the dataset ``times`` times without copying chunk
    data: the new manifest references the original chunk files repeatedly.

    The objective at any x scales by exactly ``times``, so the minimizer set
    is unchanged.
    """
    if times < 1:
        raise InputError(f"replication count must be >= 1, got {times}")
    os.makedirs(out_dir, exist_ok=True)
    lines = [f"version={_VERSION}", f"n={dataset.n * times}", f"d={dataset.d}",
             f"format={dataset.format}"]
    for rep in range(times):
        shift = rep * dataset.n
        for ref in dataset.chunks:
            a_rel = os.path.relpath(dataset._resolve(ref.a_path), out_dir)
            b_rel = os.path.relpath(dataset._resolve(ref.b_path), out_dir)
            lines.append(
                f"chunk={a_rel};{b_rel};{ref.row_lo + shift};{ref.row_hi + shift};"
                f"{ref.a_crc};{ref.b_crc}"
            )
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return ChunkedDataset(manifest)
