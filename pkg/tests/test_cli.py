"""CLI subcommands and exit codes (in-process invocation)."""

import numpy as np
import pytest

import qrsample as q
from qrsample import data
from qrsample.cli import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, cli


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    out = str(root / "ds")
    assert cli(["generate", "--kind", "skewed", "--n", "5000", "--d", "4",
                "--seed", "1", "--out", out]) == EXIT_OK
    return out


def test_generate_writes_dataset(dataset_dir):
    ds = data.ChunkedDataset(f"{dataset_dir}/manifest.txt")
    assert ds.n == 5000 and ds.d == 4 and ds.format == "sparse"
    xstar = data.load_csv(f"{dataset_dir}/xstar.csv")
    assert xstar.size == 4


def test_generate_gaussian(tmp_path):
    out = str(tmp_path / "g")
    assert cli(["generate", "--kind", "gaussian", "--n", "300", "--d", "3",
                "--out", out]) == EXIT_OK
    ds = data.ChunkedDataset(f"{out}/manifest.txt")
    assert ds.format == "dense" and ds.n == 300


def test_solve_and_exact_agree(dataset_dir, tmp_path, capsys):
    xr = str(tmp_path / "xr.csv")
    xe = str(tmp_path / "xe.csv")
    assert cli(["solve", dataset_dir, "--tau", "0.75", "--method", "SPC3",
                "--s", "2000", "--seed", "3", "--out", xr]) == EXIT_OK
    assert cli(["exact", dataset_dir, "--tau", "0.75", "--out", xe]) == EXIT_OK
    out = capsys.readouterr().out
    assert "status=optimal" in out
    xhat = data.load_csv(xr)[0]
    xstar = data.load_csv(xe)[0]
    assert np.linalg.norm(xhat - xstar) / np.linalg.norm(xstar) < 0.5


def test_solve_in_memory_matches_chunked(dataset_dir, tmp_path):
    a = str(tmp_path / "a.csv")
    b = str(tmp_path / "b.csv")
    assert cli(["solve", dataset_dir, "--tau", "0.75", "--method", "SPC3",
                "--s", "1500", "--seed", "8", "--out", a]) == EXIT_OK
    assert cli(["solve", dataset_dir, "--tau", "0.75", "--method", "SPC3",
                "--s", "1500", "--seed", "8", "--in-memory", "--out", b]) == EXIT_OK
    assert np.array_equal(data.load_csv(a), data.load_csv(b))


def test_kappa_command(dataset_dir, capsys):
    assert cli(["kappa", dataset_dir, "--method", "SPC3"]) == EXIT_OK
    assert "kappa=" in capsys.readouterr().out


def test_experiment_command(dataset_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    out = str(tmp_path / "res.csv")
    cfg.write_text(f"dataset={dataset_dir}\nmethod=SPC3\ntau=0.5\n"
                   f"s=500\ntrials=2\nseed=0\n")
    assert cli(["experiment", str(cfg), "--out", out]) == EXIT_OK
    header = open(out).readline().strip()
    assert header == "method,tau,s,metric,q1,median,q3,trials,failures"


def test_input_errors(dataset_dir):
    assert cli(["solve", "/does/not/exist", "--tau", "0.5",
                "--s", "100"]) == EXIT_INPUT
    assert cli(["solve", dataset_dir, "--tau", "1.5", "--s", "100"]) == EXIT_INPUT
    assert cli(["solve", dataset_dir, "--tau", "0.5"]) == EXIT_INPUT  # no s/eps
    assert cli(["generate", "--kind", "skewed", "--n", "10", "--d", "9",
                "--out", "/tmp/never"]) == EXIT_INPUT
    assert cli(["bogus"]) == EXIT_INPUT


def test_numerical_failure_exit(tmp_path, gen):
    # duplicate column -> rank-deficient design
    A = gen.standard_normal((50, 3))
    A[:, 2] = A[:, 0]
    data.save_chunked(A, gen.standard_normal(50), str(tmp_path / "bad"))
    assert cli(["exact", str(tmp_path / "bad"), "--tau", "0.5"]) == EXIT_NUMERICAL
