import csv
import subprocess
import sys

import numpy as np
import pytest

from pncg.cli import main
from pncg.kruskal import read_model
from pncg.runs import TRACE_COLUMNS
from pncg.tensor import read_tensor


@pytest.fixture
def generated(tmp_path):
    assert main(["generate", "-I", "6", "-R", "2", "-C", "0.5", "--seed", "3", "--out-dir", str(tmp_path)]) == 0
    return tmp_path


def test_generate_writes_files(generated):
    t = read_tensor(generated / "tensor.txt")
    m = read_model(generated / "truth.txt")
    assert t.dims == (6, 6, 6) and m.rank == 2


def test_decompose_all_options(generated, capsys):
    out = generated / "fit.txt"
    trace = generated / "trace.csv"
    code = main(["decompose", str(generated / "tensor.txt"), "--rank", "2", "--solver", "pncg-t-pr", "--seed", "1",
                 "--gtol", "1e-9", "--max-iters", "500", "--truth", str(generated / "truth.txt"),
                 "--out", str(out), "--trace", str(trace)])
    assert code == 0
    text = capsys.readouterr().out
    assert "pncg-t-pr: Converged" in text
    assert "recovered=True" in text
    assert read_model(out).rank == 2
    with open(trace) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == TRACE_COLUMNS and len(rows) > 2


def test_decompose_from_init_is_deterministic(generated, capsys):
    args = ["decompose", str(generated / "tensor.txt"), "-R", "2", "--solver", "als", "--init",
            str(generated / "truth.txt"), "--out"]
    assert main(args + [str(generated / "a.txt")]) == 0
    assert main(args + [str(generated / "b.txt")]) == 0
    for x, y in zip(read_model(generated / "a.txt").factors, read_model(generated / "b.txt").factors):
        np.testing.assert_array_equal(x, y)


def test_decompose_init_shape_mismatch(generated, capsys):
    code = main(["decompose", str(generated / "tensor.txt"), "-R", "3", "--init", str(generated / "truth.txt")])
    assert code != 0
    assert "error" in capsys.readouterr().err


def test_missing_file_is_an_error(tmp_path, capsys):
    assert main(["decompose", str(tmp_path / "nope.txt"), "-R", "2"]) != 0


def test_unknown_solver_rejected(generated):
    with pytest.raises(SystemExit) as exc:
        main(["decompose", str(generated / "tensor.txt"), "-R", "2", "--solver", "newton"])
    assert exc.value.code != 0


def test_bench_and_profile(tmp_path, capsys):
    conf = tmp_path / "bench.conf"
    conf.write_text("sizes = 6\nranks = 2\ncollinearities = 0.5\nl1s = 1\nl2s = 0\nstarts = 2\n"
                    "solvers = als, ncg-pr, pncg-t-pr\n")
    out = tmp_path / "out"
    assert main(["bench", "--config", str(conf), "--out-dir", str(out), "--save-traces"]) == 0
    text = capsys.readouterr().out
    assert "I=6 R=2 C=0.5" in text and "(2) (2)" in text
    assert (out / "runs.csv").exists() and (out / "traces.csv").exists() and (out / "summary.json").exists()
    prof_dir = tmp_path / "prof"
    assert main(["profile", str(out / "runs.csv"), "--out-dir", str(prof_dir)]) == 0
    assert (prof_dir / "profile_I6_R2_C0.5_PR.csv").exists()


def test_bench_bad_config(tmp_path, capsys):
    conf = tmp_path / "bad.conf"
    conf.write_text("starts = 0\n")
    assert main(["bench", "--config", str(conf), "--out-dir", str(tmp_path / "o")]) != 0
    assert main(["bench"]) != 0
    assert main(["bench", "--preset", "nope"]) != 0


def test_profile_bad_file(tmp_path):
    bad = tmp_path / "runs.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["profile", str(bad)]) != 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pncg", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("generate", "decompose", "bench", "profile"):
        assert cmd in res.stdout
