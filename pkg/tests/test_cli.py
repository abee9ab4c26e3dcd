import json
import subprocess
import sys

import numpy as np
import pytest

from nonogram import __version__
from nonogram.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from nonogram.core import encode_board, is_solution, read_board, write_board, write_puzzle
from nonogram.datasetgen import GrayImage, random_noise_board, write_pgm
from nonogram.predictor import MlpModel, save_weights


@pytest.fixture
def puzzle(tmp_path):
    board = random_noise_board(6, np.random.default_rng(0))
    write_puzzle(encode_board(board), tmp_path / "p.json")
    write_board(board, tmp_path / "truth.txt")
    return tmp_path / "p.json", tmp_path / "truth.txt", board


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("n, line", [(1, "2 2 1.000"), (2, "16 15 0.938"), (3, "512 445 0.869")])
def test_enumerate(capsys, n, line):
    code, out, _ = run(capsys, "enumerate", "--n", n)
    assert code == EXIT_OK and out.strip() == line


def test_enumerate_rejects_large_n(capsys):
    code, _, err = run(capsys, "enumerate", "--n", 6)
    assert code == EXIT_USAGE and "n <= 5" in err


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == EXIT_OK and out.strip() == f"nonogram {__version__} (weights format v1)"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "nonogram", "enumerate", "--n", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "16 15 0.938"


def test_solve_is_deterministic(capsys, puzzle):
    p, truth, board = puzzle
    outs = []
    for _ in range(2):
        code, out, _ = run(capsys, "solve", "--puzzle", p, "--variant", "Ne8HPFI", "--predictor", "random",
                           "--seed", 3)
        assert code == EXIT_OK
        data = json.loads(out)
        data.pop("elapsed")
        outs.append(data)
    assert outs[0] == outs[1] and outs[0]["status"] == "solved"


def test_solve_board_output(capsys, puzzle, tmp_path):
    p, truth, board = puzzle
    code, out, _ = run(capsys, "solve", "--puzzle", p, "--format", "board")
    assert code == EXIT_OK
    (tmp_path / "sol.txt").write_text(out)
    assert is_solution(read_board(tmp_path / "sol.txt"), encode_board(board))
    code, out, _ = run(capsys, "solve", "--puzzle", p, "--variant", "NeHI", "--predictor", "oracle",
                       "--truth", truth)
    assert code == EXIT_OK and json.loads(out)["phase"] == "direct-prediction"


def test_solve_usage_errors(capsys, puzzle, tmp_path):
    p, _, _ = puzzle
    assert run(capsys, "solve", "--puzzle", p, "--variant", "NeHI")[0] == EXIT_USAGE
    assert run(capsys, "solve", "--puzzle", p, "--variant", "NeHI", "--predictor", "oracle")[0] == EXIT_USAGE
    assert run(capsys, "solve", "--puzzle", tmp_path / "missing.json")[0] == EXIT_USAGE
    assert run(capsys, "solve", "--puzzle", p, "--variant", "Fast")[0] == EXIT_USAGE
    assert run(capsys, "frobnicate")[0] == EXIT_USAGE


def test_solve_limit_exit_code(capsys, tmp_path):
    board = random_noise_board(15, np.random.default_rng(3))
    write_puzzle(encode_board(board), tmp_path / "hard.json")
    code, out, _ = run(capsys, "solve", "--puzzle", tmp_path / "hard.json", "--node-limit", 1)
    assert code == EXIT_FAILURE and json.loads(out)["status"] == "limit"


def test_predict_size_mismatch(capsys, puzzle, tmp_path):
    p, _, _ = puzzle
    save_weights(MlpModel.create(5, (8,)), tmp_path / "w5.bin")
    code, _, err = run(capsys, "predict", "--weights", tmp_path / "w5.bin", "--puzzle", p)
    assert code == EXIT_USAGE and "size mismatch" in err
    save_weights(MlpModel.create(6, (8,)), tmp_path / "w6.bin")
    code, out, _ = run(capsys, "predict", "--weights", tmp_path / "w6.bin", "--puzzle", p)
    assert code == EXIT_OK and np.array(json.loads(out)["probabilities"]).shape == (6, 6)
    (tmp_path / "junk.bin").write_bytes(b"junk")
    assert run(capsys, "predict", "--weights", tmp_path / "junk.bin", "--puzzle", p)[0] == EXIT_FAILURE


def test_ga(capsys, puzzle):
    p, truth, _ = puzzle
    code, out, _ = run(capsys, "ga", "--puzzle", p, "--seed-board", truth, "--population", 10,
                       "--generations", 2)
    assert code == EXIT_OK and json.loads(out)["phase"] == "direct-prediction"
    assert run(capsys, "ga", "--puzzle", p, "--population", 5, "--elitism", 5)[0] == EXIT_USAGE


def test_generate_train_bench_analyze(capsys, tmp_path):
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    for i in range(5):
        pix = np.zeros((10, 10))
        pix[i:i + 4, 2:6 + i] = 200
        write_pgm(GrayImage.from_array(pix), img_dir / f"{i}.pgm")
    ds = tmp_path / "ds"
    code, out, _ = run(capsys, "generate", "--out", ds, "--n", 5, "--noise", 20, "--figures", 10,
                       "--images", img_dir, "--seed", 1)
    assert code == EXIT_OK
    summary = json.loads(out)
    assert sum(summary["records"].values()) == 30 + 3 * (5 - summary["skipped"])

    w = tmp_path / "w.bin"
    code, out, _ = run(capsys, "train", "--dataset", ds, "--out", w, "--hidden", "16", "--epochs", 2)
    trained = json.loads(out)
    assert code == EXIT_OK and w.exists() and len(trained["loss"]) == 2
    assert 0 <= trained["test_board_accuracy"] <= trained["test_cell_accuracy"] <= 1

    report = tmp_path / "r.json"
    code, out, err = run(capsys, "bench", "--dataset", ds, "--limit", 6, "--variants", "H,NeHPF",
                         "--repetitions", 2, "--weights", w, "--out", report)
    assert code == EXIT_OK and "Paired signed-rank tests" in out and "bench: 12/12" in err
    assert json.loads(report.read_text())["settings"]["repetitions"] == 2

    code, out, _ = run(capsys, "analyze", "--report", report)
    assert code == EXIT_OK and "Execution time percentiles" in out

    code, out, _ = run(capsys, "analyze", "--dataset", ds, "--split", "all", "--weights", w)
    assert code in (EXIT_OK, EXIT_FAILURE)
    assert run(capsys, "analyze", "--dataset", ds)[0] == EXIT_USAGE
    assert run(capsys, "bench", "--dataset", ds, "--variants", "NeHI")[0] == EXIT_USAGE


def test_analyze_counts(capsys, tmp_path):
    counts = np.random.default_rng(0).poisson(2.0, size=200)
    (tmp_path / "c.txt").write_text(" ".join(map(str, counts)))
    code, out, _ = run(capsys, "analyze", "--counts", tmp_path / "c.txt")
    data = json.loads(out)
    assert code == EXIT_OK and data["samples"] == 200 and data["alpha"] > 0 and data["beta"] > 0
    (tmp_path / "same.txt").write_text("3 " * 20)
    assert run(capsys, "analyze", "--counts", tmp_path / "same.txt")[0] == EXIT_FAILURE
