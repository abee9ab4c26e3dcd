import itertools

import jsonschema
import numpy as np
import pytest

from nonogram.bench import (DEFAULT_COMPARISONS, RunRecord, benchmark, compare, load_report, render_report,
                            runs_from_report, save_report, summarize, validate_report)
from nonogram.core import ClueSet, encode_board
from nonogram.datasetgen import random_noise_board
from nonogram.stubs import OraclePredictor


class TickClock:
    """Advances by one unit per call, so every run takes exactly one unit."""

    def __init__(self):
        self.t = itertools.count()

    def __call__(self):
        return float(next(self.t))


class BrokenPredictor:
    def predict(self, clues):
        raise RuntimeError("no model")


def puzzles(count, n=6, seed=0):
    rng = np.random.default_rng(seed)
    boards = [random_noise_board(n, rng) for _ in range(count)]
    return [encode_board(b) for b in boards], boards


def test_single_puzzle_twelve_repetitions():
    clues, boards = puzzles(1)
    report = benchmark(clues, ["H", "NeHI"], predictor=OraclePredictor(boards))
    for v in ("H", "NeHI"):
        assert report["per_variant"][v]["time"]["count"] == 12
        assert report["per_variant"][v]["runs"] == 12
    assert [r["repetition"] for r in report["runs"] if r["variant"] == "H"] == list(range(12))


def test_identical_deterministic_solver_records_wilcoxon_failure():
    clues, _ = puzzles(3)
    report = benchmark(clues, ["H", "H"], repetitions=4, clock=TickClock())
    assert report["pairwise_tests"] == [{"a": "H", "b": "H", "error": "all differences are zero"}]
    assert report["solved_fraction"] == {"H": 1.0}
    validate_report(report)


def test_report_schema_round_trip_and_render(tmp_path):
    clues, boards = puzzles(6)
    report = benchmark(clues, ["H", "NeHPFI", "NeHPF"], repetitions=2, predictor=OraclePredictor(boards))
    assert [(t["a"], t["b"]) for t in report["pairwise_tests"]] == [("H", "NeHPFI"), ("NeHPFI", "NeHPF")]
    path = tmp_path / "r.json"
    save_report(report, path)
    assert load_report(path) == report
    runs = runs_from_report(report)
    assert len(runs) == 6 * 2 * 3 and all(isinstance(r, RunRecord) for r in runs)
    text = render_report(report)
    for heading in ("Execution time (s)", "Iterations", "Execution time percentiles (s)",
                    "Paired signed-rank tests", "Solved"):
        assert heading in text
    rows = text.split("Execution time percentiles (s)\n")[1].splitlines()[2:13]
    assert [r.split()[0] for r in rows] == [f"{0.1 * i:.1f}" for i in range(11)]


def test_invalid_report_rejected(tmp_path):
    clues, _ = puzzles(2)
    report = benchmark(clues, ["H"], repetitions=1)
    del report["solved_fraction"]
    with pytest.raises(jsonschema.ValidationError):
        validate_report(report)
    (tmp_path / "bad.json").write_text('{"version": 99}')
    with pytest.raises(jsonschema.ValidationError):
        load_report(tmp_path / "bad.json")


def test_failures_are_recorded_not_fatal():
    clues, _ = puzzles(2)
    report = benchmark(clues, ["H", "NeHI"], repetitions=2, predictor=BrokenPredictor())
    bad = report["per_variant"]["NeHI"]
    assert bad["solved"] == 0 and bad["time"] is None and len(bad["failures"]) == 4
    assert bad["failures"][0]["status"] == "error" and "no model" in bad["failures"][0]["error"]
    assert report["solved_fraction"] == {"H": 1.0, "NeHI": 0.0}
    assert "error" in report["pairwise_tests"][0]
    render_report(report)


def test_limit_runs_count_as_unsolved():
    hard = [encode_board(random_noise_board(15, np.random.default_rng(3)))]
    report = benchmark(hard, ["H"], repetitions=2, node_limit=1, warmup=False)
    assert report["per_variant"]["H"]["failures"][0]["status"] == "limit"
    assert report["solved_fraction"]["H"] == 0.0


def test_parallel_matches_serial_outcomes():
    clues, boards = puzzles(4)
    pred = OraclePredictor(boards)
    a = benchmark(clues, ["H", "Ne8HPF"], repetitions=2, predictor=pred, jobs=1)
    b = benchmark(clues, ["H", "Ne8HPF"], repetitions=2, predictor=pred, jobs=2)

    def strip(r):
        return [{k: v for k, v in run.items() if k != "elapsed"} for run in r["runs"]]

    assert strip(a) == strip(b)
    assert b["settings"]["jobs"] == 2


def test_argument_validation():
    clues, _ = puzzles(1)
    with pytest.raises(ValueError):
        benchmark(clues, ["H"], repetitions=0)
    with pytest.raises(ValueError):
        benchmark(clues, ["NeHI"])
    with pytest.raises(ValueError):
        benchmark(clues, ["Fast"])


def test_compare_pairs_by_puzzle_and_repetition():
    runs = []
    for p, rep in itertools.product(range(3), range(3)):
        runs.append(RunRecord(p, "A", rep, 2.0 + p + 0.1 * rep, 1, "solved"))
        runs.append(RunRecord(p, "B", rep, 1.0 + p, 1, "solved"))
    res = compare(runs, "A", "B")
    assert res["n"] == 9 and res["w_minus"] == 0 and res["W"] == 45
    assert res["method"] == "exact"
    swapped = compare(runs, "B", "A")
    assert swapped["W"] == 0 and swapped["p"] == res["p"]


def test_default_comparisons_fallback():
    runs = [RunRecord(0, v, 0, 1.0, 1, "solved") for v in ("NeHI", "Ne8HPF")]
    report = summarize(runs, ["NeHI", "Ne8HPF"], {"puzzles": 1, "repetitions": 1, "seed": 0, "warmup": True})
    assert [(t["a"], t["b"]) for t in report["pairwise_tests"]] == [("NeHI", "Ne8HPF")]
    assert len(DEFAULT_COMPARISONS) == 6
    validate_report(report)


def test_warmup_flags_change_settings():
    clues = [ClueSet(((1,), (1,)), ((1,), (1,)))]
    assert benchmark(clues, ["H"], repetitions=1)["settings"]["warmup"] is True
    assert benchmark(clues, ["H"], repetitions=1, include_warmup=True)["settings"]["warmup"] is False
    assert benchmark(clues, ["H"], repetitions=1, warmup=False)["settings"]["warmup"] is False
