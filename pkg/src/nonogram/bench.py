"""Benchmark harness: repeated timed solves, summary tables and paired significance tests.

Every (puzzle, variant) cell is run ``repetitions`` times after an untimed
warm-up. Runs are paired across variants by (puzzle, repetition) for the
signed-rank tests. Cells may be spread over worker processes, but the
repetitions of one cell always run back to back in the same process.
"""

from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import jsonschema
import numpy as np

from .analysis import PERCENTILE_POINTS, WilcoxonResult, format_p, time_stats, wilcoxon_signed_rank
from .core import ClueSet
from .solver import VARIANTS, Predictor, SolverConfig, solve

REPORT_VERSION = 1
DEFAULT_REPETITIONS = 12
# (a, b) pairs compared when both variants are present; differences are time(a) - time(b)
DEFAULT_COMPARISONS = (
    ("H", "NeHPFI"),
    ("NeHPFI", "NeHPF"),
    ("Ne8HI", "NeHI"),
    ("Ne8HPFI", "NeHPFI"),
    ("Ne8HPF", "NeHPF"),
    ("Ne8HPFI", "Ne8HPF"),
)

_STATS = {
    "type": "object",
    "required": ["count", "mean", "std", "median", "percentiles"],
    "properties": {
        "count": {"type": "integer", "minimum": 1},
        "mean": {"type": "number"},
        "std": {"type": "number", "minimum": 0},
        "median": {"type": "number"},
        "percentiles": {"type": "object", "required": [f"{p:.1f}" for p in PERCENTILE_POINTS],
                        "additionalProperties": {"type": "number"}},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["version", "settings", "variants", "per_variant", "pairwise_tests", "solved_fraction", "runs"],
    "properties": {
        "version": {"const": REPORT_VERSION},
        "settings": {"type": "object", "required": ["puzzles", "repetitions", "seed", "warmup"]},
        "variants": {"type": "array", "items": {"enum": list(VARIANTS)}, "minItems": 1},
        "per_variant": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["runs", "solved", "failures", "phases"],
                "properties": {
                    "time": {"oneOf": [_STATS, {"type": "null"}]},
                    "iterations": {"oneOf": [_STATS, {"type": "null"}]},
                    "runs": {"type": "integer", "minimum": 0},
                    "solved": {"type": "integer", "minimum": 0},
                    "failures": {"type": "array"},
                    "phases": {"type": "object", "additionalProperties": {"type": "integer"}},
                },
            },
        },
        "pairwise_tests": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["a", "b"],
                "properties": {
                    "a": {"type": "string"}, "b": {"type": "string"},
                    "W": {"type": "number"}, "p": {"type": "number", "minimum": 0, "maximum": 1},
                    "log10_p": {"type": "number"}, "method": {"enum": ["exact", "normal"]},
                    "n": {"type": "integer"}, "error": {"type": "string"},
                },
            },
        },
        "solved_fraction": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1}},
        "runs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["puzzle", "variant", "repetition", "elapsed", "iterations", "status"],
            },
        },
    },
}


@dataclass
class RunRecord:
    puzzle: int
    variant: str
    repetition: int
    elapsed: float
    iterations: int
    status: str
    phase: Optional[str] = None
    error: Optional[str] = None


def _run_cell(clues: ClueSet, index: int, variant: str, repetitions: int, predictor, seed: int,
              warmup: bool, clock: Callable[[], float], node_limit: Optional[int],
              time_limit: Optional[float], truth) -> list[RunRecord]:
    def once(rep):
        config = SolverConfig(variant, seed=seed + rep, node_limit=node_limit, time_limit=time_limit)
        t0 = clock()
        try:
            report = solve(clues, config, predictor if config.uses_network else None, truth)
            status, phase, iterations, error = report.status, report.phase, report.iterations, None
        except Exception as exc:  # recorded, never fatal
            status, phase, iterations, error = "error", None, 0, f"{type(exc).__name__}: {exc}"
        return RunRecord(index, variant, rep, clock() - t0, iterations, status, phase, error)

    if warmup:
        once(0)
    return [once(rep) for rep in range(repetitions)]


def _run_cell_args(args):
    return _run_cell(*args)


def _pair_key(r: RunRecord) -> tuple[int, int]:
    return r.puzzle, r.repetition


def compare(runs: Sequence[RunRecord], a: str, b: str) -> dict:
    """Paired signed-rank test of time(a) - time(b) over runs solved by both."""
    ra = {_pair_key(r): r for r in runs if r.variant == a and r.status == "solved"}
    rb = {_pair_key(r): r for r in runs if r.variant == b and r.status == "solved"}
    keys = sorted(ra.keys() & rb.keys())
    try:
        res: WilcoxonResult = wilcoxon_signed_rank([(ra[k].elapsed, rb[k].elapsed) for k in keys])
    except ValueError as exc:
        return {"a": a, "b": b, "error": str(exc)}
    return {"a": a, "b": b, "W": res.W, "w_minus": res.w_minus, "p": res.p_value, "log10_p": res.log10_p,
            "method": res.method, "n": res.n}


def summarize(runs: Sequence[RunRecord], variants: Sequence[str], settings: dict,
              comparisons: Optional[Sequence[tuple[str, str]]] = None) -> dict:
    """Build the JSON report from raw run records."""
    per_variant, solved_fraction = {}, {}
    for v in variants:
        mine = [r for r in runs if r.variant == v]
        ok = [r for r in mine if r.status == "solved"]
        phases: dict[str, int] = {}
        for r in ok:
            phases[r.phase] = phases.get(r.phase, 0) + 1
        per_variant[v] = {
            "time": time_stats([r.elapsed for r in ok]) if ok else None,
            "iterations": time_stats([r.iterations for r in ok]) if ok else None,
            "runs": len(mine),
            "solved": len(ok),
            "failures": [{"puzzle": r.puzzle, "repetition": r.repetition, "status": r.status, "error": r.error}
                         for r in mine if r.status != "solved"],
            "phases": phases,
        }
        solved_fraction[v] = len(ok) / len(mine) if mine else 0.0
    if comparisons is None:
        comparisons = [(a, b) for a, b in DEFAULT_COMPARISONS if a in variants and b in variants]
        if not comparisons:
            comparisons = list(itertools.combinations(variants, 2))
    return {
        "version": REPORT_VERSION,
        "settings": settings,
        "variants": list(variants),
        "per_variant": per_variant,
        "pairwise_tests": [compare(runs, a, b) for a, b in comparisons],
        "solved_fraction": solved_fraction,
        "runs": [r.__dict__ for r in runs],
    }


def benchmark(puzzles: Sequence[ClueSet], variants: Sequence[str] = tuple(VARIANTS),
              repetitions: int = DEFAULT_REPETITIONS, predictor: Optional[Predictor] = None, seed: int = 0,
              warmup: bool = True, include_warmup: bool = False, clock: Callable[[], float] = time.perf_counter,
              node_limit: Optional[int] = None, time_limit: Optional[float] = None, jobs: int = 1,
              truths: Optional[Sequence[np.ndarray]] = None,
              comparisons: Optional[Sequence[tuple[str, str]]] = None,
              progress: Optional[Callable[[int, int], None]] = None) -> dict:
    """Time every variant on every puzzle and return the report dict.

    The untimed warm-up run per cell is skipped when ``warmup`` is false;
    ``include_warmup`` keeps it as the first counted repetition instead. ``jobs > 1`` needs a picklable
    predictor and clock.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}")
        if VARIANTS[v][0] and predictor is None:
            raise ValueError(f"variant {v} needs a predictor")
    cells = [(clues, i, v, repetitions, predictor, seed, warmup and not include_warmup, clock, node_limit, time_limit,
              None if truths is None else truths[i])
             for i, clues in enumerate(puzzles) for v in variants]
    runs: list[RunRecord] = []
    if jobs <= 1:
        for done, cell in enumerate(cells, start=1):
            runs.extend(_run_cell(*cell))
            if progress:
                progress(done, len(cells))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for done, records in enumerate(pool.map(_run_cell_args, cells), start=1):
                runs.extend(records)
                if progress:
                    progress(done, len(cells))
    settings = {"puzzles": len(puzzles), "repetitions": repetitions, "seed": seed,
                "warmup": warmup and not include_warmup, "jobs": jobs,
                "node_limit": node_limit, "time_limit": time_limit}
    return summarize(runs, variants, settings, comparisons)


def validate_report(report: dict) -> None:
    jsonschema.validate(report, REPORT_SCHEMA)


def save_report(report: dict, path) -> None:
    validate_report(report)
    Path(path).write_text(json.dumps(report, indent=1) + "\n")


def load_report(path) -> dict:
    report = json.loads(Path(path).read_text())
    validate_report(report)
    return report


def runs_from_report(report: dict) -> list[RunRecord]:
    return [RunRecord(**r) for r in report["runs"]]


# ---------------------------------------------------------------------------
# Text rendering


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines)


def _fmt(x, digits=4) -> str:
    return "-" if x is None else f"{x:.{digits}f}"


def render_report(report: dict) -> str:
    """Time summary, iteration summary, time percentiles and paired tests as plain-text tables."""
    variants = report["variants"]
    pv = report["per_variant"]
    out = []

    def summary(key, title, digits):
        rows = []
        for v in variants:
            s = pv[v][key]
            rows.append([v] + ([_fmt(s["mean"], digits), _fmt(s["std"], digits), _fmt(s["median"], digits)]
                               if s else ["-", "-", "-"]))
        out.append(title + "\n" + _table(["Algorithm", "Mean", "Std", "Median"], rows))

    summary("time", "Execution time (s)", 4)
    summary("iterations", "Iterations", 4)
    rows = []
    for p in PERCENTILE_POINTS:
        key = f"{p:.1f}"
        rows.append([key] + [_fmt(pv[v]["time"]["percentiles"][key]) if pv[v]["time"] else "-" for v in variants])
    out.append("Execution time percentiles (s)\n" + _table(["P"] + list(variants), rows))
    rows = []
    for t in report["pairwise_tests"]:
        if "error" in t:
            rows.append([f"{t['a']} vs {t['b']}", "-", "-", "-", t["error"]])
        else:
            res = WilcoxonResult(t["W"], t.get("w_minus", 0.0), 0.0, t["p"], t["method"], t["n"], t["log10_p"])
            rows.append([f"{t['a']} vs {t['b']}", f"{t['W']:g}", format_p(res), t["method"], ""])
    out.append("Paired signed-rank tests (time a - time b)\n" + _table(["Study", "W", "p-value", "method", "note"], rows))
    rows = [[v, f"{report['solved_fraction'][v]:.4f}", str(pv[v]["solved"]), str(pv[v]["runs"]),
             ", ".join(f"{k}={c}" for k, c in sorted(pv[v]["phases"].items()))] for v in variants]
    out.append("Solved\n" + _table(["Algorithm", "fraction", "solved", "runs", "phases"], rows))
    return "\n\n".join(out) + "\n"
