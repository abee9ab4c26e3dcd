"""Command-line interface.

Exit codes: 0 success, 1 domain failure (unsolved, unsatisfiable, bad data),
2 usage error. Results go to stdout; progress and diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import error_count, fit_weibull, time_stats
from .bench import benchmark, load_report, render_report, save_report
from .core import clue_set_table_row, format_board, read_board, read_puzzle
from .datasetgen import DatasetSpec, generate_dataset, iter_pairs, load_dataset
from .genetic import GaConfig, run_ga
from .predictor import (WEIGHTS_VERSION, MlpModel, MlpPredictor, TrainConfig, accuracy,
                        load_weights, predict, save_weights, train)
from .solver import SOLVED, VARIANTS, SolverConfig, binarize, solve
from .stubs import ConstantPredictor, NoisyOraclePredictor, OraclePredictor, RandomPredictor

log = logging.getLogger("nonogram")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
PREDICTOR_KINDS = ("oracle", "noisy-oracle", "constant", "random")


class UsageError(Exception):
    pass


def _progress(label: str):
    last = [0.0]

    def report(done, total):
        now = time.monotonic()
        if done == total or now - last[0] > 1.0:
            last[0] = now
            print(f"{label}: {done}/{total}", file=sys.stderr)
    return report


def _load_puzzle(path):
    try:
        return read_puzzle(path)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read puzzle {path}: {exc}") from None


def _load_model(path, n: Optional[int] = None) -> MlpModel:
    try:
        model = load_weights(path)
    except OSError as exc:
        raise UsageError(f"cannot read weights {path}: {exc}") from None
    if n is not None and model.n != n:
        raise UsageError(f"size mismatch: weights are for n={model.n} but the puzzle has n={n}")
    return model


def _predictor(args, n: int, boards=()):
    if getattr(args, "weights", None):
        return MlpPredictor(_load_model(args.weights, n))
    kind = getattr(args, "predictor", None)
    if kind is None:
        return None
    if kind in ("oracle", "noisy-oracle") and not boards:
        raise UsageError(f"--predictor {kind} needs known solutions (--truth or a dataset)")
    if kind == "oracle":
        return OraclePredictor(boards)
    if kind == "noisy-oracle":
        return NoisyOraclePredictor(boards, seed=args.seed)
    if kind == "constant":
        return ConstantPredictor(0.5)
    return RandomPredictor(args.seed)


def _emit(obj, path=None):
    text = json.dumps(obj, indent=1)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# Commands


def cmd_solve(args) -> int:
    clues = _load_puzzle(args.puzzle)
    truth = read_board(args.truth) if args.truth else None
    config = SolverConfig(args.variant, seed=args.seed, node_limit=args.node_limit, time_limit=args.time_limit)
    predictor = _predictor(args, clues.n, [] if truth is None else [truth])
    if config.uses_network and predictor is None:
        raise UsageError(f"variant {args.variant} needs --weights or --predictor")
    report = solve(clues, config, predictor, truth)
    if args.format == "board":
        if report.solved:
            print(format_board(report.solution))
        else:
            print(report.status, file=sys.stderr)
    else:
        _emit(report.to_json(), args.out)
    return EXIT_OK if report.status == SOLVED else EXIT_FAILURE


def cmd_ga(args) -> int:
    clues = _load_puzzle(args.puzzle)
    truth = read_board(args.truth) if args.truth else None
    seed_board = read_board(args.seed_board) if args.seed_board else None
    if seed_board is not None and seed_board.shape != (clues.n, clues.n):
        raise UsageError(f"size mismatch: seed board is {seed_board.shape[0]}x{seed_board.shape[1]}, puzzle n={clues.n}")
    config = GaConfig(population_size=args.population, max_generations=args.generations, seed=args.seed,
                      elitism=args.elitism, replacement=args.replacement)
    predictor = _predictor(args, clues.n, [] if truth is None else [truth])
    report = run_ga(clues, predictor, config, seed_board, truth)
    _emit(report.to_json(), args.out)
    return EXIT_OK if report.solved else EXIT_FAILURE


def _parse_hidden(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad --hidden {text!r}; expected e.g. 128,64") from None
    if not sizes or min(sizes) < 1:
        raise UsageError("--hidden needs positive layer sizes")
    return sizes


def cmd_train(args) -> int:
    records = load_dataset(args.dataset, "train")
    if not records:
        print(f"no training records in {args.dataset}", file=sys.stderr)
        return EXIT_FAILURE
    n = records[0].clues.n
    if args.hidden:
        model = MlpModel.create(n, _parse_hidden(args.hidden), seed=args.seed, dropout_rate=args.dropout)
    else:
        model = MlpModel.full_size(n, seed=args.seed)
    config = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
                         augment_reflections=args.augment)
    print(f"training on {len(records)} boards (n={n}, layers={model.layer_sizes})", file=sys.stderr)
    result = train(model, list(iter_pairs(records)), config)
    save_weights(result.model, args.out, args.precision)
    cell, board = accuracy(result.model, list(iter_pairs(records)))
    summary = {"weights": str(args.out), "samples": result.samples, "loss": result.history,
               "train_cell_accuracy": cell, "train_board_accuracy": board}
    held = load_dataset(args.dataset, "test")
    if held:
        summary["test_cell_accuracy"], summary["test_board_accuracy"] = accuracy(result.model, list(iter_pairs(held)))
    _emit(summary)
    return EXIT_OK


def cmd_predict(args) -> int:
    clues = _load_puzzle(args.puzzle)
    model = _load_model(args.weights, clues.n)
    grid = predict(model, clues)
    if args.format == "board":
        print(format_board(binarize(grid, args.threshold)))
    else:
        _emit({"n": clues.n, "probabilities": np.round(grid, 6).tolist(),
               "board": format_board(binarize(grid, args.threshold)).split()})
    return EXIT_OK


def cmd_generate(args) -> int:
    images = []
    for p in args.images or ():
        p = Path(p)
        images.extend(sorted(p.glob("*.pgm")) if p.is_dir() else [p])
    spec = DatasetSpec(n=args.n, noise=args.noise, figures=args.figures, seed=args.seed, root=args.out)
    manifest = generate_dataset(spec, images)
    counts: dict[str, int] = {}
    for r in manifest["records"]:
        counts[r["split"]] = counts.get(r["split"], 0) + 1
    _emit({"root": args.out, "records": counts, "skipped": len(manifest["skipped"])})
    return EXIT_OK


def cmd_enumerate(args) -> int:
    boards, valid, ratio = clue_set_table_row(args.n)
    print(f"{boards} {valid} {ratio:.3f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    records = load_dataset(args.dataset, None if args.split == "all" else args.split)
    if args.limit:
        records = records[:args.limit]
    if not records:
        print(f"no records in {args.dataset} ({args.split})", file=sys.stderr)
        return EXIT_FAILURE
    n = records[0].clues.n
    variants = args.variants.split(",") if args.variants else list(VARIANTS)
    for v in variants:
        if v not in VARIANTS:
            raise UsageError(f"unknown variant {v!r}; expected some of {','.join(VARIANTS)}")
    needs_net = any(VARIANTS[v][0] for v in variants)
    predictor = _predictor(args, n, [r.board for r in records]) if needs_net else None
    if needs_net and predictor is None:
        raise UsageError("network variants need --weights or --predictor")
    report = benchmark([r.clues for r in records], variants, args.repetitions, predictor, seed=args.seed,
                       warmup=not args.no_warmup, node_limit=args.node_limit, time_limit=args.time_limit,
                       jobs=args.jobs, truths=[r.board for r in records], progress=_progress("bench"))
    report["settings"]["dataset"] = str(args.dataset)
    report["settings"]["predictor"] = "weights:" + str(args.weights) if args.weights else args.predictor
    if args.out:
        save_report(report, args.out)
    print(render_report(report), end="")
    return EXIT_OK if all(f == 1.0 for f in report["solved_fraction"].values()) else EXIT_FAILURE


def cmd_analyze(args) -> int:
    if args.report:
        print(render_report(load_report(args.report)), end="")
        return EXIT_OK
    if args.counts:
        counts = [int(x) for x in Path(args.counts).read_text().split()]
    else:
        records = load_dataset(args.dataset, None if args.split == "all" else args.split)
        if not records:
            print("no records to analyze", file=sys.stderr)
            return EXIT_FAILURE
        model = _load_model(args.weights, records[0].clues.n)
        counts = [error_count(binarize(predict(model, r.clues)), r.board) for r in records]
    try:
        fit = fit_weibull(counts)
    except ValueError as exc:
        print(f"cannot fit: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    _emit({"samples": fit.samples, "alpha": fit.params.alpha, "beta": fit.params.beta,
           "neg_log_likelihood": fit.neg_log_likelihood, "mode": fit.mode(),
           "errors": time_stats(counts)}, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonogram", description="Nonogram solving, prediction and evaluation suite.")
    parser.add_argument("--version", action="version",
                        version=f"nonogram {__version__} (weights format v{WEIGHTS_VERSION})")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def predictor_flags(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--weights", help="trained weights file")
        g.add_argument("--predictor", choices=PREDICTOR_KINDS, help="built-in stand-in predictor")

    p = sub.add_parser("solve", help="solve one puzzle")
    p.add_argument("--puzzle", required=True)
    p.add_argument("--variant", default="H", choices=list(VARIANTS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", help="reference board (error counts, oracle predictors)")
    p.add_argument("--node-limit", type=int)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--format", choices=("json", "board"), default="json")
    p.add_argument("--out")
    predictor_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("ga", help="genetic search for one puzzle")
    p.add_argument("--puzzle", required=True)
    p.add_argument("--seed-board", help="initial board instead of a prediction")
    p.add_argument("--truth")
    p.add_argument("--population", type=int, default=1000)
    p.add_argument("--generations", type=int, default=100)
    p.add_argument("--elitism", type=int, default=1)
    p.add_argument("--replacement", choices=("generational", "steady"), default="generational")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    predictor_flags(p)
    p.set_defaults(func=cmd_ga)

    p = sub.add_parser("train", help="train a predictor on a dataset's train split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="weights file to write")
    p.add_argument("--hidden", help="comma-separated hidden sizes (default: full-size layout for n)")
    p.add_argument("--dropout", type=float, default=0.05)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--augment", action="store_true", help="add all eight reflections of each sample")
    p.add_argument("--precision", choices=("f64", "f32"), default="f64")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict a board from clues")
    p.add_argument("--weights", required=True)
    p.add_argument("--puzzle", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--format", choices=("json", "board"), default="json")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("generate", help="build a dataset from random boards and PGM images")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=int, default=0)
    p.add_argument("--figures", type=int, default=0)
    p.add_argument("--images", nargs="*", help="PGM files or directories of them")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("enumerate", help="count boards and distinct clue sets for n <= 5")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("bench", help="time solver variants over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=("train", "test", "all"), default="all")
    p.add_argument("--limit", type=int, help="use only the first N puzzles")
    p.add_argument("--variants", help="comma-separated (default: all seven)")
    p.add_argument("--repetitions", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes across (puzzle, variant) cells")
    p.add_argument("--no-warmup", action="store_true")
    p.add_argument("--node-limit", type=int)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--out", help="JSON report path")
    predictor_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("analyze", help="render a bench report or fit the prediction-error distribution")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--report", help="bench JSON report to render")
    g.add_argument("--counts", help="whitespace-separated error counts")
    g.add_argument("--dataset", help="dataset to predict (needs --weights)")
    p.add_argument("--weights")
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)
    return parser


def _validate(parser, args) -> None:
    for name in ("n", "repetitions", "population", "generations", "epochs", "batch_size", "jobs"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be >= 1")
    if args.command == "enumerate" and args.n > 5:
        raise UsageError("enumerate supports n <= 5")
    if args.command == "analyze" and args.dataset and not args.weights:
        raise UsageError("--dataset needs --weights")
    if args.command == "ga" and not 0 <= args.elitism < args.population:
        raise UsageError("--elitism must lie in [0, population)")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _validate(parser, args)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
