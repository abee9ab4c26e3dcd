"""Mutation-only genetic algorithm seeded from a predicted board."""

from __future__ import annotations

import bisect
import random
import time
from dataclasses import dataclass
from functools import lru_cache
from itertools import accumulate
from typing import Optional, Sequence

import numpy as np

from .core import EMPTY, FILLED, ClueSet, encode_line
from .solver import (LIMIT, PHASE_DIRECT, PHASE_GENETIC, SOLVED, Predictor, SolveReport, binarize)

MAX_MUTATIONS = 4


@dataclass
class GaConfig:
    population_size: int = 1000
    max_generations: int = 100
    seed: int = 0
    elitism: int = 1
    # "generational": children replace the population at the end of a generation;
    # "steady": each child immediately replaces the current worst individual if not worse
    replacement: str = "generational"

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 0 <= self.elitism < self.population_size:
            raise ValueError("elitism must lie in [0, population_size)")
        if self.replacement not in ("generational", "steady"):
            raise ValueError(f"unknown replacement scheme {self.replacement!r}")


@dataclass
class Individual:
    board: np.ndarray
    fitness: float
    solved: bool = False


@lru_cache(maxsize=None)
def _pattern_clues(n: int) -> tuple:
    # clue of every n-bit line pattern, bit j = cell j
    return tuple(encode_line([(p >> j) & 1 for j in range(n)]) for p in range(1 << n))


def _score(board: np.ndarray, clues: ClueSet) -> tuple[float, bool]:
    b = np.asarray(board)
    n = clues.n
    if n <= 16:
        table = _pattern_clues(n)
        w = 1 << np.arange(n, dtype=np.int64)
        filled = b == FILLED
        rows = [table[p] for p in (filled @ w).tolist()]
        cols = [table[p] for p in (filled.T @ w).tolist()]
    else:
        rows = [encode_line(r) for r in b]
        cols = [encode_line(c) for c in b.T]
    ncr = sum(r == c for r, c in zip(rows, clues.rows))
    ncc = sum(r == c for r, c in zip(cols, clues.cols))
    nmc = int(np.count_nonzero(b == FILLED))
    ncmb = clues.filled_count()
    if ncmb == 0:
        ratio = 1.0 if nmc == 0 else 0.0
    else:
        ratio = nmc / ncmb
    return float(ncc + ncr + n * n * ratio), ncr + ncc == 2 * n


def fitness(board: np.ndarray, clues: ClueSet) -> float:
    """Correct columns + correct rows + n^2 * (filled cells / required filled cells)."""
    return _score(board, clues)[0]


def _mutate_once(flat: np.ndarray, target: int, rng: random.Random) -> None:
    filled = np.flatnonzero(flat == FILLED)
    empty = np.flatnonzero(flat == EMPTY)
    if len(filled) < target:
        if len(empty):
            flat[empty[rng.randrange(len(empty))]] = FILLED
    elif len(filled) > target:
        flat[filled[rng.randrange(len(filled))]] = EMPTY
    elif len(filled) and len(empty):
        src = filled[rng.randrange(len(filled))]
        dst = empty[rng.randrange(len(empty))]
        flat[src] = EMPTY
        flat[dst] = FILLED


def mutate(board: np.ndarray, clues: ClueSet, rng: random.Random, count: Optional[int] = None) -> np.ndarray:
    """Apply 0-4 (uniform) single-cell mutations, each steering the filled count toward the clues' total.

    A board with too few filled cells gains one, too many loses one, and the
    right number has one filled cell moved to an empty position. ``count``
    fixes the number of mutations instead of drawing it.
    """
    out = np.array(board, dtype=np.int8, copy=True)
    k = rng.randint(0, MAX_MUTATIONS) if count is None else count
    target = clues.filled_count()
    flat = out.reshape(-1)
    for _ in range(k):
        _mutate_once(flat, target, rng)
    return out


def cumulative_weights(population: Sequence[Individual]) -> list[float]:
    return list(accumulate(max(ind.fitness, 0.0) for ind in population))


def select(population: Sequence[Individual], rng: random.Random,
           cumulative: Optional[list[float]] = None) -> Individual:
    """Roulette-wheel selection; uniform when no individual has positive fitness.

    ``cumulative`` lets a caller reuse the running fitness sums for a whole generation.
    """
    if not population:
        raise ValueError("empty population")
    if cumulative is None:
        cumulative = cumulative_weights(population)
    total = cumulative[-1]
    if total <= 0:
        return population[rng.randrange(len(population))]
    w = rng.random() * total
    idx = bisect.bisect_right(cumulative, w)
    return population[min(idx, len(population) - 1)]


def run_ga(clues: ClueSet, predictor: Optional[Predictor] = None, config: Optional[GaConfig] = None,
           seed_board: Optional[np.ndarray] = None, truth: Optional[np.ndarray] = None) -> SolveReport:
    """Evolve boards toward the clues.

    The seed individual is ``seed_board`` if given, else the binarized
    prediction, else an all-empty board. ``iterations`` in the report counts
    completed generations; running out of generations is reported as
    ``status="limit"``.
    """
    config = config or GaConfig()
    start = time.perf_counter()
    rng = random.Random(config.seed)
    n = clues.n
    if seed_board is not None:
        seed = np.asarray(seed_board, dtype=np.int8)
    elif predictor is not None:
        seed = binarize(predictor.predict(clues))
    else:
        seed = np.zeros((n, n), dtype=np.int8)
    if seed.shape != (n, n):
        raise ValueError(f"seed board shape {seed.shape} does not match n={n}")
    errors = None if truth is None else int(np.count_nonzero(seed != np.asarray(truth)))

    def report(solution, phase, generations, status=SOLVED):
        return SolveReport(solution=solution, status=status, phase=phase, iterations=generations,
                           elapsed=time.perf_counter() - start, prediction_errors=errors,
                           variant="GA", seed=config.seed)

    def individual(board):
        return Individual(board, *_score(board, clues))

    first = individual(seed)
    if first.solved:
        return report(seed, PHASE_DIRECT, 0)
    population = [first]
    for _ in range(config.population_size - 1):
        child = individual(mutate(seed, clues, rng))
        if child.solved:
            return report(child.board, PHASE_GENETIC, 0)
        population.append(child)

    for generation in range(1, config.max_generations + 1):
        cumulative = cumulative_weights(population)
        children = []
        for _ in range(config.population_size):
            parent = select(population, rng, cumulative)
            child = individual(mutate(parent.board, clues, rng))
            if child.solved:
                return report(child.board, PHASE_GENETIC, generation)
            if config.replacement == "steady":
                worst = min(range(len(population)), key=lambda i: population[i].fitness)
                if child.fitness >= population[worst].fitness:
                    population[worst] = child
                    cumulative = cumulative_weights(population)
            else:
                children.append(child)
        if config.replacement == "generational":
            population = next_generation(population, children, config.elitism)
    return report(None, None, config.max_generations, status=LIMIT)


def next_generation(parents: Sequence[Individual], children: Sequence[Individual],
                    elitism: int) -> list[Individual]:
    """The ``elitism`` fittest parents plus the fittest children, children kept in birth order."""
    elite = sorted(parents, key=lambda ind: ind.fitness, reverse=True)[:elitism]
    keep = sorted(range(len(children)), key=lambda i: children[i].fitness, reverse=True)[:len(children) - elitism]
    return elite + [children[i] for i in sorted(keep)]
