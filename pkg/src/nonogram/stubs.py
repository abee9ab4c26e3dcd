"""Non-learned predictors: lookups, noisy lookups and adversarial grids.

They implement the same ``predict(clues)`` interface as the MLP adapter and
are used for tests, benchmarks without a trained model, and stress runs.
"""

from __future__ import annotations

import zlib
from typing import Iterable, Optional

import numpy as np

from .analysis import WeibullParams, sample_discrete_weibull
from .core import ClueSet, encode_board
from .symmetry import ALL as ALL_REFLECTIONS, DIAGONAL, Reflection, apply_to_board

# discrete Weibull fitted to 10x10 network errors; used to mimic a trained predictor
TRAINED_10X10_ERRORS = WeibullParams(3.401227, 0.420651)


def _clue_key(clues: ClueSet) -> tuple:
    return clues.rows, clues.cols


def clue_digest(clues: ClueSet) -> int:
    return zlib.crc32(repr(_clue_key(clues)).encode())


class OraclePredictor:
    """Returns the known solution for every clue set it was given, including reflections of them.

    Unknown clue sets get a 0.5 grid (no information).
    """

    def __init__(self, boards: Iterable[np.ndarray] = ()):
        self._table: dict[tuple, np.ndarray] = {}
        for b in boards:
            self.add(b)

    def add(self, board: np.ndarray) -> None:
        board = np.asarray(board, dtype=np.int8)
        for r in ALL_REFLECTIONS:
            rb = apply_to_board(r, board)
            self._table.setdefault(_clue_key(encode_board(rb)), rb)

    def lookup(self, clues: ClueSet) -> Optional[np.ndarray]:
        return self._table.get(_clue_key(clues))

    def predict(self, clues: ClueSet) -> np.ndarray:
        board = self.lookup(clues)
        if board is None:
            return np.full((clues.n, clues.n), 0.5)
        return board.astype(np.float64)


class NoisyOraclePredictor(OraclePredictor):
    """Oracle answer with a discrete-Weibull number of cells flipped.

    Confidences are 0.9 / 0.1 so intuition ordering has signal. The flips are
    a deterministic function of ``seed`` and the clues.
    """

    def __init__(self, boards: Iterable[np.ndarray] = (), errors: WeibullParams = TRAINED_10X10_ERRORS,
                 seed: int = 0, confidence: float = 0.9):
        super().__init__(boards)
        self.errors = errors
        self.seed = seed
        self.confidence = confidence

    def predict(self, clues: ClueSet) -> np.ndarray:
        board = self.lookup(clues)
        n = clues.n
        if board is None:
            return np.full((n, n), 0.5)
        rng = np.random.default_rng([self.seed, clue_digest(clues)])
        flips = min(int(sample_discrete_weibull(self.errors, 1, rng)[0]), n * n)
        flat = board.astype(np.int8).ravel()
        idx = rng.choice(n * n, size=flips, replace=False)
        flat[idx] = 1 - flat[idx]
        hi, lo = self.confidence, 1.0 - self.confidence
        return np.where(flat.reshape(n, n) == 1, hi, lo)


class ConstantPredictor:
    def __init__(self, value: float = 0.5):
        self.value = value

    def predict(self, clues: ClueSet) -> np.ndarray:
        return np.full((clues.n, clues.n), float(self.value))


class RandomPredictor:
    """Uniform noise, deterministic per clue set."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def predict(self, clues: ClueSet) -> np.ndarray:
        return np.random.default_rng([self.seed, clue_digest(clues)]).random((clues.n, clues.n))


class ComplementPredictor(OraclePredictor):
    """Confidently predicts the exact opposite of the solution."""

    def predict(self, clues: ClueSet) -> np.ndarray:
        board = self.lookup(clues)
        if board is None:
            return np.full((clues.n, clues.n), 0.5)
        return 1.0 - board.astype(np.float64)


class ReflectionOnlyPredictor:
    """Knows the answer only in one reflected orientation of each puzzle; predicts all-empty elsewhere."""

    def __init__(self, boards: Iterable[np.ndarray] = (), reflection: Reflection = DIAGONAL):
        self.reflection = reflection
        self._known: dict[tuple, np.ndarray] = {}
        for b in boards:
            rb = apply_to_board(reflection, np.asarray(b, dtype=np.int8))
            self._known[_clue_key(encode_board(rb))] = rb

    def predict(self, clues: ClueSet) -> np.ndarray:
        board = self._known.get(_clue_key(clues))
        if board is not None:
            return board.astype(np.float64)
        return np.zeros((clues.n, clues.n))
