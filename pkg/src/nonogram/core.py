"""Boards, clues, the board -> clue encoding, and line combinations.

Boards are ``numpy`` int8 arrays of shape ``(n, n)`` holding ``FILLED`` (1),
``EMPTY`` (0) or ``UNKNOWN`` (-1). A line is any 1-D slice of such an array.
Clues are tuples of positive block lengths; the all-empty line has the empty
tuple as its clue.

Line combinations are also available as bitmasks (bit ``j`` set means cell
``j`` is filled), which is what the solvers use internally.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np


class CellState(IntEnum):
    UNKNOWN = -1
    EMPTY = 0
    FILLED = 1


UNKNOWN = int(CellState.UNKNOWN)
EMPTY = int(CellState.EMPTY)
FILLED = int(CellState.FILLED)

Clue = tuple[int, ...]

# Above this many combinations line_combinations() streams instead of building a list.
DEFAULT_COMBINATION_CAP = 2**20

_CHARS = {FILLED: "#", EMPTY: ".", UNKNOWN: "?"}
_STATES = {v: k for k, v in _CHARS.items()}


@dataclass(frozen=True)
class ClueSet:
    """Row clues (top to bottom) and column clues (left to right) of an n x n puzzle."""

    rows: tuple[Clue, ...]
    cols: tuple[Clue, ...]

    def __post_init__(self):
        rows = tuple(tuple(int(b) for b in c) for c in self.rows)
        cols = tuple(tuple(int(b) for b in c) for c in self.cols)
        if len(rows) != len(cols):
            raise ValueError(f"only square puzzles are supported ({len(rows)} rows, {len(cols)} cols)")
        if not rows:
            raise ValueError("a puzzle needs at least one row")
        for c in rows + cols:
            if any(b < 1 for b in c):
                raise ValueError(f"block lengths must be positive: {c}")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @property
    def n(self) -> int:
        return len(self.rows)

    def filled_count(self) -> int:
        """Number of filled cells demanded by the row clues."""
        return sum(sum(c) for c in self.rows)

    def is_plausible(self) -> bool:
        """Cheap necessary conditions for satisfiability.

        Every clue must fit its line and row and column totals must agree.
        """
        n = self.n
        fits = all(min_line_length(c) <= n for c in self.rows + self.cols)
        return fits and self.filled_count() == sum(sum(c) for c in self.cols)

    def to_json(self) -> dict:
        return {"n": self.n, "rows": [list(c) for c in self.rows], "cols": [list(c) for c in self.cols]}

    @classmethod
    def from_json(cls, data: dict) -> "ClueSet":
        clues = cls(tuple(_parse_clue(c) for c in data["rows"]), tuple(_parse_clue(c) for c in data["cols"]))
        if "n" in data and int(data["n"]) != clues.n:
            raise ValueError(f"declared n={data['n']} but got {clues.n} row clues")
        return clues

    def __str__(self):
        rows = " | ".join(format_clue(c) for c in self.rows)
        cols = " | ".join(format_clue(c) for c in self.cols)
        return f"rows: {rows}\ncols: {cols}"


def _parse_clue(c) -> Clue:
    # [0] is accepted as a synonym of [] for hand-written puzzles
    if list(c) == [0]:
        return ()
    return tuple(int(b) for b in c)


def format_clue(clue: Clue) -> str:
    return " ".join(map(str, clue)) if clue else "0"


def min_line_length(clue: Clue) -> int:
    return sum(clue) + max(len(clue) - 1, 0)


# ---------------------------------------------------------------------------
# Boards and file formats


def unknown_board(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("board side must be >= 1")
    return np.full((n, n), UNKNOWN, dtype=np.int8)


def as_board(cells) -> np.ndarray:
    """Validate and convert a nested sequence/array into a square int8 board."""
    board = np.asarray(cells, dtype=np.int8)
    if board.ndim != 2 or board.shape[0] != board.shape[1] or board.shape[0] < 1:
        raise ValueError(f"expected a non-empty square board, got shape {board.shape}")
    if not np.isin(board, (UNKNOWN, EMPTY, FILLED)).all():
        raise ValueError("board cells must be -1, 0 or 1")
    return board


def is_full(board: np.ndarray) -> bool:
    return not (np.asarray(board) == UNKNOWN).any()


def format_board(board: np.ndarray) -> str:
    return "\n".join("".join(_CHARS[int(v)] for v in row) for row in np.asarray(board)) + "\n"


def parse_board(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    try:
        cells = [[_STATES[ch] for ch in ln] for ln in lines]
    except KeyError as exc:
        raise ValueError(f"unexpected board character {exc.args[0]!r}") from None
    if any(len(r) != len(lines) for r in cells):
        raise ValueError("board text must be a square grid")
    return as_board(cells)


def read_board(path) -> np.ndarray:
    return parse_board(Path(path).read_text())


def write_board(board: np.ndarray, path) -> None:
    Path(path).write_text(format_board(board))


def read_puzzle(path) -> ClueSet:
    return ClueSet.from_json(json.loads(Path(path).read_text()))


def write_puzzle(clues: ClueSet, path) -> None:
    Path(path).write_text(json.dumps(clues.to_json()) + "\n")


# ---------------------------------------------------------------------------
# Encoding


def encode_line(line: Sequence[int]) -> Clue:
    """Lengths of the maximal runs of filled cells, left to right."""
    blocks = []
    run = 0
    for v in np.asarray(line).tolist():
        if v == FILLED:
            run += 1
        elif v == EMPTY:
            if run:
                blocks.append(run)
                run = 0
        else:
            raise ValueError("cannot encode a line with unknown cells")
    if run:
        blocks.append(run)
    return tuple(blocks)


def encode_board(board: np.ndarray) -> ClueSet:
    board = np.asarray(board)
    if board.ndim != 2 or board.shape[0] != board.shape[1]:
        raise ValueError(f"expected a square board, got shape {board.shape}")
    return ClueSet(tuple(encode_line(r) for r in board), tuple(encode_line(c) for c in board.T))


def is_solution(board: np.ndarray, clues: ClueSet) -> bool:
    board = np.asarray(board)
    if board.shape != (clues.n, clues.n) or not is_full(board):
        return False
    rows_ok = all(encode_line(r) == c for r, c in zip(board, clues.rows))
    return rows_ok and all(encode_line(col) == c for col, c in zip(board.T, clues.cols))


def count_boards(n: int) -> int:
    return 2 ** (n * n)


# ---------------------------------------------------------------------------
# Line combinations


def count_line_combinations(length: int, clue: Clue) -> int:
    if not clue:
        return 1
    if min_line_length(clue) > length:
        return 0
    return math.comb(length - sum(clue) + 1, len(clue))


def _iter_starts(length: int, clue: Clue, first: int = 0) -> Iterator[tuple[int, ...]]:
    if not clue:
        yield ()
        return
    head, rest = clue[0], clue[1:]
    last = length - min_line_length(clue)
    for s in range(first, last + 1):
        for tail in _iter_starts(length, rest, s + head + 1):
            yield (s,) + tail


def iter_line_masks(length: int, clue: Clue) -> Iterator[int]:
    """Bitmask of every placement of ``clue`` in a blank line, lexicographic by block starts."""
    for starts in _iter_starts(length, tuple(clue)):
        mask = 0
        for s, b in zip(starts, clue):
            mask |= ((1 << b) - 1) << s
        yield mask


@lru_cache(maxsize=4096)
def line_masks(length: int, clue: Clue) -> tuple[int, ...]:
    """Cached tuple version of :func:`iter_line_masks`."""
    return tuple(iter_line_masks(length, clue))


def line_to_masks(line: Sequence[int]) -> tuple[int, int]:
    """``(filled, known)`` bitmasks of a tri-state line."""
    filled = known = 0
    for j, v in enumerate(np.asarray(line).tolist()):
        if v != UNKNOWN:
            known |= 1 << j
            if v == FILLED:
                filled |= 1 << j
    return filled, known


def masks_to_line(filled: int, known: int, length: int) -> np.ndarray:
    out = np.full(length, UNKNOWN, dtype=np.int8)
    for j in range(length):
        if known >> j & 1:
            out[j] = filled >> j & 1
    return out


def compatible_masks(masks: Iterable[int], filled: int, known: int) -> list[int]:
    return [m for m in masks if not (m ^ filled) & known]


def intersect_masks(masks: Sequence[int], full: int) -> tuple[int, int]:
    """Cells filled in every mask and cells empty in every mask."""
    always = full
    ever = 0
    for m in masks:
        always &= m
        ever |= m
    return always, full & ~ever


def iter_line_combinations(line: Sequence[int], clue: Clue) -> Iterator[np.ndarray]:
    line = np.asarray(line)
    filled, known = line_to_masks(line)
    for m in iter_line_masks(len(line), tuple(clue)):
        if not (m ^ filled) & known:
            yield masks_to_line(m, -1, len(line))


def line_combinations(line: Sequence[int], clue: Clue, cap: int = DEFAULT_COMBINATION_CAP):
    """Every complete line matching ``clue`` and the known cells of ``line``.

    Returns a list, or a lazy iterator when the blank-line combination count
    exceeds ``cap``. An empty result means the line contradicts the clue.
    """
    it = iter_line_combinations(line, clue)
    if count_line_combinations(len(line), tuple(clue)) > cap:
        return it
    return list(it)


def deduce_trivial(line: Sequence[int], clue: Clue) -> tuple[np.ndarray, bool, bool]:
    """Fix every unknown cell on which all compatible combinations agree.

    Returns ``(line, changed, contradiction)``. On contradiction the input
    line is returned unchanged.
    """
    line = np.asarray(line, dtype=np.int8)
    length = len(line)
    filled, known = line_to_masks(line)
    compat = compatible_masks(line_masks(length, tuple(clue)), filled, known)
    if not compat:
        return line.copy(), False, True
    always, never = intersect_masks(compat, (1 << length) - 1)
    new_known = known | always | never
    if new_known == known:
        return line.copy(), False, False
    return masks_to_line(always, new_known, length), True, False


# ---------------------------------------------------------------------------
# Exhaustive enumeration of valid clue sets


def count_valid_clue_sets(n: int, max_n: int = 5) -> int:
    """Number of distinct clue sets produced by encoding every n x n board.

    Vectorised over boards. Boards are grouped by the clue of their first
    row, which is the leading digit of the clue-set key, so groups never
    share keys and can be deduplicated independently.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > max_n:
        raise ValueError(f"n={n} exceeds the enumeration guard ({max_n}); raise max_n to override")
    patterns = np.arange(1 << n, dtype=np.int64)
    # bit j of a pattern is cell j of the line
    pattern_clue = [encode_line([(p >> j) & 1 for j in range(n)]) for p in range(1 << n)]
    clue_ids = {c: i for i, c in enumerate(dict.fromkeys(pattern_clue))}
    base = len(clue_ids)
    if base ** (2 * n) >= 2**63:
        raise ValueError(f"clue-set keys for n={n} do not fit in 64 bits")
    id_of = np.array([clue_ids[c] for c in pattern_clue], dtype=np.int64)

    rest_bits = n * (n - 1)
    rest = np.arange(1 << rest_bits, dtype=np.int64)
    # rows 1..n-1 of every completion, fixed across groups
    rest_rows = [(rest >> (n * (i - 1))) & ((1 << n) - 1) for i in range(1, n)]
    rest_key = np.zeros_like(rest)
    for r in rest_rows:
        rest_key = rest_key * base + id_of[r]
    rest_cols = []
    for j in range(n):
        col = np.zeros_like(rest)
        for i, r in enumerate(rest_rows, start=1):
            col |= ((r >> j) & 1) << i
        rest_cols.append(col)

    total = 0
    for cid in range(base):
        keys = []
        for p in patterns[id_of == cid].tolist():
            col_key = np.zeros_like(rest)
            for j in range(n):
                col_key = col_key * base + id_of[rest_cols[j] | ((p >> j) & 1)]
            keys.append((cid * base ** (n - 1) + rest_key) * base**n + col_key)
        total += len(np.unique(np.concatenate(keys)))
    return total


def clue_set_table_row(n: int, max_n: int = 5) -> tuple[int, int, float]:
    """``(|boards|, |valid clue sets|, ratio)`` for side ``n``."""
    boards = count_boards(n)
    valid = count_valid_clue_sets(n, max_n=max_n)
    return boards, valid, valid / boards

