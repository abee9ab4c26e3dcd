"""The eight reflections of a square board and their action on clue sets.

Each reflection is an optional transpose followed by optional reversals of
the row order and of the column order. The two-letter names read "rows then
columns", an upper-case letter meaning that axis is traversed in reverse.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .core import ClueSet


class Reflection(Enum):
    rc = "rc"  # identity
    cr = "cr"  # transpose
    rC = "rC"  # reverse column order
    Rc = "Rc"  # reverse row order
    cR = "cR"  # transpose, then reverse column order
    Cr = "Cr"  # transpose, then reverse row order
    RC = "RC"  # reverse both
    CR = "CR"  # transpose, then reverse both

    @property
    def transpose(self) -> bool:
        return self.value[0] in "cC"

    @property
    def flip_rows(self) -> bool:
        return self.value[0].isupper()

    @property
    def flip_cols(self) -> bool:
        return self.value[1].isupper()

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, name: str) -> "Reflection":
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown reflection {name!r}; expected one of {[r.value for r in cls]}") from None


IDENTITY = Reflection.rc
DIAGONAL = Reflection.cr  # g
VERTICAL = Reflection.Rc  # f_v, reverses row order
HORIZONTAL = Reflection.rC  # f_h, reverses column order

# identity first, so ensembles try the unreflected puzzle before anything else
ALL = tuple(Reflection)


def apply_to_board(r: Reflection, board: np.ndarray) -> np.ndarray:
    """Reflect any square 2-D array (boards, partial boards, probability grids)."""
    a = np.asarray(board)
    if r.transpose:
        a = a.T
    if r.flip_rows:
        a = a[::-1, :]
    if r.flip_cols:
        a = a[:, ::-1]
    return np.ascontiguousarray(a)


def apply_to_clues(r: Reflection, clues: ClueSet) -> ClueSet:
    rows, cols = clues.rows, clues.cols
    if r.transpose:
        rows, cols = cols, rows
    if r.flip_rows:
        rows = rows[::-1]
        cols = tuple(c[::-1] for c in cols)
    if r.flip_cols:
        cols = cols[::-1]
        rows = tuple(c[::-1] for c in rows)
    return ClueSet(rows, cols)


def _build_table() -> dict[tuple[Reflection, Reflection], Reflection]:
    # identify each product by where it sends the cells of a labelled probe
    probe = np.arange(9).reshape(3, 3)
    images = {apply_to_board(r, probe).tobytes(): r for r in Reflection}
    if len(images) != 8:
        raise AssertionError("reflections are not distinct on the probe board")
    table = {}
    for a in Reflection:
        for b in Reflection:
            table[a, b] = images[apply_to_board(a, apply_to_board(b, probe)).tobytes()]
    return table


_TABLE = _build_table()
_INVERSE = {a: next(b for b in Reflection if _TABLE[a, b] is IDENTITY) for a in Reflection}


def compose(r1: Reflection, r2: Reflection) -> Reflection:
    """Group product ``r1 o r2``: apply ``r2`` first, then ``r1``."""
    return _TABLE[r1, r2]


def inverse(r: Reflection) -> Reflection:
    return _INVERSE[r]


def composition_table() -> dict[tuple[Reflection, Reflection], Reflection]:
    return dict(_TABLE)
