"""Propagation + depth-first search solvers, optionally guided by a predictor.

Variants:

========  =========  =========  ===========  =============
name      network    intuition  reflections  partial erase
========  =========  =========  ===========  =============
H         no         no         no           no
NeHI      yes        yes        no           no
Ne8HI     yes        yes        yes          no
NeHPF     yes        no         no           yes
Ne8HPF    yes        no         yes          yes
NeHPFI    yes        yes        no           yes
Ne8HPFI   yes        yes        yes          yes
========  =========  =========  ===========  =============

Internally the search keeps every row and column as a pair of bitmasks
(filled, known) plus the list of clue placements still compatible with it.
"""

from __future__ import annotations

import random
import time
from collections import deque
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .core import EMPTY, FILLED, UNKNOWN, ClueSet, encode_line, format_board, is_solution, line_masks
from .symmetry import ALL as ALL_REFLECTIONS
from .symmetry import Reflection, apply_to_board, apply_to_clues, inverse

PHASE_DIRECT = "direct-prediction"
PHASE_PARTIAL = "partial-erase-search"
PHASE_FULL = "full-search"
PHASE_GENETIC = "genetic"

SOLVED = "solved"
UNSATISFIABLE = "unsatisfiable"
LIMIT = "limit"

# name -> (network, intuition, reflections, partial erase)
VARIANTS = {
    "H": (False, False, False, False),
    "NeHI": (True, True, False, False),
    "Ne8HI": (True, True, True, False),
    "NeHPF": (True, False, False, True),
    "Ne8HPF": (True, False, True, True),
    "NeHPFI": (True, True, False, True),
    "Ne8HPFI": (True, True, True, True),
}


class Predictor(Protocol):
    """Anything that maps a clue set to an n x n grid of fill probabilities."""

    def predict(self, clues: ClueSet) -> np.ndarray: ...


@dataclass
class SolverConfig:
    variant: str = "H"
    seed: int = 0
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    # evaluation only: also erase lines that differ from a supplied ground truth
    truth_erase: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {list(VARIANTS)}")

    @property
    def uses_network(self) -> bool:
        return VARIANTS[self.variant][0]

    @property
    def intuition(self) -> bool:
        return VARIANTS[self.variant][1]

    @property
    def use_reflections(self) -> bool:
        return VARIANTS[self.variant][2]

    @property
    def partial_erase(self) -> bool:
        return VARIANTS[self.variant][3]


@dataclass
class SolveReport:
    solution: Optional[np.ndarray]
    status: str
    phase: Optional[str] = None
    iterations: int = 0
    backtracks: int = 0
    elapsed: float = 0.0
    prediction_errors: Optional[int] = None
    variant: str = "H"
    seed: int = 0
    reflection: Optional[str] = None

    @property
    def solved(self) -> bool:
        return self.status == SOLVED

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "solution"}
        d["solution"] = None if self.solution is None else format_board(self.solution).split()
        return d


class LimitExceeded(Exception):
    pass


# ---------------------------------------------------------------------------
# Search engine


@dataclass
class _Stats:
    iterations: int = 0
    backtracks: int = 0
    node_limit: Optional[int] = None
    deadline: Optional[float] = None

    def tick(self):
        self.iterations += 1
        if self.node_limit is not None and self.iterations > self.node_limit:
            raise LimitExceeded(f"node limit {self.node_limit} reached")
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise LimitExceeded("time limit reached")


class _Search:
    """One DFS run over a clue set, from an optional partially-known board.

    State is a list ``[masks_f, masks_k, compat]`` where each entry is indexed
    by line id: rows are ``0..n-1``, columns ``n..2n-1``.
    """

    def __init__(self, clues: ClueSet, stats: _Stats, hint: Optional[np.ndarray] = None,
                 rng: Optional[random.Random] = None):
        self.n = n = clues.n
        self.full = (1 << n) - 1
        self.stats = stats
        self.rng = rng or random.Random(0)
        self.all_masks = [line_masks(n, c) for c in clues.rows + clues.cols]
        self.hint = None
        if hint is not None:
            f, k = _board_line_masks(hint)
            self.hint = (f, k)

    def initial_state(self, start: Optional[np.ndarray] = None):
        n = self.n
        if start is None:
            f = [0] * (2 * n)
            k = [0] * (2 * n)
        else:
            f, k = _board_line_masks(start)
        return [f, k, list(self.all_masks)]

    def propagate(self, st, dirty) -> bool:
        """Line-solve to a fixpoint. False on contradiction."""
        self.stats.tick()
        f, k, compat = st
        n, full = self.n, self.full
        queue = deque(dirty)
        queued = set(dirty)
        while queue:
            i = queue.popleft()
            queued.discard(i)
            fi, ki = f[i], k[i]
            cand = [m for m in compat[i] if not (m ^ fi) & ki]
            if not cand:
                return False
            compat[i] = cand
            always, ever = full, 0
            for m in cand:
                always &= m
                ever |= m
            new = (always | (full & ~ever)) & ~ki
            if not new:
                continue
            f[i] = fi | (always & new)
            k[i] = ki | new
            # cross line index base and the bit of line i inside each crossing line
            base, bit = (n, 1 << i) if i < n else (0, 1 << (i - n))
            while new:
                low = new & -new
                j = low.bit_length() - 1
                new ^= low
                x = base + j
                k[x] |= bit
                if always & low:
                    f[x] |= bit
                if x not in queued:
                    queued.add(x)
                    queue.append(x)
        return True

    def _order(self, i: int, cand: list[int]) -> list[int]:
        if self.hint is None:
            return cand
        hf, hk = self.hint[0][i], self.hint[1][i]
        if not hk:
            return cand
        rnd = self.rng.random
        return sorted(cand, key=lambda m: (((m ^ hf) & hk).bit_count(), rnd()))

    def _branch_line(self, st) -> int:
        f, k, compat = st
        best, best_count = -1, None
        for i in range(2 * self.n):
            if k[i] != self.full:
                c = len(compat[i])
                if best_count is None or c < best_count:
                    best, best_count = i, c
        return best

    def _child(self, st, i: int, m: int):
        f, k, compat = st
        f, k, compat = list(f), list(k), list(compat)
        new = self.full & ~k[i]
        f[i], k[i], compat[i] = m, self.full, [m]
        n = self.n
        base, bit = (n, 1 << i) if i < n else (0, 1 << (i - n))
        dirty = []
        while new:
            low = new & -new
            j = low.bit_length() - 1
            new ^= low
            k[base + j] |= bit
            if m & low:
                f[base + j] |= bit
            dirty.append(base + j)
        return [f, k, compat], dirty

    def dfs(self, st):
        i = self._branch_line(st)
        if i < 0:
            return st
        for m in self._order(i, st[2][i]):
            child, dirty = self._child(st, i, m)
            if self.propagate(child, dirty):
                found = self.dfs(child)
                if found is not None:
                    return found
            self.stats.backtracks += 1
        return None

    def run(self, start: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
        st = self.initial_state(start)
        if not self.propagate(st, range(2 * self.n)):
            return None
        found = self.dfs(st)
        return None if found is None else self.to_board(found)

    def iter_solutions(self, st):
        i = self._branch_line(st)
        if i < 0:
            yield self.to_board(st)
            return
        for m in st[2][i]:
            child, dirty = self._child(st, i, m)
            if self.propagate(child, dirty):
                yield from self.iter_solutions(child)

    def to_board(self, st) -> np.ndarray:
        f = st[0]
        n = self.n
        return np.array([[(f[i] >> j) & 1 for j in range(n)] for i in range(n)], dtype=np.int8)


def _board_line_masks(board: np.ndarray) -> tuple[list[int], list[int]]:
    """Per-line (filled, known) masks: rows then columns."""
    b = np.asarray(board)
    n = b.shape[0]
    weights = 1 << np.arange(n, dtype=np.int64)
    filled = b == FILLED
    known = b != UNKNOWN
    f = (filled @ weights).tolist() + (filled.T @ weights).tolist()
    k = (known @ weights).tolist() + (known.T @ weights).tolist()
    return [int(x) for x in f], [int(x) for x in k]


# ---------------------------------------------------------------------------
# Prediction helpers


def binarize(grid: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Probabilities >= threshold become filled, everything else empty."""
    return (np.asarray(grid) >= threshold).astype(np.int8)


def intuition_board(grid: np.ndarray) -> np.ndarray:
    """Tri-state view of a prediction for path weighting; exactly 0.5 carries no signal."""
    g = np.asarray(grid, dtype=np.float64)
    out = np.full(g.shape, UNKNOWN, dtype=np.int8)
    out[g > 0.5] = FILLED
    out[g < 0.5] = EMPTY
    return out


def weight_combination(candidate: Sequence[int], predicted_line: Sequence[int]) -> int:
    """Cells where a candidate line disagrees with a predicted line; unknown predictions never count."""
    c = np.asarray(candidate)
    p = np.asarray(predicted_line)
    if c.shape != p.shape:
        raise ValueError("candidate and prediction differ in length")
    return int(np.count_nonzero((p != UNKNOWN) & (c != p)))


def inconsistent_lines(board: np.ndarray, clues: ClueSet) -> tuple[list[int], list[int]]:
    """Indices of rows and of columns whose encoding disagrees with their clue."""
    b = np.asarray(board)
    rows = [i for i, c in enumerate(clues.rows) if encode_line(b[i]) != c]
    cols = [j for j, c in enumerate(clues.cols) if encode_line(b[:, j]) != c]
    return rows, cols


def partial_erase(prediction: np.ndarray, clues: ClueSet, truth: Optional[np.ndarray] = None) -> np.ndarray:
    """Blank out every predicted row/column that contradicts its clue.

    With ``truth`` (evaluation only) lines that differ from it are erased too.
    """
    pred = np.asarray(prediction)
    if pred.shape != (clues.n, clues.n):
        raise ValueError(f"prediction shape {pred.shape} does not match n={clues.n}")
    out = pred.astype(np.int8).copy()
    rows, cols = inconsistent_lines(pred, clues)
    if truth is not None:
        t = np.asarray(truth)
        rows = sorted(set(rows) | set(np.flatnonzero((pred != t).any(axis=1)).tolist()))
        cols = sorted(set(cols) | set(np.flatnonzero((pred != t).any(axis=0)).tolist()))
    out[rows, :] = UNKNOWN
    out[:, cols] = UNKNOWN
    return out


def _predict(predictor: Predictor, clues: ClueSet) -> np.ndarray:
    grid = np.asarray(predictor.predict(clues), dtype=np.float64)
    if grid.shape != (clues.n, clues.n):
        raise ValueError(f"predictor returned shape {grid.shape} for an n={clues.n} puzzle")
    return grid


# ---------------------------------------------------------------------------
# Solvers


class _Run:
    """Bookkeeping shared by every stage of one solve call."""

    def __init__(self, clues: ClueSet, config: SolverConfig):
        self.clues = clues
        self.config = config
        self.start = time.perf_counter()
        deadline = None if config.time_limit is None else self.start + config.time_limit
        self.stats = _Stats(node_limit=config.node_limit, deadline=deadline)
        self.rng = random.Random(config.seed)

    def search(self, start=None, hint=None) -> Optional[np.ndarray]:
        return _Search(self.clues, self.stats, hint, self.rng).run(start)

    def report(self, solution, phase, status=None, **extra) -> SolveReport:
        if solution is not None and not is_solution(solution, self.clues):
            raise AssertionError("solver produced a board that does not match its clues")
        if status is None:
            status = SOLVED if solution is not None else UNSATISFIABLE
        return SolveReport(
            solution=solution, status=status, phase=phase if solution is not None else None,
            iterations=self.stats.iterations, backtracks=self.stats.backtracks,
            elapsed=time.perf_counter() - self.start, variant=self.config.variant,
            seed=self.config.seed, **extra,
        )


def _guarded(run: _Run, body) -> SolveReport:
    try:
        return body()
    except LimitExceeded:
        return run.report(None, None, status=LIMIT)


def solve_h(clues: ClueSet, config: Optional[SolverConfig] = None) -> SolveReport:
    """Trivial-cell propagation to a fixpoint, then DFS over the line with the fewest placements."""
    run = _Run(clues, config or SolverConfig())
    return _guarded(run, lambda: run.report(run.search(), PHASE_FULL))


def _guided(run: _Run, grid: np.ndarray, intuition: bool, erase: bool, truth, check_direct=True):
    clues = run.clues
    pred = binarize(grid)
    errors = None if truth is None else int(np.count_nonzero(pred != np.asarray(truth)))
    if check_direct and is_solution(pred, clues):
        return run.report(pred, PHASE_DIRECT, prediction_errors=errors)
    hint = intuition_board(grid) if intuition else None
    if erase:
        start = partial_erase(pred, clues, truth if run.config.truth_erase else None)
        sol = run.search(start, hint)
        if sol is not None:
            return run.report(sol, PHASE_PARTIAL, prediction_errors=errors)
        # full erase: restart from a blank board without the network
        return run.report(run.search(), PHASE_FULL, prediction_errors=errors)
    return run.report(run.search(None, hint), PHASE_FULL, prediction_errors=errors)


def solve_nehi(clues: ClueSet, predictor: Predictor, config: Optional[SolverConfig] = None,
               truth: Optional[np.ndarray] = None) -> SolveReport:
    """Direct prediction check, then DFS from a blank board with intuition-ordered branches."""
    run = _Run(clues, config or SolverConfig("NeHI"))
    return _guarded(run, lambda: _guided(run, _predict(predictor, clues), True, False, truth))


def solve_nehpf(clues: ClueSet, predictor: Predictor, config: Optional[SolverConfig] = None,
                truth: Optional[np.ndarray] = None) -> SolveReport:
    """Direct prediction, then search from the partially erased prediction, then from a blank board."""
    config = config or SolverConfig("NeHPF")
    run = _Run(clues, config)
    return _guarded(run, lambda: _guided(run, _predict(predictor, clues), config.intuition, True, truth))


def solve_ne8(clues: ClueSet, predictor: Predictor, config: Optional[SolverConfig] = None,
              truth: Optional[np.ndarray] = None) -> SolveReport:
    """Try the prediction on all eight reflections before falling back to the guided search.

    The fallback uses the reflection whose prediction violates the fewest
    clues, mapped back to the original orientation.
    """
    config = config or SolverConfig("Ne8HPFI")
    run = _Run(clues, config)

    def body():
        best = None
        for r in ALL_REFLECTIONS:
            reflected = apply_to_clues(r, clues)
            grid = _predict(predictor, reflected)
            pred = binarize(grid)
            if is_solution(pred, reflected):
                sol = apply_to_board(inverse(r), pred)
                errors = None if truth is None else int(np.count_nonzero(sol != np.asarray(truth)))
                return run.report(sol, PHASE_DIRECT, prediction_errors=errors, reflection=r.value)
            bad_rows, bad_cols = inconsistent_lines(pred, reflected)
            bad = len(bad_rows) + len(bad_cols)
            if best is None or bad < best[0]:
                best = (bad, r, grid)
        _, r, grid = best
        report = _guided(run, apply_to_board(inverse(r), grid), config.intuition, config.partial_erase,
                         truth, check_direct=False)
        report.reflection = r.value
        return report

    return _guarded(run, body)


def solve(clues: ClueSet, config: Optional[SolverConfig] = None, predictor: Optional[Predictor] = None,
          truth: Optional[np.ndarray] = None) -> SolveReport:
    """Dispatch on ``config.variant``."""
    config = config or SolverConfig()
    if not config.uses_network:
        return solve_h(clues, config)
    if predictor is None:
        raise ValueError(f"variant {config.variant} needs a predictor")
    if config.use_reflections:
        return solve_ne8(clues, predictor, config, truth)
    if config.partial_erase:
        return solve_nehpf(clues, predictor, config, truth)
    return solve_nehi(clues, predictor, config, truth)


def iter_solutions(clues: ClueSet, limit: Optional[int] = None):
    """Enumerate boards matching ``clues`` (at most ``limit`` of them)."""
    search = _Search(clues, _Stats())
    st = search.initial_state()
    if not search.propagate(st, range(2 * clues.n)):
        return
    for count, board in enumerate(search.iter_solutions(st), start=1):
        yield board
        if limit is not None and count >= limit:
            return


def count_solutions(clues: ClueSet, limit: Optional[int] = None) -> int:
    return sum(1 for _ in iter_solutions(clues, limit))
