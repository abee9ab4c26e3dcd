"""Fully connected clue -> board network, written directly on numpy.

The input is every row clue followed by every column clue, each left-padded
with zeros to ``lm = (n + 1) // 2`` slots and scaled by ``1/n``. Hidden
layers use ReLU with inverted dropout; the output layer is a sigmoid over the
``n * n`` cells in row-major order. Training minimises mean binary
cross-entropy with Adam.

Weights file layout (little-endian)::

    b"NONOMLP1"
    n u32, lm u32, layer count u32, layer sizes u32 * count
    dropout f64, input-scale flag u8, precision flag u8 (0 = f64, 1 = f32)
    per layer: weight matrix (fan_in x fan_out, row-major), bias vector
    CRC-32 of every preceding byte, u32
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import FILLED, ClueSet, is_solution
from .solver import binarize
from .symmetry import ALL as ALL_REFLECTIONS
from .symmetry import Reflection, apply_to_board, apply_to_clues, inverse

WEIGHTS_MAGIC = b"NONOMLP1"
WEIGHTS_VERSION = 1

# hidden layers, dropout and learning rate of the best networks per board size
FULL_SIZE_ARCHITECTURES = {
    5: ((2048, 1024, 256), 0.05, 1e-3),
    10: ((2048, 1024, 1024, 1024, 512), 0.05, 1e-4),
    15: ((2048, 1024, 1024, 1024, 512), 0.05, 1e-4),
}


class WeightsFormatError(ValueError):
    pass


class WeightsChecksumError(WeightsFormatError):
    pass


class WeightsVersionError(WeightsFormatError):
    pass


def header_slots(n: int) -> int:
    """Maximum number of blocks a line of length n can hold."""
    return (n + 1) // 2


def vectorize_clues(clues: ClueSet, scale: bool = True) -> np.ndarray:
    n = clues.n
    lm = header_slots(n)
    out = np.zeros(2 * n * lm, dtype=np.float64)
    for i, clue in enumerate(clues.rows + clues.cols):
        if len(clue) > lm:
            raise ValueError(f"clue {clue} has more than {lm} blocks")
        if clue:
            out[(i + 1) * lm - len(clue):(i + 1) * lm] = clue
    return out / n if scale else out


@dataclass
class MlpModel:
    n: int
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout_rate: float = 0.0
    input_scale: bool = True

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if self.layer_sizes[0] != 2 * self.lm * self.n or self.layer_sizes[-1] != self.n * self.n:
            raise ValueError(f"layer sizes {self.layer_sizes} do not fit an n={self.n} board")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        for (a, b), w, bias in zip(zip(self.layer_sizes, self.layer_sizes[1:]), self.weights, self.biases):
            if w.shape != (a, b) or bias.shape != (b,):
                raise ValueError("parameter shapes do not match layer sizes")

    @property
    def lm(self) -> int:
        return header_slots(self.n)

    @classmethod
    def create(cls, n: int, hidden: Sequence[int], seed: int = 0, dropout_rate: float = 0.0) -> "MlpModel":
        """He-initialised weights, zero biases."""
        rng = np.random.default_rng(seed)
        sizes = (2 * header_slots(n) * n, *hidden, n * n)
        weights = [rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)) for a, b in zip(sizes, sizes[1:])]
        biases = [np.zeros(b) for b in sizes[1:]]
        return cls(n, sizes, weights, biases, dropout_rate)

    @classmethod
    def full_size(cls, n: int, seed: int = 0) -> "MlpModel":
        hidden, dropout, _ = FULL_SIZE_ARCHITECTURES[n]
        return cls.create(n, hidden, seed, dropout)

    def copy(self) -> "MlpModel":
        return MlpModel(self.n, self.layer_sizes, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.dropout_rate, self.input_scale)

    def num_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _trace(model: MlpModel, x: np.ndarray, rng: Optional[np.random.Generator]):
    """Forward pass keeping what backprop needs. Dropout is active iff rng is given."""
    acts = [x]
    masks = []
    a = x
    last = len(model.weights) - 1
    keep = 1.0 - model.dropout_rate
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        if i == last:
            return acts, masks, z
        a = np.maximum(z, 0.0)
        mask = None
        if rng is not None and model.dropout_rate > 0:
            mask = (rng.random(a.shape) < keep) / keep
            a = a * mask
        masks.append(mask)
        acts.append(a)
    raise AssertionError("model has no layers")


def forward(model: MlpModel, x: np.ndarray, inference_mode: bool = True,
            rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Output probabilities for one input vector or a batch (rows)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.layer_sizes[0]:
        raise ValueError(f"input width {x.shape[-1]} != {model.layer_sizes[0]}")
    if not inference_mode and rng is None:
        rng = np.random.default_rng()
    _, _, logits = _trace(model, x, None if inference_mode else rng)
    return _sigmoid(logits)


def bce_from_logits(logits: np.ndarray, targets: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, logits) - targets * logits))


def loss_and_gradients(model: MlpModel, X: np.ndarray, Y: np.ndarray,
                       rng: Optional[np.random.Generator] = None):
    """Mean BCE over a batch and its gradients ``(loss, grad_weights, grad_biases)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    acts, masks, logits = _trace(model, X, rng)
    loss = bce_from_logits(logits, Y)
    delta = (_sigmoid(logits) - Y) / Y.size
    gw = [None] * len(model.weights)
    gb = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i == 0:
            break
        delta = delta @ model.weights[i].T
        if masks[i - 1] is not None:
            delta = delta * masks[i - 1]
        delta = delta * (acts[i] > 0)
    return loss, gw, gb


def gradient_check(model: MlpModel, X: np.ndarray, Y: np.ndarray, step: float = 1e-5,
                   floor: float = 1e-7) -> float:
    """Largest relative gap between backprop and central differences over all parameters.

    Relative error is ``|a - b| / max(|a|, |b|, floor)``; the floor keeps
    gradients that are zero up to rounding from dominating.
    """
    _, gw, gb = loss_and_gradients(model, X, Y)
    worst = 0.0
    for params, grads in ((model.weights, gw), (model.biases, gb)):
        for p, g in zip(params, grads):
            flat = p.reshape(-1)
            gflat = g.reshape(-1)
            for idx in range(flat.size):
                old = flat[idx]
                flat[idx] = old + step
                up = loss_and_gradients(model, X, Y)[0]
                flat[idx] = old - step
                down = loss_and_gradients(model, X, Y)[0]
                flat[idx] = old
                numeric = (up - down) / (2 * step)
                denom = max(abs(numeric), abs(gflat[idx]), floor)
                worst = max(worst, abs(numeric - gflat[idx]) / denom)
    return worst


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 64
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    augment_reflections: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass
class TrainResult:
    model: MlpModel
    history: list[float] = field(default_factory=list)
    samples: int = 0


def reflected_samples(samples: Iterable[tuple[ClueSet, np.ndarray]]) -> list[tuple[ClueSet, np.ndarray]]:
    """All eight reflections of every sample, without duplicates."""
    seen = set()
    out = []
    for clues, board in samples:
        for r in ALL_REFLECTIONS:
            c = apply_to_clues(r, clues)
            b = apply_to_board(r, board)
            key = (c, b.tobytes())
            if key not in seen:
                seen.add(key)
                out.append((c, b))
    return out


def samples_to_arrays(model: MlpModel, samples) -> tuple[np.ndarray, np.ndarray]:
    X, Y = [], []
    for clues, board in samples:
        if clues.n != model.n or np.shape(board) != (model.n, model.n):
            raise ValueError(f"sample of size {clues.n} does not fit an n={model.n} model")
        X.append(vectorize_clues(clues, model.input_scale))
        Y.append((np.asarray(board) == FILLED).reshape(-1))
    return np.array(X), np.array(Y, dtype=np.float64)


def train(model: MlpModel, samples, config: TrainConfig) -> TrainResult:
    """Mini-batch Adam on mean BCE. Returns a trained copy and per-epoch loss."""
    samples = list(samples)
    if not samples:
        raise ValueError("empty training set")
    if config.augment_reflections:
        samples = reflected_samples(samples)
    X, Y = samples_to_arrays(model, samples)
    model = model.copy()
    rng = np.random.default_rng(config.seed)
    params = model.weights + model.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps, lr = config.adam_beta1, config.adam_beta2, config.adam_epsilon, config.learning_rate
    step = 0
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, gw, gb = loss_and_gradients(model, X[idx], Y[idx], rng)
            total += loss * len(idx)
            step += 1
            for p, g, mi, vi in zip(params, gw + gb, m, v):
                mi *= b1
                mi += (1 - b1) * g
                vi *= b2
                vi += (1 - b2) * g * g
                mhat = mi / (1 - b1**step)
                vhat = vi / (1 - b2**step)
                p -= lr * mhat / (np.sqrt(vhat) + eps)
        history.append(total / len(X))
    return TrainResult(model, history, len(X))


def predict(model: MlpModel, clues: ClueSet) -> np.ndarray:
    if clues.n != model.n:
        raise ValueError(f"puzzle has n={clues.n} but the model expects n={model.n}")
    out = forward(model, vectorize_clues(clues, model.input_scale), inference_mode=True)
    return out.reshape(model.n, model.n)


class MlpPredictor:
    """Adapter exposing a model through the solvers' ``predict(clues)`` interface."""

    def __init__(self, model: MlpModel):
        self.model = model
        self.n = model.n

    def predict(self, clues: ClueSet) -> np.ndarray:
        return predict(self.model, clues)


def predict_reflections(predictor, clues: ClueSet) -> list[tuple[Reflection, np.ndarray]]:
    """Prediction for each reflected puzzle, mapped back to the original orientation."""
    out = []
    for r in ALL_REFLECTIONS:
        grid = np.asarray(predictor.predict(apply_to_clues(r, clues)))
        out.append((r, apply_to_board(inverse(r), grid)))
    return out


def direct_solve_rates(predictor, puzzles: Sequence[ClueSet]) -> tuple[float, float]:
    """Fraction of puzzles solved outright by one prediction, and by any of the eight reflections."""
    single = ensemble = 0
    for clues in puzzles:
        preds = predict_reflections(predictor, clues)
        hits = [is_solution(binarize(g), clues) for _, g in preds]
        single += hits[0]
        ensemble += any(hits)
    return single / len(puzzles), ensemble / len(puzzles)


def accuracy(model: MlpModel, samples) -> tuple[float, float]:
    """Per-cell and whole-board agreement between binarized predictions and the target boards."""
    X, Y = samples_to_arrays(model, samples)
    pred = forward(model, X) >= 0.5
    correct = pred == (Y > 0.5)
    return float(correct.mean()), float(correct.all(axis=1).mean())


# ---------------------------------------------------------------------------
# Weights files


def save_weights(model: MlpModel, path, precision: str = "f64") -> None:
    if precision not in ("f64", "f32"):
        raise ValueError("precision must be 'f64' or 'f32'")
    dtype = "<f8" if precision == "f64" else "<f4"
    sizes = model.layer_sizes
    parts = [WEIGHTS_MAGIC, struct.pack(f"<III{len(sizes)}I", model.n, model.lm, len(sizes), *sizes),
             struct.pack("<dBB", model.dropout_rate, int(model.input_scale), int(precision == "f32"))]
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype=dtype).tobytes())
        parts.append(np.ascontiguousarray(b, dtype=dtype).tobytes())
    payload = b"".join(parts)
    Path(path).write_bytes(payload + struct.pack("<I", zlib.crc32(payload)))


def load_weights(path) -> MlpModel:
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:7] != WEIGHTS_MAGIC[:7]:
        raise WeightsFormatError(f"{path}: not a weights file")
    if data[:8] != WEIGHTS_MAGIC:
        raise WeightsVersionError(f"{path}: unsupported weights version {data[7:8]!r}")
    try:
        n, lm, count = struct.unpack_from("<III", data, 8)
        offset = 20
        sizes = struct.unpack_from(f"<{count}I", data, offset)
        offset += 4 * count
        dropout, scale_flag, precision_flag = struct.unpack_from("<dBB", data, offset)
        offset += 10
    except struct.error:
        raise WeightsFormatError(f"{path}: truncated header") from None
    if precision_flag not in (0, 1):
        raise WeightsChecksumError(f"{path}: bad precision flag (corrupted file?)")
    itemsize = 8 if precision_flag == 0 else 4
    expected = offset + itemsize * sum(a * b + b for a, b in zip(sizes, sizes[1:])) + 4
    if len(data) < expected:
        raise WeightsFormatError(f"{path}: truncated ({len(data)} of {expected} bytes)")
    if len(data) > expected:
        raise WeightsFormatError(f"{path}: {len(data) - expected} unexpected trailing bytes")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise WeightsChecksumError(f"{path}: checksum mismatch")
    if lm != header_slots(n):
        raise WeightsFormatError(f"{path}: header slots {lm} inconsistent with n={n}")
    dtype = "<f8" if precision_flag == 0 else "<f4"
    weights, biases = [], []
    for a, b in zip(sizes, sizes[1:]):
        w = np.frombuffer(data, dtype=dtype, count=a * b, offset=offset).reshape(a, b)
        offset += itemsize * a * b
        bias = np.frombuffer(data, dtype=dtype, count=b, offset=offset)
        offset += itemsize * b
        weights.append(w.astype(np.float64))
        biases.append(bias.astype(np.float64))
    return MlpModel(n, sizes, weights, biases, dropout, bool(scale_flag))
