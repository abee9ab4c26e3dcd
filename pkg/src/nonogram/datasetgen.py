"""Puzzle datasets from random noise, random line drawings and grayscale images.

Images are 8-bit PGM (P2 or P5). Each image is deduplicated by average hash,
box-scaled to n x n and binarized three ways (threshold 128, Otsu, inverted
Otsu). Image-derived boards are split 80/20 into train/test by source image;
random boards always go to train.

On-disk layout::

    <root>/manifest.json
    <root>/{train,test}/<id>.puzzle.json
    <root>/{train,test}/<id>.board.txt
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import FILLED, ClueSet, encode_board, is_solution, read_board, read_puzzle, write_board, write_puzzle

log = logging.getLogger(__name__)

FIGURE_KINDS = ("line", "rectangle", "circle")
MIN_FIGURES, MAX_FIGURES = 1, 4
BINARIZATIONS = ("fixed128", "otsu", "otsu_inverted")
TRAIN_FRACTION = 0.8


# ---------------------------------------------------------------------------
# Random boards


def random_noise_board(n: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.random((n, n)) < 0.5).astype(np.int8)


def draw_line(board: np.ndarray, r0: int, c0: int, r1: int, c1: int) -> None:
    """Bresenham segment, endpoints included."""
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        board[r, c] = FILLED
        if r == r1 and c == c1:
            return
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


def draw_rectangle(board: np.ndarray, r0: int, c0: int, r1: int, c1: int) -> None:
    """One-cell outline of the rectangle with opposite corners (r0, c0), (r1, c1)."""
    top, bottom = sorted((r0, r1))
    left, right = sorted((c0, c1))
    board[top, left:right + 1] = FILLED
    board[bottom, left:right + 1] = FILLED
    board[top:bottom + 1, left] = FILLED
    board[top:bottom + 1, right] = FILLED


def draw_circle(board: np.ndarray, rc: int, cc: int, radius: int) -> None:
    """Midpoint circle outline, clipped to the board."""
    n = board.shape[0]

    def plot(r, c):
        if 0 <= r < n and 0 <= c < n:
            board[r, c] = FILLED

    x, y = radius, 0
    err = 1 - radius
    while x >= y:
        for dr, dc in ((y, x), (x, y), (x, -y), (y, -x), (-y, -x), (-x, -y), (-x, y), (-y, x)):
            plot(rc + dr, cc + dc)
        y += 1
        if err < 0:
            err += 2 * y + 1
        else:
            x -= 1
            err += 2 * (y - x) + 1


def random_figures_board(n: int, rng: np.random.Generator) -> np.ndarray:
    """1-4 random lines, rectangle outlines and circle outlines on an empty board."""
    if n < 2:
        raise ValueError("figure boards need n >= 2")
    board = np.zeros((n, n), dtype=np.int8)
    for _ in range(int(rng.integers(MIN_FIGURES, MAX_FIGURES + 1))):
        kind = FIGURE_KINDS[int(rng.integers(len(FIGURE_KINDS)))]
        if kind == "circle":
            r, c = (int(v) for v in rng.integers(0, n, size=2))
            draw_circle(board, r, c, int(rng.integers(1, n // 2 + 1)))
        else:
            r0, c0, r1, c1 = (int(v) for v in rng.integers(0, n, size=4))
            (draw_line if kind == "line" else draw_rectangle)(board, r0, c0, r1, c1)
    return board


# ---------------------------------------------------------------------------
# Images


@dataclass
class GrayImage:
    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(f"pixel array {self.pixels.shape} does not match {self.height}x{self.width}")

    @classmethod
    def from_array(cls, pixels) -> "GrayImage":
        a = np.asarray(pixels)
        if a.ndim != 2 or a.size == 0:
            raise ValueError("expected a non-empty 2-D array")
        return cls(a.shape[1], a.shape[0], np.clip(a, 0, 255).astype(np.uint8))


def _pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(int(data[start:pos]))
    return tokens, pos


def parse_pgm(data: bytes) -> GrayImage:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"not a P2/P5 PGM file (magic {magic!r})")
    (width, height, maxval), pos = _pgm_tokens(data[2:], 3)
    pos += 2
    if not 0 < maxval < 256:
        raise ValueError(f"only 8-bit PGM is supported (maxval {maxval})")
    if magic == b"P5":
        raw = data[pos + 1:pos + 1 + width * height]
        if len(raw) != width * height:
            raise ValueError("truncated PGM raster")
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
    else:
        values = data[pos:].split()
        if len(values) < width * height:
            raise ValueError("truncated PGM raster")
        pixels = np.array([int(v) for v in values[:width * height]]).reshape(height, width)
    if maxval != 255:
        pixels = np.rint(pixels.astype(np.float64) * 255 / maxval)
    return GrayImage(width, height, pixels.astype(np.uint8))


def read_pgm(path) -> GrayImage:
    return parse_pgm(Path(path).read_bytes())


def write_pgm(img: GrayImage, path, binary: bool = True) -> None:
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n255\n".encode()
    if binary:
        body = np.asarray(img.pixels, dtype=np.uint8).tobytes()
    else:
        body = ("\n".join(" ".join(str(int(v)) for v in row) for row in img.pixels) + "\n").encode()
    Path(path).write_bytes(header + body)


def _area_weights(src: int, dst: int) -> np.ndarray:
    # w[i, k]: share of output cell i covered by input cell k, rows sum to 1
    w = np.zeros((dst, src))
    for i in range(dst):
        lo, hi = i * src / dst, (i + 1) * src / dst
        for k in range(int(np.floor(lo)), min(int(np.ceil(hi)), src)):
            w[i, k] = min(hi, k + 1) - max(lo, k)
    return w / w.sum(axis=1, keepdims=True)


def box_resample(pixels: np.ndarray, height: int, width: int) -> np.ndarray:
    """Area-average resampling to ``height x width`` (float result)."""
    p = np.asarray(pixels, dtype=np.float64)
    return _area_weights(p.shape[0], height) @ p @ _area_weights(p.shape[1], width).T


def scale_image(img: GrayImage, n: int) -> GrayImage:
    """Box-filter to n x n, rounding halves up."""
    if img.width == n and img.height == n:
        return GrayImage(n, n, img.pixels.copy())
    out = np.floor(box_resample(img.pixels, n, n) + 0.5)
    return GrayImage(n, n, np.clip(out, 0, 255).astype(np.uint8))


def otsu_threshold(pixels: np.ndarray) -> Optional[int]:
    """Smallest t maximising between-class variance of {<= t} vs {> t}; None if no split exists."""
    hist = np.bincount(np.asarray(pixels, dtype=np.int64).ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    levels = np.arange(256)
    w0 = np.cumsum(hist)
    w1 = total - w0
    s0 = np.cumsum(hist * levels)
    mu0 = np.divide(s0, w0, out=np.zeros(256), where=w0 > 0)
    mu1 = np.divide(s0[-1] - s0, w1, out=np.zeros(256), where=w1 > 0)
    var = w0 * w1 * (mu0 - mu1) ** 2
    var[(w0 == 0) | (w1 == 0)] = -1.0
    if var.max() <= 0:
        return None
    return int(np.argmax(var))


def binarize_image(img: GrayImage, method: str) -> np.ndarray:
    if img.width != img.height:
        raise ValueError("scale the image to n x n first")
    p = np.asarray(img.pixels)
    if method == "fixed128":
        return (p >= 128).astype(np.int8)
    if method in ("otsu", "otsu_inverted"):
        t = otsu_threshold(p)
        board = np.zeros(p.shape, dtype=np.int8) if t is None else (p > t).astype(np.int8)
        return 1 - board if method == "otsu_inverted" else board
    raise ValueError(f"unknown binarization {method!r}; expected one of {BINARIZATIONS}")


def average_hash(img: GrayImage) -> int:
    """64-bit average hash: 8x8 area average, bit set where a cell exceeds the mean, MSB first."""
    small = box_resample(img.pixels, 8, 8).ravel()
    bits = small > small.mean()
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


# ---------------------------------------------------------------------------
# Dataset assembly


@dataclass
class DatasetSpec:
    n: int
    noise: int = 0
    figures: int = 0
    seed: int = 0
    root: str = "dataset"

    def __post_init__(self):
        if self.n < 1 or self.noise < 0 or self.figures < 0:
            raise ValueError("n must be >= 1 and counts non-negative")
        if self.figures and self.n < 2:
            raise ValueError("figure boards need n >= 2")


@dataclass
class Record:
    id: str
    split: str
    source: str  # noise | figures | image
    transform: Optional[str] = None  # image binarization (a "canny" tag is reserved)
    image: Optional[str] = None
    hash: Optional[str] = None


def generate_dataset(spec: DatasetSpec, images: Sequence = ()) -> dict:
    """Build and write a dataset; returns the manifest that is also saved to disk."""
    root = Path(spec.root)
    for split in ("train", "test"):
        (root / split).mkdir(parents=True, exist_ok=True)
    records: list[Record] = []
    boards: dict[str, np.ndarray] = {}
    skipped = []

    survivors = []
    seen_hashes = set()
    for path in images:
        try:
            img = read_pgm(path)
        except (OSError, ValueError) as exc:
            log.warning("skipping %s: %s", path, exc)
            skipped.append({"image": str(path), "reason": str(exc)})
            continue
        h = average_hash(img)
        if h in seen_hashes:
            skipped.append({"image": str(path), "reason": "duplicate average hash"})
            continue
        seen_hashes.add(h)
        survivors.append((str(path), h, img))

    order = list(range(len(survivors)))
    random.Random(spec.seed).shuffle(order)
    n_train = int(round(TRAIN_FRACTION * len(survivors)))
    train_images = set(order[:n_train])
    for idx, (path, h, img) in enumerate(survivors):
        scaled = scale_image(img, spec.n)
        split = "train" if idx in train_images else "test"
        for method in BINARIZATIONS:
            rid = f"image-{idx:06d}-{method}"
            boards[rid] = binarize_image(scaled, method)
            records.append(Record(rid, split, "image", method, path, f"{h:016x}"))

    for i in range(spec.noise):
        rid = f"noise-{i:06d}"
        boards[rid] = random_noise_board(spec.n, np.random.default_rng([spec.seed, 0, i]))
        records.append(Record(rid, "train", "noise"))
    for i in range(spec.figures):
        rid = f"figures-{i:06d}"
        boards[rid] = random_figures_board(spec.n, np.random.default_rng([spec.seed, 1, i]))
        records.append(Record(rid, "train", "figures"))

    for rec in records:
        board = boards[rec.id]
        clues = encode_board(board)
        write_puzzle(clues, root / rec.split / f"{rec.id}.puzzle.json")
        write_board(board, root / rec.split / f"{rec.id}.board.txt")

    manifest = {
        "spec": asdict(spec),
        "seed": spec.seed,
        "generator": {"figure_count": [MIN_FIGURES, MAX_FIGURES], "figure_kinds": list(FIGURE_KINDS),
                      "circle_radius": [1, "n // 2"], "binarizations": list(BINARIZATIONS),
                      "train_fraction": TRAIN_FRACTION},
        "records": [asdict(r) for r in records],
        "skipped": skipped,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest


@dataclass
class DatasetRecord:
    id: str
    clues: ClueSet
    board: np.ndarray
    meta: dict = field(default_factory=dict)


def load_dataset(root, split: Optional[str] = "train", verify: bool = True) -> list[DatasetRecord]:
    """Records of one split (or all splits when ``split`` is None), in manifest order."""
    root = Path(root)
    manifest = json.loads((root / "manifest.json").read_text())
    out = []
    for meta in manifest["records"]:
        if split is not None and meta["split"] != split:
            continue
        base = root / meta["split"] / meta["id"]
        clues = read_puzzle(f"{base}.puzzle.json")
        board = read_board(f"{base}.board.txt")
        if verify and not is_solution(board, clues):
            raise ValueError(f"record {meta['id']}: board does not match its clues")
        out.append(DatasetRecord(meta["id"], clues, board, meta))
    return out


def iter_pairs(records: Iterable[DatasetRecord]):
    for r in records:
        yield r.clues, r.board
