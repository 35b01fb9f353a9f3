"""Symbol classes, symbol image batches and per-class image pools."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

IMAGE_SIDE = 28
IMAGE_SIZE = IMAGE_SIDE * IMAGE_SIDE

PLUS, MINUS, TIMES, DIVIDE = 10, 11, 12, 13
DIGIT_CLASSES = tuple(range(10))
OPERATOR_CLASSES = (PLUS, MINUS, TIMES, DIVIDE)
ALL_CLASSES = DIGIT_CLASSES + OPERATOR_CLASSES
OPERATOR_TEXT = {PLUS: "+", MINUS: "-", TIMES: "*", DIVIDE: "/"}

DATA_DIR_ENV = "NTPT_DATA_DIR"
MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class TaskDataError(Exception):
    """Base exception for task data problems."""

    pass


def symbol_text(symbol: int) -> str:
    """Printable form of a symbol class."""
    if symbol in OPERATOR_TEXT:
        return OPERATOR_TEXT[symbol]
    if 0 <= symbol < 10:
        return str(symbol)
    raise TaskDataError(f"Unknown symbol class {symbol}")


def parse_symbols(text: str) -> list[int]:
    """Symbol classes of an expression such as ``"3+4*2"``.

    Accepts ``-``, ``x`` and ``:`` as well as the unicode minus, times and
    divide signs.
    """
    aliases = {"−": MINUS, "x": TIMES, "×": TIMES, ":": DIVIDE, "÷": DIVIDE}
    by_text = {v: k for k, v in OPERATOR_TEXT.items()}
    symbols = []
    for char in text.replace(" ", ""):
        if char.isdigit():
            symbols.append(int(char))
        elif char in by_text:
            symbols.append(by_text[char])
        elif char in aliases:
            symbols.append(aliases[char])
        else:
            raise TaskDataError(f"Unknown symbol {char!r} in {text!r}")
    return symbols


@dataclass(frozen=True)
class SymbolBatch:
    """A batch of symbols: ground-truth classes and, optionally, their images.

    Attributes:
        classes: Symbol class per example, shape (B,).
        images: Flattened images in [0, 1], shape (B, 784), or None when
            only ground truth is available.
    """

    classes: np.ndarray
    images: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.classes)

    def take(self, index: np.ndarray | int) -> SymbolBatch:
        """Sub-batch at ``index`` (an int keeps a batch of one)."""
        index = np.atleast_1d(np.asarray(index))
        images = None if self.images is None else self.images[index]
        return SymbolBatch(self.classes[index], images)


class SourceKind(Enum):
    """Where symbol images come from."""

    SYNTHETIC = "synthetic"
    MNIST_IDX = "mnist_idx"


@dataclass
class SymbolSource:
    """Per-class image pools for one split.

    Attributes:
        kind: Source of the digit images.
        split: "train" or "test".
        pools: Images per class, each of shape (n, 784).
    """

    kind: SourceKind
    split: str
    pools: dict[int, np.ndarray]

    def classes(self) -> list[int]:
        """Classes with at least one image."""
        return sorted(c for c, pool in self.pools.items() if len(pool))

    def has_classes(self, classes: list[int] | tuple[int, ...]) -> bool:
        """Whether every class in ``classes`` has images."""
        available = set(self.classes())
        return all(c in available for c in classes)

    def sample(self, classes: np.ndarray, rng: np.random.Generator) -> SymbolBatch:
        """Draw one image of each requested class.

        Raises:
            TaskDataError: If a class has no images.
        """
        classes = np.asarray(classes, dtype=np.int64)
        images = np.empty((len(classes), IMAGE_SIZE))
        for i, symbol in enumerate(classes):
            pool = self.pools.get(int(symbol))
            if pool is None or not len(pool):
                raise TaskDataError(f"No {self.split} images for symbol {int(symbol)}")
            images[i] = pool[rng.integers(0, len(pool))]
        return SymbolBatch(classes, images)

    def labelled(self, classes: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        """All images of ``classes`` with their class labels."""
        present = [c for c in classes if c in self.pools]
        if not present:
            return np.empty((0, IMAGE_SIZE)), np.empty(0, dtype=np.int64)
        images = np.concatenate([self.pools[c] for c in present])
        labels = np.concatenate(
            [np.full(len(self.pools[c]), c, dtype=np.int64) for c in present]
        )
        return images, labels

    def merged(self, other: SymbolSource) -> SymbolSource:
        """Union of pools; ``other`` fills classes this source lacks."""
        pools = dict(other.pools)
        pools.update({c: p for c, p in self.pools.items() if len(p)})
        return SymbolSource(self.kind, self.split, pools)

    @classmethod
    def synthetic(
        cls,
        split: str,
        per_class: int,
        seed: int,
        classes: tuple[int, ...] = ALL_CLASSES,
    ) -> SymbolSource:
        """Render ``per_class`` glyphs of each class.

        Train and test glyphs come from different seed streams, so the two
        splits never share a rendering.
        """
        from .glyphs import render_glyph

        split_key = {"train": 0, "test": 1}[split]
        pools = {}
        for symbol in classes:
            seeds = np.random.SeedSequence(
                seed, spawn_key=(split_key, symbol)
            ).generate_state(per_class)
            pools[symbol] = np.stack(
                [render_glyph(symbol, int(s)).reshape(-1) for s in seeds]
            )
        return cls(SourceKind.SYNTHETIC, split, pools)


def resolve_data_dir(data_dir: str | None) -> Path:
    """Directory holding the MNIST IDX files.

    Raises:
        TaskDataError: If neither ``data_dir`` nor NTPT_DATA_DIR is set.
    """
    chosen = data_dir or os.environ.get(DATA_DIR_ENV)
    if not chosen:
        raise TaskDataError(
            f"MNIST digits requested but neither data.data_dir nor {DATA_DIR_ENV} "
            "is set"
        )
    return Path(chosen)


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
        path = directory / name
        if path.exists():
            return path
    raise TaskDataError(f"Missing MNIST file {stem} in {directory}")


def open_symbol_source(
    kind: SourceKind | str,
    split: str,
    per_class: int,
    seed: int,
    data_dir: str | None = None,
) -> SymbolSource:
    """Symbol source for a split.

    Synthetic sources render every class. MNIST sources read digits from the
    IDX files and add synthetic operators.

    Raises:
        TaskDataError: If MNIST files are requested but cannot be found.
    """
    kind = SourceKind(kind)
    if kind is SourceKind.SYNTHETIC:
        return SymbolSource.synthetic(split, per_class, seed)

    from .idx import load_idx

    directory = resolve_data_dir(data_dir)
    images_stem, labels_stem = MNIST_FILES[split]
    digits = load_idx(_find(directory, images_stem), _find(directory, labels_stem))
    digits.split = split
    operators = SymbolSource.synthetic(split, per_class, seed, OPERATOR_CLASSES)
    logger.info(
        "loaded %d MNIST %s digits from %s",
        sum(len(p) for p in digits.pools.values()),
        split,
        directory,
    )
    return digits.merged(operators)
