"""Example generation for the 2x2 and math tasks."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .ground_truth import MODULUS, Scenario, TaskId, ground_truth
from .symbols import DIGIT_CLASSES, OPERATOR_CLASSES, SymbolBatch, SymbolSource

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridExample:
    """One 2x2 example.

    Attributes:
        classes: Symbol class of each cell (NW, NE, SW, SE).
        images: Cell images, shape (4, 784).
        aux: Three auxiliary integers in 0..18 (apply2x2 only).
        label: Ground-truth answer.
    """

    classes: tuple[int, ...]
    images: np.ndarray
    aux: tuple[int, ...]
    label: int


@dataclass(frozen=True)
class TapeExample:
    """One math expression.

    Attributes:
        classes: Symbol classes, alternating digit and operator.
        images: Symbol images, shape (L, 784).
        label: Left-to-right value modulo 19.
    """

    classes: tuple[int, ...]
    images: np.ndarray
    label: int


Example = GridExample | TapeExample


@dataclass(frozen=True)
class GridBatch:
    """A batch of 2x2 examples, one symbol batch per cell."""

    task: TaskId
    cells: tuple[SymbolBatch, ...]
    aux: np.ndarray | None
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class TapeBatch:
    """A batch of equal-length math tapes, one symbol batch per position."""

    task: TaskId
    symbols: tuple[SymbolBatch, ...]
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def length(self) -> int:
        """Tape length L."""
        return len(self.symbols)


Batch = GridBatch | TapeBatch


def _draw_classes(
    task: TaskId, rng: np.random.Generator, num_digits: int
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    if task.scenario is Scenario.ADD2X2:
        return tuple(int(c) for c in rng.choice(DIGIT_CLASSES, size=4)), ()
    if task.scenario is Scenario.APPLY2X2:
        cells = tuple(int(c) for c in rng.choice(OPERATOR_CLASSES, size=4))
        aux = tuple(int(v) for v in rng.integers(0, MODULUS, size=3))
        return cells, aux
    classes = []
    for position in range(2 * num_digits - 1):
        pool = DIGIT_CLASSES if position % 2 == 0 else OPERATOR_CLASSES
        classes.append(int(rng.choice(pool)))
    return tuple(classes), ()


def gen_example(
    task: TaskId,
    source: SymbolSource,
    rng: np.random.Generator,
    num_digits: int = 2,
) -> Example:
    """Generate one labelled example with images from ``source``.

    Args:
        task: Task to generate for.
        source: Symbol images of the requested split.
        rng: Randomness for classes and image choice.
        num_digits: Digits per math expression (tape length 2n - 1).
    """
    classes, aux = _draw_classes(task, rng, num_digits)
    images = source.sample(np.array(classes), rng).images
    label = ground_truth(task, classes, aux)
    if task.is_grid:
        return GridExample(classes, images, aux, label)
    return TapeExample(classes, images, label)


def collate(task: TaskId, examples: Sequence[Example]) -> Batch:
    """Stack examples of one task into a batch.

    Math tapes in one batch must have equal length.
    """
    labels = np.array([e.label for e in examples], dtype=np.int64)
    classes = np.array([e.classes for e in examples], dtype=np.int64)
    images = np.stack([e.images for e in examples])
    columns = tuple(
        SymbolBatch(classes[:, i], images[:, i]) for i in range(classes.shape[1])
    )
    if task.is_grid:
        aux = None
        if task.scenario is Scenario.APPLY2X2:
            aux = np.array([e.aux for e in examples], dtype=np.int64)
        return GridBatch(task, columns, aux, labels)
    return TapeBatch(task, columns, labels)


class TaskDataset:
    """Example stream for one task, optionally from a capped pool.

    With ``pool_cap`` set, ``pool_cap`` examples are generated once from
    ``seed`` and every batch resamples them, so at most that many distinct
    examples are ever emitted.
    """

    def __init__(
        self,
        task: TaskId,
        source: SymbolSource,
        pool_cap: int | None = None,
        seed: int = 0,
        num_digits: int = 2,
    ) -> None:
        self.task = task
        self.source = source
        self.pool_cap = pool_cap
        self.num_digits = num_digits
        self.pool: list[Example] | None = None
        if pool_cap is not None:
            if pool_cap < 1:
                raise ValueError(f"pool_cap must be positive, got {pool_cap}")
            pool_rng = np.random.default_rng(seed)
            self.pool = [
                gen_example(task, source, pool_rng, num_digits) for _ in range(pool_cap)
            ]
            logger.debug("built pool of %d examples for %s", pool_cap, task)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """A batch drawn from the pool, or freshly generated."""
        if self.pool is not None:
            picks = rng.integers(0, len(self.pool), size=batch_size)
            examples = [self.pool[i] for i in picks]
        else:
            examples = [
                gen_example(self.task, self.source, rng, self.num_digits)
                for _ in range(batch_size)
            ]
        return collate(self.task, examples)


def fixed_examples(
    task: TaskId,
    source: SymbolSource,
    count: int,
    seed: int,
    num_digits: int = 2,
) -> list[Example]:
    """A reproducible list of ``count`` examples (used for evaluation)."""
    rng = np.random.default_rng(seed)
    return [gen_example(task, source, rng, num_digits) for _ in range(count)]


def batches(
    task: TaskId, examples: Sequence[Example], batch_size: int
) -> list[Batch]:
    """Split examples into consecutive batches."""
    return [
        collate(task, examples[i : i + batch_size])
        for i in range(0, len(examples), batch_size)
    ]
