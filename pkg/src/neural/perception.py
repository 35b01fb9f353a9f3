"""Perception modes and supervised training of library classifiers.

With neural perception, models call the library's networks on symbol images.
With oracle perception, each network is replaced by a perfect classifier that
reads the ground-truth class of every symbol instead.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from enum import Enum
from typing import Any

import numpy as np

from src.engine import DTYPE, Optimizer, Parameter, Tape, constant
from src.terpret import IntDomain, LearnableFunction, MarginalVec, observe

from .functions import FunctionArityError, NeuralFunction
from .library import Library

logger = logging.getLogger(__name__)

NUM_DIGITS = 10


class Perception(Enum):
    """How models see symbols."""

    NEURAL = "neural"
    ORACLE = "oracle"


def oracle_class(symbol: int | np.ndarray, num_classes: int) -> int | np.ndarray:
    """Class a perfect K-way classifier assigns to a symbol.

    Digits keep their value and operators (10..13) map to 0..3, both
    reduced modulo K.
    """
    symbol = np.asarray(symbol)
    mapped = np.where(symbol >= NUM_DIGITS, symbol - NUM_DIGITS, symbol) % num_classes
    return int(mapped) if mapped.ndim == 0 else mapped


class OracleFunction:
    """A perfect classifier standing in for a library network."""

    def __init__(self, name: str, num_classes: int) -> None:
        self.name = name
        self._output = IntDomain(num_classes)

    @property
    def output(self) -> IntDomain:
        """Output domain."""
        return self._output

    def parameters(self) -> list[Parameter]:
        """An oracle has nothing to learn."""
        return []

    def forward(self, inputs: Sequence[Any]) -> MarginalVec:
        """One-hot marginals on the mapped ground-truth classes.

        Raises:
            FunctionArityError: If the input carries no ground-truth classes.
        """
        if len(inputs) != 1 or not hasattr(inputs[0], "classes"):
            raise FunctionArityError(
                f"Oracle {self.name} needs one symbol batch with classes"
            )
        classes = np.atleast_1d(np.asarray(inputs[0].classes))
        return MarginalVec.point_mass(
            self._output, oracle_class(classes, self._output.size)
        )


def bind_functions(
    library: Library, perception: Perception | str = Perception.NEURAL
) -> dict[str, LearnableFunction]:
    """Functions models call, by name, under the given perception mode."""
    perception = Perception(perception)
    if perception is Perception.NEURAL:
        return {fn.name: fn for fn in library}
    return {
        fn.name: OracleFunction(fn.name, fn.spec.output.size)
        for fn in library
        if isinstance(fn.spec.output, IntDomain)
    }


def classifier_accuracy(
    fn: NeuralFunction, images: np.ndarray, classes: np.ndarray
) -> float:
    """Fraction of ``images`` the function classifies as the oracle would."""
    if len(classes) == 0:
        return 0.0
    size = fn.spec.output_width
    predicted = fn.predict(images)
    return float(np.mean(predicted == oracle_class(classes, size)))


def pretrain_supervised(
    fn: NeuralFunction,
    images: np.ndarray,
    classes: np.ndarray,
    steps: int,
    rng: np.random.Generator,
    batch_size: int = 32,
    optimizer: Optimizer | None = None,
) -> list[float]:
    """Train a classifier directly on labelled symbols.

    Args:
        fn: Network with an integer output.
        images: Flattened images, shape (N, 784).
        classes: Symbol classes, mapped through :func:`oracle_class`.
        steps: Number of minibatch updates.
        rng: Minibatch sampler.
        batch_size: Minibatch size.
        optimizer: Defaults to Adam with rate 1e-3 for the perceptual group.

    Returns:
        Loss per step.
    """
    if not isinstance(fn.spec.output, IntDomain):
        raise FunctionArityError(f"{fn.name} has no integer output to train")
    optimizer = optimizer or Optimizer("adam", {"perceptual": 1e-3})
    targets = oracle_class(np.asarray(classes), fn.spec.output.size)
    losses: list[float] = []
    for _ in range(steps):
        pick = rng.integers(0, len(images), size=min(batch_size, len(images)))
        with Tape() as tape:
            out = fn.forward([constant(np.asarray(images[pick], dtype=DTYPE))])
            loss = observe(out, targets[pick])
        grads = tape.backward(loss)
        optimizer.step(grads.keys(), grads)
        fn.train_steps += 1
        losses.append(loss.item())
    if losses:
        logger.debug(
            "pretrained %s for %d steps, final loss %.4f", fn.name, steps, losses[-1]
        )
    return losses


def accuracy_by_function(
    library: Library, images: Mapping[str, tuple[np.ndarray, np.ndarray]]
) -> dict[str, float]:
    """Classification accuracy of each named network on its held-out symbols."""
    return {
        name: classifier_accuracy(library[name], x, y)
        for name, (x, y) in images.items()
        if name in library
    }
