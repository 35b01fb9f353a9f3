"""Learnable functions compiled to fully connected feed-forward networks."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from src.engine import (
    DTYPE,
    Parameter,
    Tensor,
    add,
    concat,
    constant,
    contract,
    matmul,
    relu,
    softmax,
)
from src.terpret import IntDomain, MarginalVec

logger = logging.getLogger(__name__)

TensorDims = tuple[int, ...]
Slot = IntDomain | TensorDims


class LibraryError(Exception):
    """Base exception for neural library errors."""

    pass


class FunctionArityError(LibraryError):
    """Raised when a function is called with the wrong inputs."""

    pass


def slot_width(slot: Slot) -> int:
    """Number of features a slot contributes to the concatenated input."""
    if isinstance(slot, IntDomain):
        return slot.size
    return int(np.prod(slot))


@dataclass(frozen=True)
class NeuralFunctionSpec:
    """Signature and architecture of a learnable function.

    Attributes:
        inputs: Input slots: integer domains (fed as marginals) or tensor dims.
        output: Integer domain (softmax output) or tensor dims (linear output).
        hidden: Hidden layer sizes, each followed by a ReLU.
    """

    inputs: tuple[Slot, ...]
    output: Slot
    hidden: tuple[int, ...] = (256, 256)

    def __post_init__(self) -> None:
        """Validate the architecture."""
        if not self.inputs:
            raise LibraryError("A learnable function needs at least one input")
        if any(h < 1 for h in self.hidden):
            raise LibraryError(f"Hidden sizes must be positive, got {self.hidden}")

    @property
    def input_width(self) -> int:
        """Width of the concatenated input vector."""
        return sum(slot_width(s) for s in self.inputs)

    @property
    def output_width(self) -> int:
        """Width of the output layer."""
        return slot_width(self.output)

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) of every layer."""
        widths = [self.input_width, *self.hidden, self.output_width]
        return list(zip(widths[:-1], widths[1:], strict=True))


class NeuralFunction:
    """A feed-forward network usable wherever a model calls a function.

    All call sites of one function share its parameters, which belong to the
    "perceptual" learning-rate group.

    Attributes:
        name: Library name (e.g. "net_0").
        spec: Signature and architecture.
        weights: Weight matrix per layer, shape (fan_in, fan_out).
        biases: Bias vector per layer.
        train_steps: Number of optimizer steps this function has taken part in.
        created_task: Task during which the function was declared.
    """

    def __init__(
        self,
        name: str,
        spec: NeuralFunctionSpec,
        rng: np.random.Generator | None = None,
        created_task: str = "",
    ) -> None:
        """Create the function with He-uniform weights and zero biases."""
        rng = rng if rng is not None else np.random.default_rng(0)
        self.name = name
        self.spec = spec
        self.created_task = created_task
        self.train_steps = 0
        self.weights: list[Parameter] = []
        self.biases: list[Parameter] = []
        for layer, (fan_in, fan_out) in enumerate(spec.layer_shapes):
            limit = np.sqrt(6.0 / fan_in)
            self.weights.append(
                Parameter(
                    rng.uniform(-limit, limit, size=(fan_in, fan_out)),
                    name=f"{name}.w{layer}",
                    group="perceptual",
                )
            )
            self.biases.append(
                Parameter(
                    np.zeros(fan_out, dtype=DTYPE),
                    name=f"{name}.b{layer}",
                    group="perceptual",
                )
            )

    @property
    def output(self) -> Slot:
        """Output domain or dims."""
        return self.spec.output

    def parameters(self) -> list[Parameter]:
        """Weights and biases, layer by layer."""
        params: list[Parameter] = []
        for w, b in zip(self.weights, self.biases, strict=True):
            params.extend((w, b))
        return params

    def _as_features(self, value: Any, slot: Slot, position: int) -> Tensor:
        if isinstance(value, MarginalVec):
            if not isinstance(slot, IntDomain) or value.domain != slot:
                raise FunctionArityError(
                    f"{self.name} input {position}: marginal over "
                    f"{value.domain.size} values does not fit slot {slot}"
                )
            return value.probs
        if hasattr(value, "images"):
            value = value.images
        tensor = value if isinstance(value, Tensor) else constant(np.asarray(value))
        width = slot_width(slot)
        if tensor.ndim not in (1, 2) or tensor.shape[-1] != width:
            raise FunctionArityError(
                f"{self.name} input {position}: shape {tensor.shape} does not "
                f"fit a slot of width {width}"
            )
        return tensor

    def forward(self, inputs: Sequence[Any]) -> MarginalVec | Tensor:
        """Apply the network.

        Inputs are concatenated; integer inputs enter as probability vectors.
        Objects exposing ``images`` (symbol batches) contribute those images.

        Returns:
            A batched MarginalVec for integer outputs, otherwise a Tensor.

        Raises:
            FunctionArityError: If the inputs do not match the spec.
        """
        if len(inputs) != len(self.spec.inputs):
            raise FunctionArityError(
                f"{self.name} takes {len(self.spec.inputs)} inputs, got {len(inputs)}"
            )
        features = [
            self._as_features(value, slot, i)
            for i, (value, slot) in enumerate(
                zip(inputs, self.spec.inputs, strict=True)
            )
        ]
        batch = {f.shape[0] for f in features if f.ndim == 2}
        if len(batch) > 1:
            raise FunctionArityError(f"{self.name}: inputs have batch sizes {batch}")
        size = batch.pop() if batch else 1
        rows = []
        for f in features:
            if f.ndim == 1:
                f = contract("b,n->bn", constant(np.ones(size, dtype=DTYPE)), f)
            rows.append(f)
        h = rows[0] if len(rows) == 1 else concat(rows, axis=-1)

        last = len(self.weights) - 1
        for layer, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            h = add(matmul(h, w), b)
            if layer < last:
                h = relu(h)
        if isinstance(self.spec.output, IntDomain):
            return MarginalVec(self.spec.output, softmax(h))
        return h

    def predict(self, images: np.ndarray) -> np.ndarray:
        """Most probable class for each row of ``images``."""
        out = self.forward([np.asarray(images, dtype=DTYPE)])
        if not isinstance(out, MarginalVec):
            raise FunctionArityError(f"{self.name} has no integer output to predict")
        return out.argmax()

    def arrays(self) -> list[np.ndarray]:
        """Raw weight and bias arrays, layer by layer."""
        return [p.data for p in self.parameters()]

    def load_arrays(self, arrays: Sequence[np.ndarray]) -> None:
        """Replace all weights and biases in place.

        Raises:
            FunctionArityError: If the arrays do not match the layer shapes.
        """
        params = self.parameters()
        if len(arrays) != len(params):
            raise FunctionArityError(
                f"{self.name} has {len(params)} arrays, got {len(arrays)}"
            )
        for param, array in zip(params, arrays, strict=True):
            if array.shape != param.shape:
                raise FunctionArityError(
                    f"{param.name} has shape {param.shape}, got {array.shape}"
                )
            param.data[...] = array

    def __repr__(self) -> str:
        return (
            f"NeuralFunction({self.name!r}, {self.spec.input_width}->"
            f"{self.spec.output_width}, hidden={list(self.spec.hidden)}, "
            f"steps={self.train_steps})"
        )


def digit_net_spec(hidden: tuple[int, ...] = (256, 256)) -> NeuralFunctionSpec:
    """net_0: a 28x28 image to one of 10 digit classes."""
    return NeuralFunctionSpec(inputs=((28, 28),), output=IntDomain(10), hidden=hidden)


def operator_net_spec(hidden: tuple[int, ...] = (256, 256)) -> NeuralFunctionSpec:
    """net_1: a 28x28 image to one of 4 operator classes."""
    return NeuralFunctionSpec(inputs=((28, 28),), output=IntDomain(4), hidden=hidden)
