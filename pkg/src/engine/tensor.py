"""Dense tensors with define-by-run reverse-mode differentiation.

Every interpreter variable, neural network activation and loss in ntpt is a
:class:`Tensor`. Operations are plain functions (``matmul``, ``softmax``,
``contract``, ...) that compute their value eagerly with NumPy and, when a
:class:`Tape` is active, append a node holding the backward closure.

Example:
    with Tape() as tape:
        probs = softmax(logits)
        loss = neg(log(gather(probs, 2)))
    grads = tape.backward(loss)
"""

from __future__ import annotations

import contextvars
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

DTYPE = np.float64

_ACTIVE_TAPE: contextvars.ContextVar[Tape | None] = contextvars.ContextVar(
    "ntpt_active_tape", default=None
)


class EngineError(Exception):
    """Base exception for tensor-engine errors."""

    pass


class ShapeError(EngineError):
    """Raised when operand shapes do not conform to a primitive's signature."""

    def __init__(self, primitive: str, *shapes: tuple[int, ...], detail: str = ""):
        self.primitive = primitive
        self.shapes = shapes
        shape_text = ", ".join(str(s) for s in shapes)
        message = f"{primitive}: incompatible shapes {shape_text}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class Tensor:
    """A dense float64 array, optionally tracked by the active tape.

    Attributes:
        data: Row-major NumPy array holding the value.
        node_id: Index of the producing node on ``tape`` (None for leaves).
        tape: The tape that recorded this tensor, if any.
        name: Optional label used in error messages and listings.
    """

    __slots__ = ("data", "node_id", "tape", "name")

    def __init__(self, data: np.ndarray | float | Sequence, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.node_id: int | None = None
        self.tape: Tape | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        """Dimension sizes of the tensor."""
        return self.data.shape

    @property
    def ndim(self) -> int:
        """Number of dimensions."""
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        """Return a copy of the underlying array."""
        return self.data.copy()

    def item(self) -> float:
        """Return the value of a single-element tensor as a Python float."""
        if self.data.size != 1:
            raise ShapeError("item", self.shape, detail="not a single element")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"{type(self).__name__}{label}(shape={self.shape})"


class Parameter(Tensor):
    """A learnable leaf tensor belonging to a learning-rate group.

    Parameters are compared and hashed by identity so they can key optimizer
    state and gradient maps.
    """

    __slots__ = ("group",)

    def __init__(
        self,
        data: np.ndarray | float | Sequence,
        name: str | None = None,
        group: str | None = None,
    ) -> None:
        super().__init__(np.array(data, dtype=DTYPE), name=name)
        self.group = group


def constant(data: np.ndarray | float | Sequence, name: str | None = None) -> Tensor:
    """Wrap a value as a non-learnable tensor."""
    return Tensor(data, name=name)


BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class TapeNode:
    """One recorded operation.

    Attributes:
        kind: Primitive name ("leaf" for watched inputs).
        inputs: Node ids of the operands.
        backward: Maps the output gradient to one gradient per operand.
        leaf: The tensor itself for leaf nodes.
    """

    kind: str
    inputs: tuple[int, ...]
    backward: BackwardFn | None = None
    leaf: Tensor | None = None


@dataclass
class Tape:
    """Append-only record of operations for one forward pass.

    Nodes are appended in execution order, so every node's inputs precede it
    and a single reverse sweep visits each node exactly once.
    """

    nodes: list[TapeNode] = field(default_factory=list)
    _leaf_ids: dict[int, int] = field(default_factory=dict)
    _token: contextvars.Token | None = field(default=None, repr=False)

    def __enter__(self) -> Tape:
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def watch(self, tensor: Tensor) -> int:
        """Return the node id for ``tensor``, registering it as a leaf if new."""
        if tensor.tape is self and tensor.node_id is not None:
            return tensor.node_id
        key = id(tensor)
        if key not in self._leaf_ids:
            self._leaf_ids[key] = len(self.nodes)
            self.nodes.append(TapeNode(kind="leaf", inputs=(), leaf=tensor))
        return self._leaf_ids[key]

    def record(
        self, kind: str, inputs: Sequence[Tensor], out: Tensor, backward: BackwardFn
    ) -> Tensor:
        """Append an operation node producing ``out``."""
        ids = tuple(self.watch(t) for t in inputs)
        out.node_id = len(self.nodes)
        out.tape = self
        self.nodes.append(TapeNode(kind=kind, inputs=ids, backward=backward))
        return out

    def backward(self, loss: Tensor) -> dict[Parameter, np.ndarray]:
        """Back-propagate from a scalar loss.

        Args:
            loss: Scalar (single-element) tensor recorded on this tape.

        Returns:
            Mapping from every Parameter that influenced ``loss`` to its
            gradient. Gradients of non-parameter leaves are discarded.

        Raises:
            EngineError: If the tape is empty, the loss is not scalar, or the
                loss was not recorded on this tape.
        """
        if not self.nodes:
            raise EngineError("backward: tape is empty")
        if loss.data.size != 1:
            raise EngineError(f"backward: loss must be scalar, got shape {loss.shape}")
        if loss.tape is not self or loss.node_id is None:
            raise EngineError("backward: loss was not recorded on this tape")

        grads: list[np.ndarray | None] = [None] * len(self.nodes)
        grads[loss.node_id] = np.ones_like(loss.data)
        result: dict[Parameter, np.ndarray] = {}

        for node_id in range(loss.node_id, -1, -1):
            grad = grads[node_id]
            if grad is None:
                continue
            node = self.nodes[node_id]
            if node.kind == "leaf":
                if isinstance(node.leaf, Parameter):
                    result[node.leaf] = grad
                continue
            input_grads = node.backward(grad)
            for input_id, input_grad in zip(node.inputs, input_grads, strict=True):
                if input_grad is None:
                    continue
                if grads[input_id] is None:
                    grads[input_id] = input_grad
                else:
                    grads[input_id] = grads[input_id] + input_grad
            grads[node_id] = None
        return result


def active_tape() -> Tape | None:
    """Return the tape recording in the current context, if any."""
    return _ACTIVE_TAPE.get()


def _emit(
    kind: str, inputs: Sequence[Tensor], value: np.ndarray, backward: BackwardFn
) -> Tensor:
    out = Tensor(value)
    tape = _ACTIVE_TAPE.get()
    if tape is not None:
        tape.record(kind, inputs, out, backward)
    return out


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of a (m, k) and a (k, n) tensor."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    av, bv = a.data, b.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g @ bv.T, av.T @ g

    return _emit("matmul", (a, b), av @ bv, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may also be a bias vector matching a's last axis."""
    if a.shape == b.shape:

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            return g, g

        return _emit("add", (a, b), a.data + b.data, backward)

    if b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]:
        lead_axes = tuple(range(a.ndim - 1))

        def bias_backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            return g, g.sum(axis=lead_axes)

        return _emit("add", (a, b), a.data + b.data, bias_backward)

    raise ShapeError("add", a.shape, b.shape, detail="only bias-add broadcasting")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of equally shaped tensors."""
    if a.shape != b.shape:
        raise ShapeError("mul", a.shape, b.shape)
    av, bv = a.data, b.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g * bv, g * av

    return _emit("mul", (a, b), av * bv, backward)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a Python constant (recorded as a ``mul`` node)."""
    return mul(a, constant(np.full(a.shape, factor, dtype=DTYPE)))


def neg(a: Tensor) -> Tensor:
    """Negate a tensor."""
    return scale(a, -1.0)


def relu(a: Tensor) -> Tensor:
    """Rectified linear unit."""
    mask = a.data > 0

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * mask,)

    return _emit("relu", (a,), np.where(mask, a.data, 0.0), backward)


def softmax(a: Tensor) -> Tensor:
    """Softmax along the last axis."""
    if a.ndim == 0:
        raise ShapeError("softmax", a.shape, detail="needs at least one axis")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        inner = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - inner),)

    return _emit("softmax", (a,), out, backward)


def log(a: Tensor, floor: float = 0.0) -> Tensor:
    """Natural logarithm of ``max(a, floor)``.

    Entries clamped to the floor receive zero gradient.
    """
    clamped = np.maximum(a.data, floor)
    live = a.data > floor if floor > 0.0 else np.ones(a.shape, dtype=bool)
    with np.errstate(divide="ignore"):
        value = np.log(clamped)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.where(live, g / np.where(live, clamped, 1.0), 0.0),)

    return _emit("log", (a,), value, backward)


def sum_axis(a: Tensor, axis: int | None = None) -> Tensor:
    """Sum over one axis, or over all elements when ``axis`` is None."""
    if axis is not None and not -a.ndim <= axis < a.ndim:
        raise ShapeError("sum_axis", a.shape, detail=f"axis {axis} out of range")
    shape = a.shape

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _emit("sum_axis", (a,), a.data.sum(axis=axis), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate tensors along an existing axis."""
    if not tensors:
        raise ShapeError("concat", detail="no operands")
    ndim = tensors[0].ndim
    axis_ = axis % ndim if ndim else 0
    for t in tensors:
        if t.ndim != ndim or any(
            t.shape[d] != tensors[0].shape[d] for d in range(ndim) if d != axis_
        ):
            raise ShapeError("concat", *(x.shape for x in tensors))
    sizes = [t.shape[axis_] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, bounds, axis=axis_)

    value = np.concatenate([t.data for t in tensors], axis=axis_)
    return _emit("concat", tuple(tensors), value, backward)


def gather(a: Tensor, index: int | np.ndarray, axis: int = -1) -> Tensor:
    """Select entries along an axis.

    With an integer ``index`` the axis is removed (``np.take``). With an
    integer array of length ``a.shape[0]`` one entry is picked per row of a
    2-D tensor; for a 1-D tensor the array indexes it directly.
    """
    shape = a.shape
    if isinstance(index, (int, np.integer)):
        size = shape[axis]
        if not -size <= int(index) < size:
            raise ShapeError("gather", shape, detail=f"index {index} out of range")
        idx = int(index)

        def take_backward(g: np.ndarray) -> tuple[np.ndarray]:
            full = np.zeros(shape, dtype=DTYPE)
            slicer = [slice(None)] * len(shape)
            slicer[axis] = idx
            full[tuple(slicer)] = g
            return (full,)

        return _emit("gather", (a,), np.take(a.data, idx, axis=axis), take_backward)

    rows = np.asarray(index, dtype=np.int64)
    if rows.ndim != 1:
        raise ShapeError("gather", shape, rows.shape, detail="index must be 1-D")
    if a.ndim == 1:
        if rows.size and (rows.min() < 0 or rows.max() >= shape[0]):
            raise ShapeError("gather", shape, rows.shape, detail="index out of range")

        def vec_backward(g: np.ndarray) -> tuple[np.ndarray]:
            full = np.zeros(shape, dtype=DTYPE)
            np.add.at(full, rows, g)
            return (full,)

        return _emit("gather", (a,), a.data[rows], vec_backward)

    if a.ndim != 2 or rows.shape[0] != shape[0]:
        raise ShapeError("gather", shape, rows.shape)
    if rows.size and (rows.min() < 0 or rows.max() >= shape[1]):
        raise ShapeError("gather", shape, rows.shape, detail="index out of range")
    batch = np.arange(shape[0])

    def row_backward(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros(shape, dtype=DTYPE)
        full[batch, rows] = g
        return (full,)

    return _emit("gather", (a,), a.data[batch, rows], row_backward)


def _parse_subscripts(subscripts: str, count: int) -> tuple[list[str], str]:
    if "->" not in subscripts:
        raise ShapeError("contract", detail=f"missing '->' in {subscripts!r}")
    lhs, out = subscripts.replace(" ", "").split("->")
    terms = lhs.split(",")
    if len(terms) != count:
        raise ShapeError(
            "contract",
            detail=f"{subscripts!r} names {len(terms)} operands, got {count}",
        )
    return terms, out


def contract(subscripts: str, *operands: Tensor) -> Tensor:
    """General multi-index contraction (Einstein summation).

    This is the lifting primitive of the interpreter: an indicator tensor
    contracted against argument marginals yields the output marginal. Each
    operand's subscripts must be distinct letters.

    Example:
        contract("ijk,j,k->i", indicator, mu_x, mu_y)
    """
    terms, out = _parse_subscripts(subscripts, len(operands))
    sizes: dict[str, int] = {}
    for term, operand in zip(terms, operands, strict=True):
        if len(term) != operand.ndim or len(set(term)) != len(term):
            raise ShapeError(
                "contract",
                *(o.shape for o in operands),
                detail=f"subscripts {subscripts!r}",
            )
        for letter, size in zip(term, operand.shape, strict=True):
            if sizes.setdefault(letter, size) != size:
                raise ShapeError(
                    "contract",
                    *(o.shape for o in operands),
                    detail=f"index {letter!r} has sizes {sizes[letter]} and {size}",
                )
    if any(letter not in sizes for letter in out) or len(set(out)) != len(out):
        raise ShapeError("contract", detail=f"bad output subscripts in {subscripts!r}")

    values = [o.data for o in operands]
    result = np.einsum(subscripts, *values, optimize=True)

    def backward(g: np.ndarray) -> list[np.ndarray | None]:
        grads: list[np.ndarray | None] = []
        for i, (term, operand) in enumerate(zip(terms, operands, strict=True)):
            if not _needs_grad(operand):
                grads.append(None)
                continue
            other_terms = [t for j, t in enumerate(terms) if j != i]
            other_values = [v for j, v in enumerate(values) if j != i]
            present = set(out).union(*other_terms) if other_terms else set(out)
            kept = "".join(letter for letter in term if letter in present)
            spec = ",".join([out, *other_terms]) + "->" + kept
            partial = np.einsum(spec, g, *other_values, optimize=True)
            for axis, letter in enumerate(term):
                if letter not in present:
                    partial = np.expand_dims(partial, axis)
            grads.append(np.broadcast_to(partial, operand.shape).copy())
        return grads

    return _emit("contract", operands, np.asarray(result, dtype=DTYPE), backward)


def _needs_grad(t: Tensor) -> bool:
    return isinstance(t, Parameter) or t.tape is not None


__all__ = [
    "DTYPE",
    "EngineError",
    "Parameter",
    "ShapeError",
    "Tape",
    "TapeNode",
    "Tensor",
    "active_tape",
    "add",
    "concat",
    "constant",
    "contract",
    "gather",
    "log",
    "matmul",
    "mul",
    "neg",
    "relu",
    "scale",
    "softmax",
    "sum_axis",
]
