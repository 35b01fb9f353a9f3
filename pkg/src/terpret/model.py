"""Model representation: parameters, inputs, statements and a builder API.

A model is a straight-line list of single-assignment statements over bounded
integer variables, plus calls into learnable functions. Variable domains are
inferred from the statement that assigns them:

    builder = ModelBuilder("add_mod3")
    x = builder.input_int("x", 3)
    c = builder.param("c", 3)
    add = lift(lambda a, b: (a + b) % 3, [IntDomain(3)] * 2, IntDomain(3))
    z = builder.apply("z", add, x, c)
    builder.observe(z, "z_out")
    model = builder.build()
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Protocol, runtime_checkable

import numpy as np

from src.engine import Parameter, Tensor

from .domains import IntDomain, MarginalVec, ParamVar, TerpretError
from .indicator import IndicatorTensor

TensorDims = tuple[int, ...]
Formatter = Callable[[Mapping[str, int]], str]


class CompileError(TerpretError):
    """Raised for ill-formed models: cycles, unassigned reads, reassignment."""

    pass


# =============================================================================
# Statements
# =============================================================================


@dataclass(frozen=True)
class Apply:
    """``target = f(args)`` for a lifted function."""

    target: str
    indicator: IndicatorTensor
    args: tuple[str, ...]


@dataclass(frozen=True)
class SwitchCase:
    """One case of a switch: statements to run, then the variable it yields."""

    value: int
    result: str
    body: tuple[Statement, ...] = ()


@dataclass(frozen=True)
class Switch:
    """``target = case[scrutinee]`` with per-case bodies."""

    target: str
    scrutinee: str
    cases: tuple[SwitchCase, ...]


@dataclass(frozen=True)
class CopyInput:
    """``target = input slot``."""

    target: str
    slot: str


@dataclass(frozen=True)
class Call:
    """``target = function(args)`` for a learnable function."""

    target: str
    function: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Observe:
    """Observe ``var`` against the values fed under ``slot``."""

    var: str
    slot: str


Statement = Apply | Switch | CopyInput | Call | Observe


def assigned(statement: Statement) -> str | None:
    """Variable assigned by ``statement`` (None for Observe)."""
    return None if isinstance(statement, Observe) else statement.target


def reads(statement: Statement) -> set[str]:
    """Names read by ``statement`` from its enclosing scope."""
    if isinstance(statement, Apply | Call):
        return set(statement.args)
    if isinstance(statement, CopyInput):
        return set()
    if isinstance(statement, Observe):
        return {statement.var}
    names = {statement.scrutinee}
    for case in statement.cases:
        local = {assigned(s) for s in case.body}
        inner: set[str] = {case.result}
        for sub in case.body:
            inner |= reads(sub)
        names |= inner - local
    return names


# =============================================================================
# Learnable functions
# =============================================================================


@runtime_checkable
class LearnableFunction(Protocol):
    """What a model needs from a function bound to a :class:`Call`.

    Integer outputs are returned as :class:`MarginalVec`, tensor outputs as
    :class:`Tensor`. Tensor-slot arguments are passed through exactly as fed.
    """

    @property
    def output(self) -> IntDomain | TensorDims: ...

    def forward(self, inputs: Sequence[Any]) -> MarginalVec | Tensor: ...

    def parameters(self) -> list[Parameter]: ...


@dataclass(frozen=True)
class FunctionSig:
    """Declared signature of a learnable function inside a model."""

    name: str
    output: IntDomain | TensorDims


# =============================================================================
# Model
# =============================================================================


@dataclass
class Model:
    """A complete model ready for :func:`~src.terpret.compiler.compile_model`.

    Attributes:
        name: Model name, used in listings and logs.
        params: Inferrable parameters by name.
        int_inputs: Integer input slots and their domains.
        tensor_inputs: Tensor input slots and their dimensions.
        functions: Learnable functions the model calls.
        statements: Top-level statements in program order.
        formatter: Renders a parameter assignment as source text.
    """

    name: str
    params: dict[str, ParamVar] = field(default_factory=dict)
    int_inputs: dict[str, IntDomain] = field(default_factory=dict)
    tensor_inputs: dict[str, TensorDims] = field(default_factory=dict)
    functions: dict[str, FunctionSig] = field(default_factory=dict)
    statements: list[Statement] = field(default_factory=list)
    formatter: Formatter | None = None

    def format(self, values: Mapping[str, int]) -> str:
        """Source text of the program given by ``values``."""
        if self.formatter is not None:
            return self.formatter(values)
        return "\n".join(f"{name} = {values[name]}" for name in self.params)

    def observed_slots(self) -> list[str]:
        """Slots that observations read from the feed."""
        return [s.slot for s in self.statements if isinstance(s, Observe)]


class ModelBuilder:
    """Incremental construction of a :class:`Model`.

    Every method that assigns a variable returns its name, so statements can
    be chained. Parameters are initialized from a seeded generator.
    """

    def __init__(
        self,
        name: str,
        rng: np.random.Generator | None = None,
        init_scale: float = 0.1,
    ) -> None:
        self.model = Model(name)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.init_scale = init_scale
        self._scopes: list[list[Statement]] = [self.model.statements]

    def _emit(self, statement: Statement) -> None:
        self._scopes[-1].append(statement)

    def param(self, name: str, size: int) -> str:
        """Declare an inferrable parameter over ``0..size-1``."""
        if name in self.model.params:
            raise CompileError(f"Parameter {name!r} declared twice")
        self.model.params[name] = ParamVar(
            name, IntDomain(size), rng=self.rng, init_scale=self.init_scale
        )
        return name

    def input_int(self, name: str, size: int) -> str:
        """Declare an integer input slot; its value is readable as ``name``."""
        self.model.int_inputs[name] = IntDomain(size)
        return name

    def input_tensor(self, name: str, dims: TensorDims) -> str:
        """Declare a tensor input slot; its value is readable as ``name``."""
        self.model.tensor_inputs[name] = tuple(dims)
        return name

    def function(self, name: str, output: IntDomain | TensorDims) -> str:
        """Declare a learnable function the model calls."""
        self.model.functions[name] = FunctionSig(name, output)
        return name

    def apply(self, target: str, indicator: IndicatorTensor, *args: str) -> str:
        """``target = indicator(*args)``."""
        self._emit(Apply(target, indicator, tuple(args)))
        return target

    def call(self, target: str, function: str, *args: str) -> str:
        """``target = function(*args)`` for a declared learnable function."""
        self._emit(Call(target, function, tuple(args)))
        return target

    def copy_input(self, target: str, slot: str) -> str:
        """``target = slot``."""
        self._emit(CopyInput(target, slot))
        return target

    def switch(
        self,
        target: str,
        scrutinee: str,
        cases: Sequence[str | Callable[[ModelBuilder], str]],
    ) -> str:
        """``target = cases[scrutinee]``.

        Each case is either a variable name or a callable that emits the
        case body through this builder and returns its result variable.
        """
        built: list[SwitchCase] = []
        for value, case in enumerate(cases):
            if isinstance(case, str):
                built.append(SwitchCase(value, case))
                continue
            body: list[Statement] = []
            self._scopes.append(body)
            try:
                result = case(self)
            finally:
                self._scopes.pop()
            built.append(SwitchCase(value, result, tuple(body)))
        self._emit(Switch(target, scrutinee, tuple(built)))
        return target

    def observe(self, var: str, slot: str) -> None:
        """Observe ``var`` against the feed under ``slot``."""
        self._emit(Observe(var, slot))

    def set_formatter(self, formatter: Formatter) -> None:
        """Set how the model renders a program listing."""
        self.model.formatter = formatter

    def build(self) -> Model:
        """Return the model."""
        if len(self._scopes) != 1:
            raise CompileError("build() called inside a switch case")
        return self.model


# =============================================================================
# Executable programs
# =============================================================================


@dataclass
class ForwardResult:
    """Outcome of one forward pass.

    Attributes:
        values: Marginal (or tensor) of every evaluated variable.
        loss: Scalar total loss over all observations, or None if unobserved.
        outputs: Marginals of the observed variables by slot.
    """

    values: dict[str, MarginalVec | Tensor | Any]
    loss: Tensor | None
    outputs: dict[str, MarginalVec]


class DifferentiableProgram(ABC):
    """A trainable program: parameters plus a differentiable forward pass."""

    name: str

    @property
    @abstractmethod
    def params(self) -> Mapping[str, ParamVar]:
        """Inferrable parameters by name."""

    @abstractmethod
    def forward(
        self,
        feed: Mapping[str, Any],
        functions: Mapping[str, LearnableFunction] | None = None,
        reduction: str = "mean",
    ) -> ForwardResult:
        """Evaluate marginals and the loss for a batch."""

    @abstractmethod
    def format(self, values: Mapping[str, int]) -> str:
        """Source text of the program given by ``values``."""

    def parameters(self) -> list[Parameter]:
        """Logits of all inferrable parameters."""
        return [p.logits for p in self.params.values()]
