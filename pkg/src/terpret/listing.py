"""Discrete program extraction and exact execution of extracted programs."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .compiler import FeedError, ModelGraph
from .domains import MarginalVec
from .model import (
    Apply,
    Call,
    CopyInput,
    DifferentiableProgram,
    LearnableFunction,
    Observe,
    Statement,
    Switch,
)


@dataclass
class ProgramListing:
    """A discrete program: one value per parameter, plus its source text.

    Attributes:
        name: Name of the program's model.
        values: Parameter name to chosen value.
        text: Source rendering of the program.
    """

    name: str
    values: dict[str, int]
    text: str
    metadata: dict[str, Any] = field(default_factory=dict)

    def __str__(self) -> str:
        return self.text

    def to_dict(self) -> dict[str, Any]:
        """Structured form for golden tests and snapshots."""
        return {
            "model": self.name,
            "params": dict(self.values),
            "source": self.text,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ProgramListing:
        """Inverse of :meth:`to_dict`."""
        return cls(
            name=data["model"],
            values={k: int(v) for k, v in data["params"].items()},
            text=data.get("source", ""),
            metadata=dict(data.get("metadata", {})),
        )


def discretize(program: DifferentiableProgram) -> ProgramListing:
    """Take the argmax of every parameter's logits.

    Exact ties resolve to the smallest value.
    """
    values = {name: param.value() for name, param in program.params.items()}
    return ProgramListing(program.name, values, program.format(values))


def load_listing(
    program: DifferentiableProgram, listing: ProgramListing, strength: float = 50.0
) -> None:
    """Set every parameter of ``program`` to a near point mass on the listing."""
    for name, param in program.params.items():
        param.set_point_mass(listing.values[name], strength=strength)


@dataclass
class ConcreteResult:
    """Exact execution of a listing on one example.

    Attributes:
        values: Integer value of every top-level variable.
        outputs: Value of every observed variable, by observation slot.
    """

    values: dict[str, Any]
    outputs: dict[str, int]


def _classify(output: MarginalVec | Any) -> int | Any:
    if isinstance(output, MarginalVec):
        return int(output.argmax().reshape(-1)[0])
    return output


def _run(
    graph: ModelGraph,
    statements: list[Statement] | tuple[Statement, ...],
    env: dict[str, Any],
    functions: Mapping[str, LearnableFunction],
    outputs: dict[str, int],
) -> None:
    for statement in statements:
        if isinstance(statement, Apply):
            env[statement.target] = statement.indicator(
                *(env[a] for a in statement.args)
            )
        elif isinstance(statement, Call):
            fn = functions.get(statement.function)
            if fn is None:
                raise FeedError(f"No function bound for {statement.function!r}")
            args = []
            for arg in statement.args:
                value = env[arg]
                domain = graph.domains.get(arg)
                if isinstance(value, (int, np.integer)) and domain is not None:
                    value = MarginalVec.point_mass(domain, np.asarray([value]))
                args.append(value)
            env[statement.target] = _classify(fn.forward(args))
        elif isinstance(statement, CopyInput):
            env[statement.target] = env[statement.slot]
        elif isinstance(statement, Switch):
            selected = int(env[statement.scrutinee])
            case = next(c for c in statement.cases if c.value == selected)
            local = dict(env)
            _run(graph, case.body, local, functions, outputs)
            env[statement.target] = local[case.result]
        elif isinstance(statement, Observe):
            outputs[statement.slot] = int(env[statement.var])


def concrete_eval(
    graph: ModelGraph,
    listing: ProgramListing,
    inputs: Mapping[str, Any],
    functions: Mapping[str, LearnableFunction] | None = None,
) -> ConcreteResult:
    """Execute ``listing`` exactly on a single example.

    Only the selected case of each switch runs. Learnable functions are
    applied to the example and their most probable class is used.

    Args:
        graph: Compiled model the listing was extracted from.
        listing: Parameter assignment.
        inputs: One integer per integer input, one single-example batch per
            tensor input.
        functions: Bound learnable functions by name.

    Raises:
        FeedError: If an input or function is missing.
    """
    env: dict[str, Any] = {name: int(v) for name, v in listing.values.items()}
    for name in graph.model.int_inputs:
        if name not in inputs:
            raise FeedError(f"No value fed for input {name!r}")
        env[name] = int(inputs[name])
    for name in graph.model.tensor_inputs:
        if name not in inputs:
            raise FeedError(f"No value fed for input {name!r}")
        env[name] = inputs[name]
    outputs: dict[str, int] = {}
    _run(graph, graph.statements, env, functions or {}, outputs)
    return ConcreteResult(values=env, outputs=outputs)
