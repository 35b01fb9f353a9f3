"""Compilation of a :class:`Model` into an executable differentiable graph."""

from __future__ import annotations

import heapq
import logging
from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np

from src.engine import Tensor, add

from .domains import IntDomain, MarginalVec, ParamVar, TerpretError
from .model import (
    Apply,
    Call,
    CompileError,
    CopyInput,
    DifferentiableProgram,
    ForwardResult,
    LearnableFunction,
    Model,
    Observe,
    Statement,
    Switch,
    SwitchCase,
    TensorDims,
    assigned,
    reads,
)
from .semantics import SwitchError, eval_apply, eval_switch, observe

logger = logging.getLogger(__name__)

Domain = IntDomain | TensorDims


class FeedError(TerpretError):
    """Raised when a forward pass lacks an input, observation or function."""

    pass


def _order(statements: Sequence[Statement], visible: set[str]) -> list[Statement]:
    """Topologically sort one scope, recursing into switch bodies."""
    producers: dict[str, int] = {}
    for index, statement in enumerate(statements):
        target = assigned(statement)
        if target is None:
            continue
        if target in visible or target in producers:
            raise CompileError(f"Variable {target!r} is assigned more than once")
        producers[target] = index

    dependents: dict[int, list[int]] = {i: [] for i in range(len(statements))}
    indegree = [0] * len(statements)
    for index, statement in enumerate(statements):
        for name in sorted(reads(statement)):
            if name in producers:
                if producers[name] == index:
                    raise CompileError(f"Variable {name!r} depends on itself")
                dependents[producers[name]].append(index)
                indegree[index] += 1
            elif name not in visible:
                raise CompileError(f"Variable {name!r} is read before assignment")

    ready = [i for i, d in enumerate(indegree) if d == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        index = heapq.heappop(ready)
        order.append(index)
        for dependent in dependents[index]:
            indegree[dependent] -= 1
            if indegree[dependent] == 0:
                heapq.heappush(ready, dependent)
    if len(order) != len(statements):
        stuck = sorted(
            t for i, s in enumerate(statements) if i not in order and (t := assigned(s))
        )
        raise CompileError(f"Cyclic dependency between variables {stuck}")

    inner_visible = visible | set(producers)
    result: list[Statement] = []
    for index in order:
        statement = statements[index]
        if isinstance(statement, Switch):
            statement = Switch(
                statement.target,
                statement.scrutinee,
                tuple(
                    SwitchCase(
                        case.value,
                        case.result,
                        tuple(_order(case.body, inner_visible)),
                    )
                    for case in statement.cases
                ),
            )
        result.append(statement)
    return result


def _int_domain(domains: Mapping[str, Domain], name: str, where: str) -> IntDomain:
    domain = domains[name]
    if not isinstance(domain, IntDomain):
        raise CompileError(f"{where}: {name!r} is a tensor, expected an integer")
    return domain


def _infer(
    model: Model, statements: Sequence[Statement], domains: dict[str, Domain]
) -> None:
    """Infer and check the domain of every assigned variable, in order."""
    for statement in statements:
        if isinstance(statement, Apply):
            ind = statement.indicator
            if len(statement.args) != ind.arity:
                raise CompileError(
                    f"{statement.target!r} = {ind.name}(...) passes "
                    f"{len(statement.args)} arguments, expected {ind.arity}"
                )
            for arg, expected in zip(statement.args, ind.in_domains, strict=True):
                domain = _int_domain(domains, arg, f"{statement.target!r}")
                if domain != expected:
                    raise CompileError(
                        f"{statement.target!r} = {ind.name}(...): {arg!r} ranges "
                        f"over {domain.size} values, expected {expected.size}"
                    )
            domains[statement.target] = ind.out_domain
        elif isinstance(statement, Call):
            if statement.function not in model.functions:
                raise CompileError(
                    f"{statement.target!r} calls undeclared function "
                    f"{statement.function!r}"
                )
            domains[statement.target] = model.functions[statement.function].output
        elif isinstance(statement, CopyInput):
            if (
                statement.slot not in model.int_inputs
                and statement.slot not in model.tensor_inputs
            ):
                raise CompileError(
                    f"{statement.target!r} copies unknown input {statement.slot!r}"
                )
            domains[statement.target] = domains[statement.slot]
        elif isinstance(statement, Switch):
            scrutinee = _int_domain(domains, statement.scrutinee, statement.target)
            values = sorted(case.value for case in statement.cases)
            if values != list(range(scrutinee.size)):
                raise SwitchError(
                    f"Switch for {statement.target!r} over {statement.scrutinee!r} "
                    f"needs one case for each of 0..{scrutinee.size - 1}, got {values}"
                )
            result_domain: Domain | None = None
            for case in statement.cases:
                local = dict(domains)
                _infer(model, case.body, local)
                domain = _int_domain(local, case.result, statement.target)
                if result_domain is not None and domain != result_domain:
                    raise CompileError(
                        f"Cases of {statement.target!r} range over different domains"
                    )
                result_domain = domain
            assert result_domain is not None
            domains[statement.target] = result_domain
        else:
            _int_domain(domains, statement.var, "observe")


class ModelGraph(DifferentiableProgram):
    """A compiled model: ordered statements with inferred variable domains.

    Attributes:
        model: The source model.
        statements: Statements in dependency order.
        domains: Domain (or tensor dims) of every top-level name.
    """

    def __init__(
        self,
        model: Model,
        statements: list[Statement],
        domains: dict[str, Domain],
    ) -> None:
        self.model = model
        self.name = model.name
        self.statements = statements
        self.domains = domains

    @property
    def params(self) -> Mapping[str, ParamVar]:
        return self.model.params

    def format(self, values: Mapping[str, int]) -> str:
        return self.model.format(values)

    def _initial_env(
        self, feed: Mapping[str, Any]
    ) -> dict[str, MarginalVec | Tensor | Any]:
        env: dict[str, Any] = {
            name: param.marginal() for name, param in self.model.params.items()
        }
        for name, domain in self.model.int_inputs.items():
            if name not in feed:
                raise FeedError(f"No value fed for input {name!r}")
            value = feed[name]
            if isinstance(value, MarginalVec):
                env[name] = value
            else:
                env[name] = MarginalVec.point_mass(domain, np.asarray(value))
        for name in self.model.tensor_inputs:
            if name not in feed:
                raise FeedError(f"No value fed for input {name!r}")
            env[name] = feed[name]
        return env

    def _run(
        self,
        statements: Sequence[Statement],
        env: dict[str, Any],
        functions: Mapping[str, LearnableFunction],
        feed: Mapping[str, Any],
        reduction: str,
        losses: list[Tensor],
        outputs: dict[str, MarginalVec],
    ) -> None:
        for statement in statements:
            if isinstance(statement, Apply):
                env[statement.target] = eval_apply(
                    statement.indicator, [env[a] for a in statement.args]
                )
            elif isinstance(statement, Call):
                fn = functions.get(statement.function)
                if fn is None:
                    raise FeedError(
                        f"No function bound for {statement.function!r}"
                    )
                env[statement.target] = fn.forward([env[a] for a in statement.args])
            elif isinstance(statement, CopyInput):
                env[statement.target] = env[statement.slot]
            elif isinstance(statement, Switch):
                case_values = []
                for case in sorted(statement.cases, key=lambda c: c.value):
                    local = dict(env)
                    self._run(
                        case.body, local, functions, feed, reduction, losses, outputs
                    )
                    case_values.append(local[case.result])
                env[statement.target] = eval_switch(
                    env[statement.scrutinee], case_values
                )
            else:
                if statement.slot not in feed:
                    raise FeedError(f"No observation fed for {statement.slot!r}")
                var = env[statement.var]
                outputs[statement.slot] = var
                losses.append(observe(var, feed[statement.slot], reduction))

    def forward(
        self,
        feed: Mapping[str, Any],
        functions: Mapping[str, LearnableFunction] | None = None,
        reduction: str = "mean",
        observe_outputs: bool = True,
    ) -> ForwardResult:
        """Evaluate all marginals and the total loss.

        Args:
            feed: Values for input slots (integer arrays, marginals, or tensor
                batches) and for observed slots.
            functions: Bound learnable functions by name.
            reduction: Batch reduction of each observation's loss.
            observe_outputs: If False, observations are skipped and ``loss``
                is None (prediction mode).

        Raises:
            FeedError: If an input, observation or function is missing.
        """
        functions = functions or {}
        env = self._initial_env(feed)
        losses: list[Tensor] = []
        outputs: dict[str, MarginalVec] = {}
        statements = self.statements
        if not observe_outputs:
            statements = [s for s in statements if not isinstance(s, Observe)]
        self._run(statements, env, functions, feed, reduction, losses, outputs)
        if not observe_outputs:
            for statement in self.statements:
                if isinstance(statement, Observe):
                    outputs[statement.slot] = env[statement.var]
        loss: Tensor | None = None
        for term in losses:
            loss = term if loss is None else add(loss, term)
        return ForwardResult(values=env, loss=loss, outputs=outputs)


def compile_model(model: Model) -> ModelGraph:
    """Check a model and order its statements for execution.

    The total loss of the resulting graph is the sum of its Observe terms.

    Raises:
        CompileError: On reassignment, unassigned reads, cycles, undeclared
            functions or domain mismatches (the message names the variable).
        SwitchError: If a switch does not cover its scrutinee's values.
    """
    visible: set[str] = set()
    domains: dict[str, Domain] = {}
    for name, param in model.params.items():
        domains[name] = param.domain
    for name, domain in model.int_inputs.items():
        domains[name] = domain
    for name, dims in model.tensor_inputs.items():
        domains[name] = dims
    declared = (
        list(model.params) + list(model.int_inputs) + list(model.tensor_inputs)
    )
    if len(set(declared)) != len(declared):
        raise CompileError(f"Duplicate parameter or input names in {declared}")
    visible.update(declared)

    ordered = _order(model.statements, visible)
    _infer(model, ordered, domains)
    logger.debug(
        "compiled %s: %d params, %d statements",
        model.name,
        len(model.params),
        len(ordered),
    )
    return ModelGraph(model, ordered, domains)
