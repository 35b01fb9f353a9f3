"""Gradient-descent optimizers with named learning-rate groups.

Interpreter parameters and neural-library parameters train at different
rates (the perceptual rate is 100 times smaller by default), so every
:class:`~src.engine.tensor.Parameter` carries a ``group`` and the optimizer
holds one rate per group.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .tensor import EngineError, Parameter

logger = logging.getLogger(__name__)


class OptimizerError(EngineError):
    """Raised for parameters without a group, a rate, or a gradient."""

    pass


class OptimizerKind(Enum):
    """Supported update rules."""

    SGD = "sgd"
    RMSPROP = "rmsprop"
    ADAM = "adam"


@dataclass
class OptimizerState:
    """Per-parameter accumulators of an optimizer.

    Attributes:
        kind: Update rule.
        rates: Learning rate per parameter group.
        step_count: Number of ``step`` calls so far.
        first_moments: Adam first-moment estimates, keyed by parameter.
        second_moments: Adam/RMSprop second-moment estimates.
        param_steps: Number of updates each parameter has received.
    """

    kind: OptimizerKind
    rates: dict[str, float]
    step_count: int = 0
    first_moments: dict[Parameter, np.ndarray] = field(default_factory=dict)
    second_moments: dict[Parameter, np.ndarray] = field(default_factory=dict)
    param_steps: dict[Parameter, int] = field(default_factory=dict)


class Optimizer:
    """SGD, RMSprop or Adam over grouped parameters.

    Example:
        opt = Optimizer("adam", {"interpreter": 1e-3, "perceptual": 1e-5})
        opt.step(grads.keys(), grads)
    """

    def __init__(
        self,
        kind: str | OptimizerKind = OptimizerKind.ADAM,
        rates: Mapping[str, float] | None = None,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        rho: float = 0.9,
    ) -> None:
        """Initialize the optimizer.

        Args:
            kind: "sgd", "rmsprop" or "adam".
            rates: Learning rate per group name.
            beta1: Adam first-moment decay.
            beta2: Adam second-moment decay.
            eps: Denominator stabilizer for Adam and RMSprop.
            rho: RMSprop decay.

        Raises:
            OptimizerError: If a rate is negative or the kind is unknown.
        """
        try:
            kind = OptimizerKind(kind)
        except ValueError as e:
            raise OptimizerError(f"Unknown optimizer kind: {kind!r}") from e
        rates = dict(rates or {"interpreter": 1e-3, "perceptual": 1e-5})
        for group, rate in rates.items():
            if rate < 0:
                raise OptimizerError(f"Learning rate for group {group!r} is negative")
        self.state = OptimizerState(kind=kind, rates=rates)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.rho = rho

    @property
    def kind(self) -> OptimizerKind:
        """The update rule."""
        return self.state.kind

    def rate_for(self, param: Parameter) -> float:
        """Learning rate applying to ``param``.

        Raises:
            OptimizerError: If the parameter has no group or its group no rate.
        """
        if param.group is None:
            raise OptimizerError(f"Parameter {param.name!r} has no learning-rate group")
        try:
            return self.state.rates[param.group]
        except KeyError as e:
            raise OptimizerError(
                f"No learning rate for group {param.group!r} (parameter {param.name!r})"
            ) from e

    def step(
        self, params: Iterable[Parameter], grads: Mapping[Parameter, np.ndarray]
    ) -> None:
        """Update parameters in place.

        Args:
            params: Parameters to update.
            grads: Gradient for each parameter.

        Raises:
            OptimizerError: If a parameter lacks a group or a gradient.
        """
        params = list(params)
        for param in params:
            self.rate_for(param)
            if param not in grads:
                raise OptimizerError(f"No gradient for parameter {param.name!r}")

        self.state.step_count += 1
        for param in params:
            rate = self.rate_for(param)
            grad = grads[param]
            if grad.shape != param.shape:
                raise OptimizerError(
                    f"Gradient shape {grad.shape} does not match parameter "
                    f"{param.name!r} shape {param.shape}"
                )
            t = self.state.param_steps.get(param, 0) + 1
            self.state.param_steps[param] = t

            if self.kind is OptimizerKind.SGD:
                param.data -= rate * grad
            elif self.kind is OptimizerKind.RMSPROP:
                v = self.state.second_moments.get(param, np.zeros_like(grad))
                v = self.rho * v + (1 - self.rho) * grad**2
                self.state.second_moments[param] = v
                param.data -= rate * grad / (np.sqrt(v) + self.eps)
            else:
                m = self.state.first_moments.get(param, np.zeros_like(grad))
                v = self.state.second_moments.get(param, np.zeros_like(grad))
                m = self.beta1 * m + (1 - self.beta1) * grad
                v = self.beta2 * v + (1 - self.beta2) * grad**2
                self.state.first_moments[param] = m
                self.state.second_moments[param] = v
                m_hat = m / (1 - self.beta1**t)
                v_hat = v / (1 - self.beta2**t)
                param.data -= rate * m_hat / (np.sqrt(v_hat) + self.eps)

        logger.debug(
            "optimizer step %d updated %d parameters",
            self.state.step_count,
            len(params),
        )
