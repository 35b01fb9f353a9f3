"""Bounded integer domains, marginal vectors and inferrable parameters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.engine import DTYPE, Parameter, Tensor, constant, softmax


class TerpretError(Exception):
    """Base exception for interpreter model errors."""

    pass


class DomainError(TerpretError):
    """Raised when a value or marginal does not fit its integer domain."""

    pass


@dataclass(frozen=True)
class IntDomain:
    """The integers 0..size-1.

    Attributes:
        size: Number of values N.
    """

    size: int

    def __post_init__(self) -> None:
        """Validate the domain size."""
        if self.size < 1:
            raise DomainError(f"IntDomain size must be >= 1, got {self.size}")

    def __contains__(self, value: object) -> bool:
        return isinstance(value, (int, np.integer)) and 0 <= int(value) < self.size

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True)
class MarginalVec:
    """A distribution over an integer domain.

    ``probs`` has shape (N,) for values shared by a whole batch (parameters,
    constants) or (B, N) for per-example values.

    Attributes:
        domain: The integer domain.
        probs: Probability tensor whose last axis has length N.
    """

    domain: IntDomain
    probs: Tensor

    def __post_init__(self) -> None:
        """Check the last axis matches the domain."""
        if self.probs.ndim not in (1, 2) or self.probs.shape[-1] != self.domain.size:
            raise DomainError(
                f"Marginal of shape {self.probs.shape} does not fit domain "
                f"of size {self.domain.size}"
            )

    @property
    def batched(self) -> bool:
        """Whether the marginal carries a batch axis."""
        return self.probs.ndim == 2

    @property
    def batch_size(self) -> int | None:
        """Leading batch size, or None for shared marginals."""
        return self.probs.shape[0] if self.batched else None

    def argmax(self) -> np.ndarray:
        """Most probable value (per example), ties toward the smallest index."""
        return np.argmax(self.probs.data, axis=-1)

    def max_prob(self) -> np.ndarray:
        """Probability of the most probable value (per example)."""
        return np.max(self.probs.data, axis=-1)

    def is_normalized(self, tol: float = 1e-6) -> bool:
        """Check entries are non-negative and sum to one within ``tol``."""
        data = self.probs.data
        return bool(
            np.all(data >= -tol) and np.all(np.abs(data.sum(axis=-1) - 1.0) <= tol)
        )

    @classmethod
    def point_mass(
        cls, domain: IntDomain, values: int | np.ndarray
    ) -> MarginalVec:
        """One-hot marginal(s) on ``values``.

        Raises:
            DomainError: If a value is outside the domain.
        """
        array = np.asarray(values, dtype=np.int64)
        if array.size and (array.min() < 0 or array.max() >= domain.size):
            raise DomainError(
                f"Values {array.tolist()} outside domain 0..{domain.size - 1}"
            )
        probs = np.zeros((*array.shape, domain.size), dtype=DTYPE)
        if array.ndim == 0:
            probs[int(array)] = 1.0
        else:
            probs[np.arange(array.shape[0]), array] = 1.0
        return cls(domain, constant(probs))

    @classmethod
    def uniform(cls, domain: IntDomain, batch_size: int | None = None) -> MarginalVec:
        """Uniform marginal, optionally repeated over a batch."""
        shape = (domain.size,) if batch_size is None else (batch_size, domain.size)
        return cls(domain, constant(np.full(shape, 1.0 / domain.size, dtype=DTYPE)))


class ParamVar:
    """An inferrable bounded integer: one token of the induced program.

    Its marginal is ``softmax(logits)``.

    Attributes:
        name: Parameter name.
        domain: The values the parameter ranges over.
        logits: Learnable logits (learning-rate group "interpreter").
    """

    def __init__(
        self,
        name: str,
        domain: IntDomain,
        rng: np.random.Generator | None = None,
        init_scale: float = 0.1,
        logits: np.ndarray | None = None,
    ) -> None:
        """Create the parameter.

        Args:
            name: Parameter name.
            domain: Value domain.
            rng: Generator for the Normal(0, init_scale) initialization.
            init_scale: Standard deviation of the initial logits.
            logits: Explicit initial logits (overrides ``rng``).
        """
        self.name = name
        self.domain = domain
        if logits is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            logits = rng.normal(0.0, init_scale, size=domain.size)
        logits = np.asarray(logits, dtype=DTYPE)
        if logits.shape != (domain.size,):
            raise DomainError(
                f"Logits for {name!r} have shape {logits.shape}, expected "
                f"({domain.size},)"
            )
        self.logits = Parameter(logits, name=name, group="interpreter")

    def marginal(self) -> MarginalVec:
        """Current distribution over the parameter's values."""
        return MarginalVec(self.domain, softmax(self.logits))

    def value(self) -> int:
        """Discretized value: argmax of the logits, ties toward index 0."""
        return int(np.argmax(self.logits.data))

    def set_point_mass(self, value: int, strength: float = 50.0) -> None:
        """Make the parameter (almost) deterministic on ``value``."""
        if value not in self.domain:
            raise DomainError(f"{value} outside domain of parameter {self.name!r}")
        logits = np.zeros(self.domain.size, dtype=DTYPE)
        logits[value] = strength
        self.logits.data[...] = logits

    def __repr__(self) -> str:
        return f"ParamVar({self.name!r}, size={self.domain.size})"
