"""Lifting discrete functions over bounded integers to indicator tensors.

A function f: N_1 x ... x N_D -> N_out becomes a dense 0/1 tensor
``dense[o, i_1, ..., i_D] = [f(i_1, ..., i_D) == o]``. Contracting it with
input marginals yields the marginal of the output under an independence
assumption.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from src.engine import DTYPE, Tensor, constant

from .domains import IntDomain, TerpretError

logger = logging.getLogger(__name__)


class LiftError(TerpretError):
    """Raised when a lifted function returns a value outside its output domain."""

    pass


@dataclass(frozen=True, eq=False)
class IndicatorTensor:
    """Dense indicator tensor of a lifted function.

    Attributes:
        name: Name of the lifted function.
        in_domains: Input domains, in argument order.
        out_domain: Output domain.
        table: Integer lookup table of shape (N_1, ..., N_D).
        dense: Indicator of shape (N_out, N_1, ..., N_D).
    """

    name: str
    in_domains: tuple[IntDomain, ...]
    out_domain: IntDomain
    table: np.ndarray
    dense: Tensor

    @property
    def arity(self) -> int:
        """Number of inputs."""
        return len(self.in_domains)

    def __call__(self, *args: int) -> int:
        """Evaluate the underlying discrete function."""
        return int(self.table[tuple(args)])


_CACHE: dict[tuple, IndicatorTensor] = {}
_CONSTANTS: dict[int, Callable[[], int]] = {}


def lift(
    f: Callable[..., int],
    in_domains: Sequence[IntDomain],
    out_domain: IntDomain,
    name: str | None = None,
) -> IndicatorTensor:
    """Lift ``f`` to its indicator tensor.

    Results are memoized per (function, domains), so building several models
    that share a primitive tabulates it once.

    Args:
        f: Discrete function of ``len(in_domains)`` integer arguments.
        in_domains: Input domains.
        out_domain: Output domain.
        name: Display name (defaults to ``f.__name__``).

    Returns:
        The indicator tensor. Zero-arity functions give a one-hot constant.

    Raises:
        LiftError: If ``f`` returns a value outside ``out_domain`` for some input.
    """
    in_domains = tuple(in_domains)
    name = name or getattr(f, "__name__", "f")
    key = (f, in_domains, out_domain, name)
    cached = _CACHE.get(key)
    if cached is not None:
        return cached

    shape = tuple(d.size for d in in_domains)
    table = np.zeros(shape, dtype=np.int64)
    for args in itertools.product(*(range(n) for n in shape)):
        value = f(*args)
        if value not in out_domain:
            raise LiftError(
                f"{name}{args} = {value!r} is outside output domain "
                f"0..{out_domain.size - 1}"
            )
        table[args] = int(value)

    lifted = from_table(name, table, in_domains, out_domain)
    _CACHE[key] = lifted
    logger.debug("lifted %s over %s -> %d", name, shape, out_domain.size)
    return lifted


def lift_constant(value: int, out_domain: IntDomain) -> IndicatorTensor:
    """Lift the constant ``value`` as a zero-arity function."""
    const = _CONSTANTS.get(value)
    if const is None:

        def const() -> int:
            return value

        _CONSTANTS[value] = const
    return lift(const, (), out_domain, name=str(value))


def clear_cache() -> None:
    """Drop all memoized indicator tensors."""
    _CACHE.clear()
    _CONSTANTS.clear()


def from_table(
    name: str,
    table: np.ndarray,
    in_domains: Sequence[IntDomain],
    out_domain: IntDomain,
) -> IndicatorTensor:
    """Indicator tensor of a function given by its lookup table (not memoized).

    Raises:
        LiftError: If the table shape does not match the domains or an entry is
            outside the output domain.
    """
    in_domains = tuple(in_domains)
    shape = tuple(d.size for d in in_domains)
    table = np.asarray(table, dtype=np.int64)
    if table.shape != shape:
        raise LiftError(f"Table for {name} has shape {table.shape}, expected {shape}")
    bad = np.argwhere((table < 0) | (table >= out_domain.size))
    if bad.size:
        args = tuple(int(i) for i in bad[0])
        raise LiftError(
            f"{name}{args} = {int(table[args])} is outside output domain "
            f"0..{out_domain.size - 1}"
        )
    dense = np.zeros((out_domain.size, *shape), dtype=DTYPE)
    idx = np.indices(shape) if shape else ()
    dense[(table, *idx)] = 1.0
    return IndicatorTensor(
        name=name,
        in_domains=in_domains,
        out_domain=out_domain,
        table=table,
        dense=constant(dense, name=name),
    )
