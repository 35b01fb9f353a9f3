"""Marginal semantics of interpreter statements.

Every operation consumes and produces :class:`MarginalVec` values and is
built from engine primitives, so the loss of a whole model differentiates
back to the parameter logits.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from src.engine import (
    DTYPE,
    Tensor,
    add,
    constant,
    contract,
    gather,
    log,
    neg,
    scale,
    sum_axis,
)

from .domains import DomainError, IntDomain, MarginalVec, TerpretError
from .indicator import IndicatorTensor, lift

PROB_FLOOR = 1e-12
_LETTERS = "acdefghijklmnpqrstuvwxyz"


class SwitchError(TerpretError):
    """Raised when a switch does not provide exactly one case per value."""

    pass


def _batch_of(marginals: Sequence[MarginalVec]) -> int | None:
    sizes = {m.batch_size for m in marginals if m.batched}
    if len(sizes) > 1:
        raise DomainError(f"Arguments have different batch sizes: {sorted(sizes)}")
    return sizes.pop() if sizes else None


def broadcast_batch(marginal: MarginalVec, batch_size: int) -> MarginalVec:
    """Repeat an unbatched marginal over a batch of ``batch_size``."""
    if marginal.batched:
        if marginal.batch_size != batch_size:
            raise DomainError(
                f"Marginal batch {marginal.batch_size} does not match {batch_size}"
            )
        return marginal
    ones = constant(np.ones(batch_size, dtype=DTYPE))
    return MarginalVec(marginal.domain, contract("b,n->bn", ones, marginal.probs))


def eval_apply(
    indicator: IndicatorTensor, args: Sequence[MarginalVec]
) -> MarginalVec:
    """Marginal of ``f(args)`` for the lifted ``f``.

    Computes ``mu_out[i] = sum_jk I[i, j, k] mu_x[j] mu_y[k]`` (for any arity)
    as a single contraction. The output carries a batch axis when any
    argument does.

    Raises:
        DomainError: If the arity or an argument's domain does not match.
    """
    if len(args) != indicator.arity:
        raise DomainError(
            f"{indicator.name} takes {indicator.arity} arguments, got {len(args)}"
        )
    for position, (arg, domain) in enumerate(
        zip(args, indicator.in_domains, strict=True)
    ):
        if arg.domain != domain:
            raise DomainError(
                f"Argument {position} of {indicator.name} has domain size "
                f"{arg.domain.size}, expected {domain.size}"
            )
    batch = _batch_of(args)
    letters = _LETTERS[: indicator.arity]
    terms = ["o" + letters]
    for letter, arg in zip(letters, args, strict=True):
        terms.append(("b" if arg.batched else "") + letter)
    out = ("b" if batch is not None else "") + "o"
    subscripts = ",".join(terms) + "->" + out
    probs = contract(subscripts, indicator.dense, *(a.probs for a in args))
    return MarginalVec(indicator.out_domain, probs)


def eval_switch(
    scrutinee: MarginalVec,
    cases: Sequence[MarginalVec],
) -> MarginalVec:
    """Mixture ``sum_k mu_scrutinee[k] * mu_case_k``.

    Args:
        scrutinee: Marginal of the switched-on variable.
        cases: One marginal per scrutinee value, in value order.

    Raises:
        SwitchError: If the number of cases differs from the scrutinee domain.
        DomainError: If case marginals have different domains.
    """
    if len(cases) != scrutinee.domain.size:
        raise SwitchError(
            f"Switch over {scrutinee.domain.size} values has {len(cases)} cases"
        )
    domain = cases[0].domain
    for value, case in enumerate(cases):
        if case.domain != domain:
            raise DomainError(
                f"Case {value} has domain size {case.domain.size}, expected "
                f"{domain.size}"
            )
    batch = _batch_of([scrutinee, *cases])
    out = ("b" if batch is not None else "") + "n"
    total: Tensor | None = None
    for value, case in enumerate(cases):
        weight = gather(scrutinee.probs, value, axis=-1)
        case_probs = case.probs
        if batch is not None and not case.batched:
            case_probs = broadcast_batch(case, batch).probs
        w_sub = "b" if scrutinee.batched else ""
        c_sub = ("b" if batch is not None else "") + "n"
        term = contract(f"{w_sub},{c_sub}->{out}", weight, case_probs)
        total = term if total is None else add(total, term)
    assert total is not None
    return MarginalVec(domain, total)


def observe(
    var: MarginalVec,
    values: int | np.ndarray,
    reduction: str = "mean",
) -> Tensor:
    """Negative log-likelihood of observing ``values``.

    Each observation contributes ``-log(max(p[value], 1e-12))``. Batched
    observations are averaged (``reduction="mean"``) or summed.

    Raises:
        DomainError: If a value is outside the variable's domain.
        ValueError: If the reduction is unknown.
    """
    if reduction not in ("mean", "sum"):
        raise ValueError(f"Unknown loss reduction: {reduction!r}")
    index = np.asarray(values, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= var.domain.size):
        raise DomainError(
            f"Observed value(s) {index.tolist()} outside domain "
            f"0..{var.domain.size - 1}"
        )
    if index.ndim == 0:
        if var.batched:
            index = np.full(var.batch_size, int(index), dtype=np.int64)
        else:
            return neg(log(gather(var.probs, int(index)), floor=PROB_FLOOR))
    picked = gather(var.probs, index)
    total = neg(sum_axis(log(picked, floor=PROB_FLOOR)))
    if reduction == "mean":
        total = scale(total, 1.0 / index.shape[0])
    return total


def identity_into(source: IntDomain, target: IntDomain) -> IndicatorTensor:
    """Indicator embedding Z_source into Z_target (``source <= target``)."""
    if source.size > target.size:
        raise DomainError(f"Cannot embed Z_{source.size} into Z_{target.size}")
    return lift(_identity, (source,), target, name="inject")


def _identity(x: int) -> int:
    return x
