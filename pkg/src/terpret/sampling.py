"""Random small models for checking the compiled semantics against exact execution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compiler import ModelGraph, compile_model
from .domains import IntDomain, MarginalVec
from .indicator import from_table
from .listing import ProgramListing, concrete_eval, load_listing
from .model import ModelBuilder

MAX_SCRUTINEE = 6


@dataclass
class RandomModel:
    """A random model with a chosen program and input assignment.

    Attributes:
        graph: Compiled model.
        listing: One value per parameter.
        inputs: One value per integer input.
    """

    graph: ModelGraph
    listing: ProgramListing
    inputs: dict[str, int]


def _random_table(
    rng: np.random.Generator, in_sizes: list[int], out_size: int
) -> np.ndarray:
    return rng.integers(0, out_size, size=tuple(in_sizes))


def random_model(
    rng: np.random.Generator,
    max_domain: int = 20,
    max_statements: int = 8,
    name: str = "random",
) -> RandomModel:
    """Sample a random straight-line model over domains of size <= ``max_domain``.

    The model mixes lifted applications of arity 0 to 3, copies of inputs and
    switches whose cases are either existing variables or bodies with their
    own application. The last assigned variable is observed.
    """
    builder = ModelBuilder(name, rng=rng)
    pool: dict[str, IntDomain] = {}

    for i in range(int(rng.integers(1, 3))):
        size = int(rng.integers(1, max_domain + 1))
        pool[builder.param(f"p{i}", size)] = IntDomain(size)
    inputs: dict[str, int] = {}
    for i in range(int(rng.integers(1, 3))):
        size = int(rng.integers(1, max_domain + 1))
        slot = builder.input_int(f"x{i}", size)
        inputs[slot] = int(rng.integers(0, size))
        pool[builder.copy_input(f"in{i}", slot)] = IntDomain(size)

    def emit_apply(target: str, out: IntDomain, arity: int) -> str:
        names = list(pool)
        args = [names[int(rng.integers(0, len(names)))] for _ in range(arity)]
        domains = [pool[a] for a in args]
        table = _random_table(rng, [d.size for d in domains], out.size)
        indicator = from_table(f"f_{target}", table, domains, out)
        return builder.apply(target, indicator, *args)

    last = next(reversed(pool))
    for step in range(int(rng.integers(1, max_statements + 1))):
        target = f"v{step}"
        scrutinees = [n for n, d in pool.items() if d.size <= MAX_SCRUTINEE]
        if scrutinees and rng.random() < 0.35:
            scrutinee = scrutinees[int(rng.integers(0, len(scrutinees)))]
            out = IntDomain(int(rng.integers(1, max_domain + 1)))
            same = [n for n, d in pool.items() if d == out]
            cases: list = []
            for value in range(pool[scrutinee].size):
                if same and rng.random() < 0.5:
                    cases.append(same[int(rng.integers(0, len(same)))])
                else:
                    arity = int(rng.integers(0, 3))
                    case_target = f"{target}_c{value}"
                    cases.append(
                        lambda b, t=case_target, a=arity: emit_apply(t, out, a)
                    )
            builder.switch(target, scrutinee, cases)
            pool[target] = out
        else:
            out = IntDomain(int(rng.integers(1, max_domain + 1)))
            emit_apply(target, out, int(rng.integers(0, 4)))
            pool[target] = out
        last = target
    builder.observe(last, "out")

    graph = compile_model(builder.build())
    values = {
        n: int(rng.integers(0, p.domain.size)) for n, p in graph.params.items()
    }
    listing = ProgramListing(graph.name, values, graph.format(values))
    return RandomModel(graph, listing, inputs)


def point_mass_mismatches(
    sample: RandomModel, strength: float = 50.0, tol: float = 1e-6
) -> list[str]:
    """Compare compiled marginals with exact execution on point masses.

    Parameters are set to one-hot logits (``strength`` on the chosen value)
    and inputs to point masses. Every top-level variable's marginal must put
    probability >= 1 - ``tol`` on the exactly computed value.

    Returns:
        One message per mismatching variable (empty when consistent).
    """
    graph = sample.graph
    load_listing(graph, sample.listing, strength=strength)
    feed = {
        name: MarginalVec.point_mass(graph.model.int_inputs[name], value)
        for name, value in sample.inputs.items()
    }
    result = graph.forward(feed, observe_outputs=False)
    exact = concrete_eval(graph, sample.listing, sample.inputs)
    problems: list[str] = []
    for name, marginal in result.values.items():
        if not isinstance(marginal, MarginalVec):
            continue
        expected = exact.values[name]
        probs = marginal.probs.data
        if int(np.argmax(probs)) != expected or probs[expected] < 1.0 - tol:
            problems.append(
                f"{name}: exact value {expected}, marginal argmax "
                f"{int(np.argmax(probs))} with p={probs[expected]:.3g}"
            )
        if not marginal.is_normalized(tol):
            problems.append(f"{name}: marginal sums to {probs.sum():.9f}")
    return problems
