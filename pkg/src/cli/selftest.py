"""Offline self-checks: gradients, semantics, normalization and IDX parsing.

Every check runs on synthetic glyphs and small random models, so a fresh
checkout without data files can run them.
"""

from __future__ import annotations

import logging
import tempfile
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.engine import (
    Parameter,
    Tape,
    Tensor,
    add,
    concat,
    constant,
    contract,
    gather,
    log,
    matmul,
    mul,
    neg,
    relu,
    scale,
    softmax,
    sum_axis,
)
from src.models import (
    build_grid_model,
    build_math_model,
    extract_and_run,
    golden_math_listing,
    grid_feed,
    math_feed,
)
from src.neural import (
    NeuralFunction,
    OracleFunction,
    digit_net_spec,
    operator_net_spec,
)
from src.tasks import (
    MATH_TASK,
    Scenario,
    SymbolSource,
    TaskId,
    Variant,
    batches,
    eval_expression,
    fixed_examples,
    load_idx,
    read_idx_images,
    read_idx_labels,
    write_idx,
)
from src.terpret import LearnableFunction, point_mass_mismatches, random_model

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-3
MASS_TOLERANCE = 1e-6
MAX_CHECK_DIGITS = 5


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one self-check.

    Attributes:
        name: Check name.
        passed: Whether it passed.
        detail: Summary or first failure.
        numeric: Whether a failure is numerical (otherwise data/IO).
        checked: Cases examined (machine steps for the mass check).
    """

    name: str
    passed: bool
    detail: str
    numeric: bool = True
    checked: int = 0


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def gradient_error(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    rng: np.random.Generator | None = None,
    points: int = 50,
    eps: float = 1e-6,
) -> float:
    """Worst relative error between tape and central-difference gradients.

    Up to ``points`` coordinates of each parameter are checked, drawn with
    ``rng`` when a parameter has more.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    with Tape() as tape:
        loss = loss_fn()
    grads = tape.backward(loss)
    worst = 0.0
    for param in params:
        analytic = grads.get(param, np.zeros_like(param.data))
        flat = param.data.reshape(-1)
        coords = np.arange(flat.size)
        if flat.size > points:
            coords = rng.choice(flat.size, size=points, replace=False)
        for c in coords:
            original = flat[c]
            flat[c] = original + eps
            plus = loss_fn().item()
            flat[c] = original - eps
            minus = loss_fn().item()
            flat[c] = original
            numeric = (plus - minus) / (2 * eps)
            exact = analytic.reshape(-1)[c]
            denom = max(abs(exact) + abs(numeric), 1e-6)
            worst = max(worst, abs(exact - numeric) / denom)
    return worst


def _weighted(out: Tensor, weights: np.ndarray) -> Tensor:
    letters = "abcdefgh"[: out.ndim]
    return contract(f"{letters},{letters}->", out, constant(weights))


def primitive_checks(
    rng: np.random.Generator,
) -> dict[str, tuple[Callable[[], Tensor], list[Parameter]]]:
    """A scalar loss through each primitive, with its parameters."""
    a = Parameter(rng.normal(size=(3, 4)))
    b = Parameter(rng.normal(size=(4, 2)))
    c = Parameter(rng.normal(size=(3, 4)))
    p = Parameter(rng.uniform(0.2, 1.0, size=(3, 4)))
    v = Parameter(rng.normal(size=4))
    w34 = rng.normal(size=(3, 4))
    w32 = rng.normal(size=(3, 2))
    w38 = rng.normal(size=(3, 8))

    return {
        "matmul": (lambda: _weighted(matmul(a, b), w32), [a, b]),
        "add": (lambda: _weighted(add(a, v), w34), [a, v]),
        "mul": (lambda: _weighted(mul(a, c), w34), [a, c]),
        "scale": (lambda: _weighted(scale(a, 2.5), w34), [a]),
        "neg": (lambda: _weighted(neg(a), w34), [a]),
        "relu": (lambda: _weighted(relu(a), w34), [a]),
        "softmax": (lambda: _weighted(softmax(a), w34), [a]),
        "log": (lambda: _weighted(log(p), w34), [p]),
        "sum_axis": (lambda: _weighted(sum_axis(a, 1), w34[:, 0]), [a]),
        "concat": (lambda: _weighted(concat([a, c], axis=1), w38), [a, c]),
        "gather": (lambda: _weighted(gather(a, 2, axis=1), w34[:, 0]), [a]),
        "contract": (
            lambda: _weighted(contract("ij,jk,i->ik", a, b, gather(c, 0, 1)), w32),
            [a, b, c],
        ),
    }


def _tiny_nets(rng: np.random.Generator) -> dict[str, LearnableFunction]:
    return {
        "net_0": NeuralFunction("net_0", digit_net_spec((8,)), rng=rng),
        "net_1": NeuralFunction("net_1", operator_net_spec((8,)), rng=rng),
    }


def composite_checks(
    rng: np.random.Generator, source: SymbolSource
) -> dict[str, tuple[Callable[[], Tensor], list[Parameter]]]:
    """Losses of the three task models over small neural networks."""
    functions = _tiny_nets(rng)
    net_params = [p for fn in functions.values() for p in fn.parameters()]
    checks = {}
    for scenario in (Scenario.ADD2X2, Scenario.APPLY2X2):
        task = TaskId(scenario, Variant.TOP)
        net = "net_0" if scenario is Scenario.ADD2X2 else "net_1"
        graph = build_grid_model(
            task, [(net, 10 if net == "net_0" else 4)], rng=rng, init_scale=1.0
        )
        batch = batches(task, fixed_examples(task, source, 4, seed=1), 4)[0]
        feed = grid_feed(batch)

        def grid_loss(graph=graph, feed=feed) -> Tensor:
            result = graph.forward(feed, functions)
            assert result.loss is not None
            return result.loss

        params = [p.logits for p in graph.params.values()]
        checks[str(task)] = (grid_loss, params + functions[net].parameters())

    machine = build_math_model(
        3, tape_len=3, rng=rng, init_scale=1.0, num_registers=3
    )
    tape_batch = batches(MATH_TASK, fixed_examples(MATH_TASK, source, 4, seed=2), 4)[0]
    math_inputs = math_feed(tape_batch)

    def math_loss() -> Tensor:
        result = machine.forward(math_inputs, functions)
        assert result.loss is not None
        return result.loss

    checks["math"] = (
        math_loss,
        [p.logits for p in machine.params.values()] + net_params,
    )
    return checks


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def check_gradients(rng: np.random.Generator, source: SymbolSource) -> CheckResult:
    """Tape gradients of primitives and task models match finite differences."""
    errors = {}
    for name, (loss_fn, params) in primitive_checks(rng).items():
        errors[name] = gradient_error(loss_fn, params, rng)
    for name, (loss_fn, params) in composite_checks(rng, source).items():
        errors[name] = gradient_error(loss_fn, params, rng, points=20)
    worst = max(errors, key=errors.__getitem__)
    passed = errors[worst] < GRADIENT_TOLERANCE
    return CheckResult(
        "gradients",
        passed,
        f"{len(errors)} losses, worst {worst} relative error {errors[worst]:.2e}",
    )


def check_point_mass(rng: np.random.Generator, models: int) -> CheckResult:
    """Compiled marginals agree with exact execution on one-hot programs."""
    for i in range(models):
        sample = random_model(rng, name=f"random_{i}")
        mismatches = point_mass_mismatches(sample)
        if mismatches:
            return CheckResult("point-mass", False, f"model {i}: {mismatches[0]}")
    return CheckResult("point-mass", True, f"{models} random models agree")


def check_normalization(
    rng: np.random.Generator, source: SymbolSource, min_steps: int
) -> CheckResult:
    """Mass of random block machines stays normalized at every step.

    Machines with 1 to 4 blocks and registers run on tapes of up to
    ``2 * MAX_CHECK_DIGITS - 1`` symbols until ``min_steps`` unrolled steps
    have been checked.
    """
    functions = {
        "net_0": OracleFunction("net_0", 10),
        "net_1": OracleFunction("net_1", 4),
    }
    steps = 0
    i = 0
    while steps < min_steps:
        digits = int(rng.integers(1, MAX_CHECK_DIGITS + 1))
        machine = build_math_model(
            int(rng.integers(1, 5)),
            tape_len=2 * digits - 1,
            rng=rng,
            init_scale=2.0,
            num_registers=int(rng.integers(1, 5)),
        )
        examples = fixed_examples(MATH_TASK, source, 3, seed=i, num_digits=digits)
        feed = math_feed(batches(MATH_TASK, examples, 3)[0])
        result = machine.forward(feed, functions, observe_outputs=False)
        t = 0
        while f"live_{t}" in result.values:
            live = result.values[f"live_{t}"].data.sum(axis=(1, 2))
            total = live + result.values[f"halted_{t}"].data
            if np.max(np.abs(total - 1.0)) > MASS_TOLERANCE:
                return CheckResult(
                    "normalization",
                    False,
                    f"machine {i}, step {t}: mass {total}",
                    checked=steps,
                )
            t += 1
            steps += 1
        sums = [result.outputs["label"].probs.data.sum(axis=-1)]
        sums += [
            result.values[f"R{j}"].probs.data.sum(axis=-1)
            for j in range(machine.num_registers)
        ]
        worst = max(float(np.max(np.abs(s - 1.0))) for s in sums)
        if worst > MASS_TOLERANCE:
            return CheckResult(
                "normalization",
                False,
                f"machine {i}: output or register off by {worst:.2e}",
                checked=steps,
            )
        i += 1
    return CheckResult(
        "normalization",
        True,
        f"{steps} machine steps over {i} machines conserve mass",
        checked=steps,
    )


def check_golden_math(rng: np.random.Generator, per_length: int) -> CheckResult:
    """The reference block program evaluates expressions of 1 to 16 digits."""
    listing = golden_math_listing(build_math_model(3, num_registers=3))
    for digits in range(1, 17):
        for _ in range(per_length):
            symbols = [int(rng.integers(0, 10))]
            for _ in range(digits - 1):
                symbols += [10 + int(rng.integers(0, 4)), int(rng.integers(0, 10))]
            run = extract_and_run(listing, symbols)
            expected = eval_expression(symbols)
            if run.value != expected:
                return CheckResult(
                    "golden-math",
                    False,
                    f"{symbols}: got {run.value}, expected {expected}",
                )
    return CheckResult("golden-math", True, f"{16 * per_length} expressions")


def check_idx(rng: np.random.Generator) -> CheckResult:
    """A 4-image IDX fixture written and parsed back bit-exactly."""
    images = rng.integers(0, 256, size=(4, 28, 28)) / 255.0
    labels = np.array([3, 1, 4, 1])
    with tempfile.TemporaryDirectory() as tmp:
        images_path = Path(tmp) / "images-idx3-ubyte"
        labels_path = Path(tmp) / "labels-idx1-ubyte"
        write_idx(images_path, labels_path, images, labels)
        parsed = read_idx_images(images_path)
        parsed_labels = read_idx_labels(labels_path)
        source = load_idx(images_path, labels_path)
    if not np.array_equal(parsed.reshape(4, 28, 28), images):
        return CheckResult("idx", False, "pixels differ after round trip", False)
    if not np.array_equal(parsed_labels, labels) or source.classes() != [1, 3, 4]:
        return CheckResult("idx", False, "labels differ after round trip", False)
    return CheckResult("idx", True, "4-image fixture parsed", False)


def run_selftest(seed: int = 0, quick: bool = False) -> list[CheckResult]:
    """Run every self-check.

    Args:
        seed: Seed of all random models and data.
        quick: Use fewer random models.
    """
    rng = np.random.default_rng(seed)
    source = SymbolSource.synthetic("test", 2, seed)
    results = [
        check_idx(rng),
        check_gradients(rng, source),
        check_point_mass(rng, 100 if quick else 1000),
        check_normalization(rng, source, 1000 if quick else 10000),
        check_golden_math(rng, 20 if quick else 500),
    ]
    for r in results:
        logger.info("%s: %s (%s)", r.name, "ok" if r.passed else "FAILED", r.detail)
    return results
