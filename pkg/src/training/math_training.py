"""Training the block machine on short arithmetic expressions."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

import numpy as np

from configs import MathConfig
from src.engine import Optimizer, Tape
from src.models import MathMachine, build_math_model
from src.neural import (
    DIGIT_NET,
    OPERATOR_NET,
    Library,
    LibraryError,
    Perception,
    bind_functions,
)
from src.tasks import MATH_TASK, SymbolSource, TaskDataset
from src.terpret import LearnableFunction, ProgramListing, discretize

from .convergence import convergence_index
from .evaluation import evaluate_math_listing, evaluate_program, feed_for
from .metrics import MetricsLog, MetricsRow, Split
from .tensorboard import ScalarWriter
from .trainer import (
    NET_CLASSES,
    NumericalError,
    RunConfig,
    eval_set,
    open_sources,
    oracle_functions,
    restore_logits,
    stable_key,
)

logger = logging.getLogger(__name__)

MATH_NETS = (
    (DIGIT_NET, NET_CLASSES[DIGIT_NET]),
    (OPERATOR_NET, NET_CLASSES[OPERATOR_NET]),
)


@dataclass
class MathResult:
    """Outcome of one block-machine run.

    Attributes:
        log: Metrics rows (task ``"math"``).
        machine: The trained machine.
        listing: Its extracted program.
        library: The library read through (None under oracle perception).
        converged_step: Step of the evaluation completing a convergence jump.
        restart: Restart index.
    """

    log: MetricsLog
    machine: MathMachine
    listing: ProgramListing
    library: Library | None
    converged_step: int | None
    restart: int = 0

    @property
    def converged(self) -> bool:
        """Whether validation accuracy showed a convergence jump."""
        return self.converged_step is not None


def math_functions(
    library: Library | None, perception: Perception
) -> dict[str, LearnableFunction]:
    """Networks the machine reads through.

    Raises:
        LibraryError: If neural perception is asked for without a library
            holding both networks.
    """
    if perception is Perception.ORACLE:
        return oracle_functions([n for n, _ in MATH_NETS])
    missing = [n for n, _ in MATH_NETS if library is None or n not in library]
    if missing:
        raise LibraryError(
            f"Neural math training needs a library with {', '.join(missing)}"
        )
    assert library is not None
    return bind_functions(library, Perception.NEURAL)


def train_math(
    config: RunConfig,
    math: MathConfig,
    library: Library | None = None,
    sources: tuple[SymbolSource, SymbolSource] | None = None,
    stop_on_convergence: bool = True,
    program: Mapping[str, Any] | None = None,
) -> MathResult:
    """Train the block machine on ``math.train_digits``-digit expressions.

    Symbols are read by the library networks when a library is given, and
    otherwise as ``math.perception`` says (which must then be "oracle").

    Args:
        config: Shared run settings (seed, optimizer, evaluation cadence).
        math: Block count, training length and step budget.
        library: Trained networks to read symbols through.
        sources: Pre-opened train and test symbol sources.
        stop_on_convergence: End training at the first convergence jump.
        program: Starting logits saved by ``program_state`` (an entry of a
            run's programs.json); random logits otherwise.

    Raises:
        NumericalError: If the loss becomes NaN or infinite.
        LibraryError: If the library lacks a network the machine reads.
    """
    perception = (
        Perception.NEURAL if library is not None else Perception(math.perception)
    )
    functions = math_functions(library, perception)
    train_source, test_source = sources or open_sources(config.data, config.seed)
    rng = config.rng(0)
    machine = build_math_model(
        math.num_blocks,
        tape_len=2 * math.train_digits - 1,
        nets=MATH_NETS,
        rng=config.rng(1),
        init_scale=config.init_scale,
        num_registers=math.num_registers,
    )
    if program is not None:
        restore_logits(machine, program)
    dataset = TaskDataset(
        MATH_TASK,
        train_source,
        pool_cap=config.data.pool_cap,
        seed=config.seed + stable_key(MATH_TASK),
        num_digits=math.train_digits,
    )
    eval_batches = eval_set(
        MATH_TASK, test_source, config.eval_size, config.seed, math.train_digits
    )
    optimizer = Optimizer(
        config.optimizer.kind,
        config.optimizer.rates,
        beta1=config.optimizer.beta1,
        beta2=config.optimizer.beta2,
        eps=config.optimizer.eps,
        rho=config.optimizer.rho,
    )
    writer = (
        ScalarWriter(config.tensorboard_dir, config.restart)
        if config.tensorboard_dir
        else None
    )
    log = MetricsLog()
    accuracies: list[float] = []
    steps_at: list[int] = []
    converged_step = None
    task = str(MATH_TASK)
    logger.info(
        "restart %d: math with %d blocks, %d registers, %s perception, up to %d steps",
        config.restart,
        math.num_blocks,
        math.num_registers,
        perception.value,
        math.steps,
    )

    for step in range(math.steps):
        batch = dataset.sample(config.batch_size, rng)
        with Tape() as tape:
            result = machine.forward(
                feed_for(batch), functions, config.loss_reduction
            )
        assert result.loss is not None
        loss = result.loss.item()
        if not np.isfinite(loss):
            raise NumericalError(f"loss is {loss}", config.restart, step, task)
        grads = tape.backward(result.loss)
        optimizer.step(grads.keys(), grads)
        if library is not None:
            library.mark_trained(
                {p.name.split(".")[0] for p in grads if p.group == "perceptual"}
            )

        done = step + 1
        if done % config.eval_every and done != math.steps:
            continue
        evaluation = evaluate_program(machine, eval_batches, functions)
        row = MetricsRow(
            done,
            task,
            Split.TEST.value,
            evaluation.accuracy,
            evaluation.loss,
            config.restart,
        )
        log.log(row)
        if writer is not None:
            writer.add_row(row)
        accuracies.append(evaluation.accuracy)
        steps_at.append(done)
        logger.debug("step %d: math accuracy %.3f", done, evaluation.accuracy)
        index = convergence_index(
            accuracies,
            config.convergence_jump,
            config.convergence_level,
            config.convergence_window,
        )
        if index is not None and converged_step is None:
            converged_step = steps_at[index]
            logger.info(
                "restart %d converged at step %d (%d training examples)",
                config.restart,
                converged_step,
                converged_step * config.batch_size,
            )
            if stop_on_convergence:
                break

    listing = discretize(machine)
    discrete, halted = evaluate_math_listing(
        listing,
        eval_batches,
        MATH_NETS,
        functions if perception is Perception.NEURAL else None,
    )
    log.log(
        MetricsRow(
            steps_at[-1] if steps_at else 0,
            task,
            Split.DISCRETE.value,
            discrete.accuracy,
            None,
            config.restart,
        )
    )
    logger.info(
        "restart %d: extracted program %.3f accurate, %.3f halted",
        config.restart,
        discrete.accuracy,
        halted,
    )
    if writer is not None:
        writer.close()
    return MathResult(log, machine, listing, library, converged_step, config.restart)
