"""Held-out evaluation, confidence intervals and transfer measurements."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import stats

from src.models import (
    MathMachine,
    extract_and_run,
    grid_example_inputs,
    grid_feed,
    math_feed,
    neural_reader,
)
from src.tasks import (
    MATH_TASK,
    Batch,
    GridBatch,
    Schedule,
    SymbolSource,
    TapeBatch,
    batches,
    fixed_examples,
)
from src.terpret import (
    DifferentiableProgram,
    LearnableFunction,
    ModelGraph,
    ProgramListing,
    concrete_eval,
)

from .metrics import MetricsLog, Split

logger = logging.getLogger(__name__)

LABEL = "label"


def wilson_score_interval(
    successes: int,
    trials: int,
    confidence: float = 0.95,
) -> tuple[float, float]:
    """Calculate Wilson score confidence interval for a proportion.

    More accurate than normal approximation, especially for accuracies near
    0 or 1.

    Args:
        successes: Number of successes.
        trials: Total number of trials.
        confidence: Confidence level in (0, 1).

    Returns:
        (lower_bound, upper_bound) tuple.

    Raises:
        ValueError: If the confidence level is outside (0, 1).
    """
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"Confidence must be in (0, 1), got {confidence}")
    if trials == 0:
        return (0.0, 1.0)
    z = float(stats.norm.ppf(0.5 + confidence / 2))

    p_hat = successes / trials
    denominator = 1 + z * z / trials
    center = (p_hat + z * z / (2 * trials)) / denominator
    margin = z * math.sqrt(p_hat * (1 - p_hat) / trials + z * z / (4 * trials * trials))
    margin = margin / denominator
    return (max(0.0, center - margin), min(1.0, center + margin))


@dataclass(frozen=True)
class EvalResult:
    """Accuracy and mean loss over a set of examples."""

    correct: int
    total: int
    loss: float | None = None

    @property
    def accuracy(self) -> float:
        """Fraction correct (0 for an empty set)."""
        return self.correct / self.total if self.total else 0.0

    def interval(self, confidence: float = 0.95) -> tuple[float, float]:
        """Wilson interval of the accuracy."""
        return wilson_score_interval(self.correct, self.total, confidence)


def feed_for(batch: Batch) -> dict[str, Any]:
    """Forward-pass feed for a grid or tape batch."""
    if isinstance(batch, GridBatch):
        return grid_feed(batch)
    return math_feed(batch)


def evaluate_program(
    program: DifferentiableProgram,
    eval_batches: Sequence[Batch],
    functions: Mapping[str, LearnableFunction],
) -> EvalResult:
    """Accuracy of the argmax output and mean loss under marginal execution."""
    correct, total, loss = 0, 0, 0.0
    for batch in eval_batches:
        result = program.forward(feed_for(batch), functions, reduction="sum")
        predicted = result.outputs[LABEL].argmax()
        correct += int(np.sum(predicted == batch.labels))
        total += len(batch)
        assert result.loss is not None
        loss += result.loss.item()
    return EvalResult(correct, total, loss / total if total else None)


def evaluate_listing(
    graph: ModelGraph,
    listing: ProgramListing,
    eval_batches: Sequence[GridBatch],
    functions: Mapping[str, LearnableFunction],
) -> EvalResult:
    """Accuracy of an extracted 2x2 program run exactly on every example."""
    correct, total = 0, 0
    for batch in eval_batches:
        for i in range(len(batch)):
            inputs = grid_example_inputs(batch, i)
            result = concrete_eval(graph, listing, inputs, functions)
            correct += int(result.outputs[LABEL] == int(batch.labels[i]))
            total += 1
    return EvalResult(correct, total)


def evaluate_math_listing(
    listing: ProgramListing,
    eval_batches: Sequence[TapeBatch],
    nets: Sequence[tuple[str, int]],
    functions: Mapping[str, LearnableFunction] | None = None,
) -> tuple[EvalResult, float]:
    """Accuracy of an extracted block program, and the fraction that halted.

    With ``functions`` the program reads symbols through the networks;
    otherwise it sees their ground-truth classes.
    """
    correct, total, halted = 0, 0, 0
    for batch in eval_batches:
        for i in range(len(batch)):
            classes = [int(s.classes[i]) for s in batch.symbols]
            read = None
            if functions is not None:
                symbols = [s.take(i) for s in batch.symbols]
                read = neural_reader(functions, nets, symbols)
            run = extract_and_run(listing, classes, nets=nets, read=read)
            halted += int(run.halted)
            correct += int(run.value == int(batch.labels[i]))
            total += 1
    return EvalResult(correct, total), (halted / total if total else 0.0)


@dataclass(frozen=True)
class LengthRow:
    """Generalization results for one expression length."""

    digits: int
    differentiable: EvalResult | None
    discrete: EvalResult
    halted: float

    @property
    def tape_len(self) -> int:
        """Symbols per expression."""
        return 2 * self.digits - 1


def length_sweep(
    listing: ProgramListing,
    lengths: Sequence[int],
    source: SymbolSource,
    examples: int,
    seed: int,
    nets: Sequence[tuple[str, int]],
    machine: MathMachine | None = None,
    functions: Mapping[str, LearnableFunction] | None = None,
    neural: bool = False,
    batch_size: int = 100,
) -> list[LengthRow]:
    """Accuracy per expression length, discrete and (optionally) differentiable.

    Args:
        listing: Extracted program.
        lengths: Digit counts to evaluate.
        source: Symbol images.
        examples: Expressions per length.
        seed: Seed of the expression streams.
        nets: Networks the listing's net choices index.
        machine: When given, also evaluate marginal execution with its
            current parameters.
        functions: Bound networks for marginal execution and, if ``neural``,
            for discrete symbol reading.
        neural: Read symbols through ``functions`` in the discrete run.
        batch_size: Batch size of marginal execution.
    """
    rows = []
    for digits in lengths:
        if digits < 1:
            raise ValueError(f"Expression lengths must be positive, got {digits}")
        pool = fixed_examples(MATH_TASK, source, examples, seed + digits, digits)
        eval_batches = batches(MATH_TASK, pool, batch_size)
        discrete, halted = evaluate_math_listing(
            listing, eval_batches, nets, functions if neural else None
        )
        differentiable = None
        if machine is not None and functions is not None:
            differentiable = evaluate_program(machine, eval_batches, functions)
        rows.append(LengthRow(digits, differentiable, discrete, halted))
        logger.info(
            "%2d digits: discrete %.3f%s",
            digits,
            discrete.accuracy,
            ""
            if differentiable is None
            else f", differentiable {differentiable.accuracy:.3f}",
        )
    return rows


@dataclass(frozen=True)
class TransferReport:
    """Forgetting and reverse transfer of one task over a lifelong run.

    Attributes:
        task: Task name.
        phase_end_accuracy: Accuracy at the end of the task's own phase.
        final_accuracy: Accuracy at the end of training.
        max_drawdown: Largest fall below the running peak after the phase.
    """

    task: str
    phase_end_accuracy: float
    final_accuracy: float
    max_drawdown: float

    @property
    def reverse_transfer(self) -> float:
        """Improvement after the task's phase (positive is reverse transfer)."""
        return self.final_accuracy - self.phase_end_accuracy


def measure_transfer(
    log: MetricsLog,
    schedule: Schedule,
    restart: int = 0,
    split: Split = Split.TEST,
) -> list[TransferReport]:
    """Per-task reverse transfer and drawdown from a lifelong run's log.

    Tasks with no evaluation at or before their phase end are skipped.
    """
    ends = schedule.phase_ends
    reports = []
    for task, phase in schedule.introduced_at().items():
        series = log.series(str(task), split, restart)
        before = [acc for step, acc in series if step <= ends[phase]]
        if not before:
            continue
        at_end = before[-1]
        peak, drawdown = at_end, 0.0
        for step, acc in series:
            if step <= ends[phase]:
                continue
            peak = max(peak, acc)
            drawdown = max(drawdown, peak - acc)
        reports.append(TransferReport(str(task), at_end, series[-1][1], drawdown))
    return reports
