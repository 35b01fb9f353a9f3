"""Task identities and exact ground-truth evaluators.

All arithmetic is over Z_19 (integers 0..M with M = 18). Operators are
encoded 0..3 for +, -, *, / and division is integer division, with division
by zero returning M.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .symbols import DIGIT_CLASSES, OPERATOR_CLASSES, PLUS, TaskDataError

M = 18
MODULUS = M + 1
NUM_OPS = 4
OP_ADD, OP_SUB, OP_MUL, OP_DIV = range(NUM_OPS)
OP_TEXT = ("+", "-", "*", "/")

# Grid cells, row-major.
NW, NE, SW, SE = range(4)
CELL_NAMES = ("NW", "NE", "SW", "SE")


def arith_apply(a: int, b: int, op: int) -> int:
    """``(a op b) mod 19``; ``a / 0`` is 18.

    Total over Z_19 x Z_19 x Z_4.
    """
    op = op % NUM_OPS
    if op == OP_ADD:
        value = a + b
    elif op == OP_SUB:
        value = a - b
    elif op == OP_MUL:
        value = a * b
    elif b == 0:
        return M
    else:
        value = a // b
    return value % MODULUS


class Scenario(Enum):
    """Task families."""

    ADD2X2 = "add2x2"
    APPLY2X2 = "apply2x2"
    MATH = "math"


class Variant(Enum):
    """Which pair of grid cells a 2x2 task reads."""

    TOP = "top"
    LEFT = "left"
    BOTTOM = "bottom"
    RIGHT = "right"


VARIANT_CELLS: dict[Variant, tuple[int, int]] = {
    Variant.TOP: (NW, NE),
    Variant.LEFT: (NW, SW),
    Variant.BOTTOM: (SW, SE),
    Variant.RIGHT: (NE, SE),
}


@dataclass(frozen=True)
class TaskId:
    """A task: scenario plus, for 2x2 scenarios, a variant.

    Written as ``"add2x2:top"`` or ``"math"``.
    """

    scenario: Scenario
    variant: Variant | None = None

    def __post_init__(self) -> None:
        """Check the variant matches the scenario."""
        if self.scenario is Scenario.MATH and self.variant is not None:
            raise TaskDataError("The math scenario has no variant")
        if self.scenario is not Scenario.MATH and self.variant is None:
            raise TaskDataError(f"{self.scenario.value} needs a variant")

    def __str__(self) -> str:
        if self.variant is None:
            return self.scenario.value
        return f"{self.scenario.value}:{self.variant.value}"

    def __lt__(self, other: TaskId) -> bool:
        return str(self) < str(other)

    @property
    def is_grid(self) -> bool:
        """Whether this is a 2x2 task."""
        return self.scenario is not Scenario.MATH

    @property
    def cells(self) -> tuple[int, int]:
        """Grid cells the task reads."""
        if self.variant is None:
            raise TaskDataError(f"{self} does not read grid cells")
        return VARIANT_CELLS[self.variant]

    @classmethod
    def parse(cls, text: str) -> TaskId:
        """Inverse of ``str``.

        Raises:
            TaskDataError: On an unknown scenario or variant.
        """
        scenario_text, _, variant_text = text.strip().partition(":")
        try:
            scenario = Scenario(scenario_text)
            variant = Variant(variant_text) if variant_text else None
        except ValueError as e:
            raise TaskDataError(f"Unknown task {text!r}") from e
        return cls(scenario, variant)


GRID_VARIANTS = (Variant.TOP, Variant.LEFT, Variant.BOTTOM, Variant.RIGHT)
ALL_GRID_TASKS: tuple[TaskId, ...] = tuple(
    TaskId(scenario, variant)
    for scenario in (Scenario.ADD2X2, Scenario.APPLY2X2)
    for variant in GRID_VARIANTS
)
MATH_TASK = TaskId(Scenario.MATH)


def eval_expression(symbols: Sequence[int]) -> int:
    """Left-to-right value of ``d op d op ... d`` over Z_19.

    Raises:
        TaskDataError: If the symbols do not alternate digit, operator, digit.
    """
    if len(symbols) % 2 == 0:
        raise TaskDataError(f"Expression of even length {len(symbols)}")
    for position, symbol in enumerate(symbols):
        expected = DIGIT_CLASSES if position % 2 == 0 else OPERATOR_CLASSES
        if symbol not in expected:
            raise TaskDataError(
                f"Symbol {symbol} at position {position} breaks digit/operator "
                "alternation"
            )
    value = symbols[0]
    for i in range(1, len(symbols), 2):
        value = arith_apply(value, symbols[i + 1], symbols[i] - PLUS)
    return value


def ground_truth(
    task: TaskId,
    symbols: Sequence[int],
    aux: Sequence[int] = (),
) -> int:
    """Label of one example.

    Args:
        task: The task.
        symbols: The four grid classes (NW, NE, SW, SE) for 2x2 tasks, or the
            tape's classes for math.
        aux: The three auxiliary integers of apply2x2 tasks.

    Raises:
        TaskDataError: If the inputs do not fit the task.
    """
    if task.scenario is Scenario.MATH:
        return eval_expression(symbols)
    if len(symbols) != 4:
        raise TaskDataError(f"{task} needs 4 grid symbols, got {len(symbols)}")
    first, second = (symbols[c] for c in task.cells)
    if task.scenario is Scenario.ADD2X2:
        if first not in DIGIT_CLASSES or second not in DIGIT_CLASSES:
            raise TaskDataError(f"{task} reads digits, got {first} and {second}")
        return (first + second) % MODULUS
    if len(aux) != 3:
        raise TaskDataError(f"{task} needs 3 auxiliary integers, got {len(aux)}")
    if first not in OPERATOR_CLASSES or second not in OPERATOR_CLASSES:
        raise TaskDataError(f"{task} reads operators, got {first} and {second}")
    d1, d2, d3 = aux
    return arith_apply(arith_apply(d1, d2, first - PLUS), d3, second - PLUS)


def arith_table() -> np.ndarray:
    """``arith_apply`` tabulated over Z_19 x Z_19 x Z_4."""
    table = np.empty((MODULUS, MODULUS, NUM_OPS), dtype=np.int64)
    for a in range(MODULUS):
        for b in range(MODULUS):
            for op in range(NUM_OPS):
                table[a, b, op] = arith_apply(a, b, op)
    return table
