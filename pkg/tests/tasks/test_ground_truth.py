"""Tests for task identities and ground-truth evaluation."""

import pytest

from src.tasks import (
    ALL_GRID_TASKS,
    MATH_TASK,
    MODULUS,
    NE,
    NW,
    SE,
    SW,
    M,
    Scenario,
    TaskDataError,
    TaskId,
    Variant,
    arith_apply,
    arith_table,
    eval_expression,
    ground_truth,
    parse_symbols,
)
from src.tasks.symbols import DIVIDE, MINUS, PLUS, TIMES, symbol_text


class TestArithmetic:
    """Tests for arith_apply over Z_19."""

    def test_exhaustive(self) -> None:
        """Test every operand pair and operator against Python arithmetic."""
        for a in range(MODULUS):
            for b in range(MODULUS):
                assert arith_apply(a, b, 0) == (a + b) % 19
                assert arith_apply(a, b, 1) == (a - b) % 19
                assert arith_apply(a, b, 2) == (a * b) % 19
                expected = M if b == 0 else a // b
                assert arith_apply(a, b, 3) == expected

    def test_division_by_zero(self) -> None:
        """Test all 19 divisions by zero give M."""
        assert [arith_apply(a, 0, 3) for a in range(MODULUS)] == [18] * 19

    def test_operator_reduced_mod_4(self) -> None:
        """Test operator codes wrap around."""
        assert arith_apply(3, 4, 6) == arith_apply(3, 4, 2)

    def test_table_matches(self) -> None:
        """Test the tabulated function agrees pointwise."""
        table = arith_table()
        assert table.shape == (19, 19, 4)
        assert table[7, 0, 3] == 18
        assert table[5, 6, 1] == 18
        assert table.max() <= M and table.min() >= 0


class TestTaskId:
    """Tests for TaskId."""

    def test_parse_and_str(self) -> None:
        """Test parsing is the inverse of str."""
        for task in (*ALL_GRID_TASKS, MATH_TASK):
            assert TaskId.parse(str(task)) == task

    def test_cells(self) -> None:
        """Test which cells each variant reads."""
        assert TaskId(Scenario.ADD2X2, Variant.TOP).cells == (NW, NE)
        assert TaskId(Scenario.ADD2X2, Variant.LEFT).cells == (NW, SW)
        assert TaskId(Scenario.APPLY2X2, Variant.BOTTOM).cells == (SW, SE)
        assert TaskId(Scenario.APPLY2X2, Variant.RIGHT).cells == (NE, SE)

    def test_unknown_task(self) -> None:
        """Test an unknown name is a data error."""
        with pytest.raises(TaskDataError, match="Unknown task"):
            TaskId.parse("add3x3:top")

    def test_variant_required(self) -> None:
        """Test grid scenarios need a variant and math takes none."""
        with pytest.raises(TaskDataError):
            TaskId(Scenario.ADD2X2)
        with pytest.raises(TaskDataError):
            TaskId(Scenario.MATH, Variant.TOP)

    def test_eight_grid_tasks(self) -> None:
        """Test there are eight distinct 2x2 tasks."""
        assert len(set(ALL_GRID_TASKS)) == 8


class TestGroundTruth:
    """Tests for ground_truth and eval_expression."""

    def test_add_top(self) -> None:
        """Test add2x2:top adds the two top digits."""
        assert ground_truth(TaskId.parse("add2x2:top"), [3, 4, 9, 9]) == 7

    def test_add_wraps(self) -> None:
        """Test sums wrap modulo 19."""
        assert ground_truth(TaskId.parse("add2x2:bottom"), [0, 0, 9, 9]) == 18
        assert ground_truth(TaskId.parse("add2x2:right"), [0, 9, 0, 9]) == 18

    def test_apply_left(self) -> None:
        """Test apply2x2:left computes (d1 op1 d2) op2 d3."""
        cells = [PLUS, TIMES, DIVIDE, MINUS]
        assert ground_truth(TaskId.parse("apply2x2:left"), cells, (5, 0, 2)) == 2

    def test_apply_needs_aux(self) -> None:
        """Test apply tasks need three auxiliary integers."""
        with pytest.raises(TaskDataError, match="3 auxiliary"):
            ground_truth(TaskId.parse("apply2x2:top"), [PLUS] * 4, (1, 2))

    def test_add_rejects_operators(self) -> None:
        """Test add tasks read digits only."""
        with pytest.raises(TaskDataError, match="reads digits"):
            ground_truth(TaskId.parse("add2x2:top"), [PLUS, 1, 2, 3])

    def test_expression_left_to_right(self) -> None:
        """Test expressions ignore precedence and wrap modulo 19."""
        assert eval_expression(parse_symbols("5-6+4")) == 3
        assert eval_expression(parse_symbols("3+4*2")) == 14
        assert eval_expression(parse_symbols("7")) == 7
        assert eval_expression(parse_symbols("9/0")) == 18

    def test_expression_alternation(self) -> None:
        """Test malformed expressions are rejected."""
        with pytest.raises(TaskDataError, match="even length"):
            eval_expression([1, PLUS])
        with pytest.raises(TaskDataError, match="position 1"):
            eval_expression([1, 2, 3])


class TestSymbols:
    """Tests for symbol text conversion."""

    def test_parse_aliases(self) -> None:
        """Test operator spellings."""
        assert parse_symbols("1 x 2 : 3 − 4") == [1, TIMES, 2, DIVIDE, 3, MINUS, 4]
        assert parse_symbols("8×9÷2") == [8, TIMES, 9, DIVIDE, 2]

    def test_unknown_symbol(self) -> None:
        """Test unknown characters are rejected."""
        with pytest.raises(TaskDataError, match="Unknown symbol"):
            parse_symbols("3^2")

    def test_symbol_text(self) -> None:
        """Test printable forms."""
        assert [symbol_text(s) for s in (7, PLUS, DIVIDE)] == ["7", "+", "/"]
