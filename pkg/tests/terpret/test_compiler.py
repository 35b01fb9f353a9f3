"""Tests for model building, compilation and the forward pass."""

import numpy as np
import pytest

from src.engine import Tape
from src.terpret import (
    CompileError,
    FeedError,
    IntDomain,
    MarginalVec,
    ModelBuilder,
    SwitchError,
    compile_model,
    lift,
)

Z4 = IntDomain(4)


def add_mod4(x: int, y: int) -> int:
    return (x + y) % 4


def sub_mod4(x: int, y: int) -> int:
    return (x - y) % 4


def adder_model() -> ModelBuilder:
    """``out = op ? x - y : x + y`` with ``op`` inferred."""
    b = ModelBuilder("adder", rng=np.random.default_rng(0))
    b.param("op", 2)
    b.input_int("x", 4)
    b.input_int("y", 4)
    plus = b.apply("sum", lift(add_mod4, [Z4, Z4], Z4), "x", "y")
    b.switch(
        "out",
        "op",
        [
            plus,
            lambda m: m.apply("diff", lift(sub_mod4, [Z4, Z4], Z4), "x", "y"),
        ],
    )
    b.observe("out", "label")
    return b


class TestCompileErrors:
    """Tests for static checks at compile time."""

    def test_reassignment(self) -> None:
        """Test a variable assigned twice names the variable."""
        b = ModelBuilder("m")
        b.input_int("x", 4)
        b.copy_input("a", "x")
        b.copy_input("a", "x")
        with pytest.raises(CompileError, match="'a'.*more than once"):
            compile_model(b.build())

    def test_read_before_assignment(self) -> None:
        """Test reading an unknown variable names it."""
        b = ModelBuilder("m")
        b.apply("a", lift(add_mod4, [Z4, Z4], Z4), "ghost", "ghost")
        with pytest.raises(CompileError, match="'ghost'"):
            compile_model(b.build())

    def test_cycle(self) -> None:
        """Test mutually dependent statements are rejected."""
        b = ModelBuilder("m")
        ind = lift(add_mod4, [Z4, Z4], Z4)
        b.apply("a", ind, "b", "b")
        b.apply("b", ind, "a", "a")
        with pytest.raises(CompileError, match="Cyclic"):
            compile_model(b.build())

    def test_self_dependency(self) -> None:
        """Test a statement reading its own target is rejected."""
        b = ModelBuilder("m")
        b.apply("a", lift(add_mod4, [Z4, Z4], Z4), "a", "a")
        with pytest.raises(CompileError, match="depends on itself"):
            compile_model(b.build())

    def test_domain_mismatch(self) -> None:
        """Test an argument over the wrong domain names the target."""
        b = ModelBuilder("m")
        b.input_int("x", 3)
        b.apply("a", lift(add_mod4, [Z4, Z4], Z4), "x", "x")
        with pytest.raises(CompileError, match="'a'"):
            compile_model(b.build())

    def test_switch_missing_case(self) -> None:
        """Test a switch must cover every scrutinee value."""
        b = ModelBuilder("m")
        b.param("p", 3)
        b.input_int("x", 4)
        b.switch("a", "p", ["x", "x"])
        with pytest.raises(SwitchError, match="0..2"):
            compile_model(b.build())

    def test_duplicate_parameter(self) -> None:
        """Test declaring a parameter twice fails immediately."""
        b = ModelBuilder("m")
        b.param("p", 2)
        with pytest.raises(CompileError, match="declared twice"):
            b.param("p", 3)


class TestForward:
    """Tests for the compiled forward pass."""

    def test_out_of_order_statements_are_sorted(self) -> None:
        """Test statements may be written before their inputs."""
        b = ModelBuilder("m")
        ind = lift(add_mod4, [Z4, Z4], Z4)
        b.apply("b", ind, "a", "a")
        b.copy_input("a", "x")
        b.input_int("x", 4)
        graph = compile_model(b.build())
        result = graph.forward({"x": np.array([3])}, observe_outputs=False)
        np.testing.assert_array_equal(result.values["b"].argmax(), [2])

    def test_pinned_switch(self) -> None:
        """Test a pinned program computes its branch exactly."""
        graph = compile_model(adder_model().build())
        graph.params["op"].set_point_mass(1)
        feed = {"x": np.array([1, 3]), "y": np.array([2, 1]), "label": 0}
        result = graph.forward(feed, observe_outputs=False)
        np.testing.assert_array_equal(result.outputs["label"].argmax(), [3, 2])
        assert result.loss is None

    def test_loss_trains_switch(self) -> None:
        """Test gradient descent on the loss finds the subtracting branch."""
        graph = compile_model(adder_model().build())
        xs = np.array([0, 1, 2, 3, 1])
        ys = np.array([1, 2, 0, 1, 3])
        feed = {"x": xs, "y": ys, "label": (xs - ys) % 4}
        logits = graph.params["op"].logits
        for _ in range(50):
            with Tape() as tape:
                loss = graph.forward(feed).loss
            logits.data -= 0.5 * tape.backward(loss)[logits]
        assert graph.params["op"].value() == 1

    def test_marginal_inputs(self) -> None:
        """Test inputs may be fed as marginals."""
        graph = compile_model(adder_model().build())
        graph.params["op"].set_point_mass(0)
        feed = {
            "x": MarginalVec.uniform(Z4, batch_size=1),
            "y": np.array([0]),
            "label": 0,
        }
        result = graph.forward(feed)
        np.testing.assert_allclose(
            result.outputs["label"].probs.data, np.full((1, 4), 0.25), atol=1e-9
        )
        assert result.loss.item() == pytest.approx(np.log(4), rel=1e-6)

    def test_missing_input(self) -> None:
        """Test a missing input is reported by name."""
        graph = compile_model(adder_model().build())
        with pytest.raises(FeedError, match="'y'"):
            graph.forward({"x": np.array([0]), "label": 0})

    def test_missing_observation(self) -> None:
        """Test a missing observation is reported by slot."""
        graph = compile_model(adder_model().build())
        with pytest.raises(FeedError, match="'label'"):
            graph.forward({"x": np.array([0]), "y": np.array([0])})

    def test_missing_function(self) -> None:
        """Test an unbound learnable function is reported."""
        b = ModelBuilder("m")
        b.input_tensor("img", (2,))
        b.function("net", Z4)
        b.call("d", "net", "img")
        graph = compile_model(b.build())
        with pytest.raises(FeedError, match="'net'"):
            graph.forward({"img": np.zeros((1, 2))}, observe_outputs=False)

    def test_default_format(self) -> None:
        """Test the default listing shows one line per parameter."""
        graph = compile_model(adder_model().build())
        assert graph.format({"op": 1}) == "op = 1"
