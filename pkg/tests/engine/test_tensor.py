"""Tests for tensors, the tape and the primitives."""

import numpy as np
import pytest

from src.cli.selftest import GRADIENT_TOLERANCE, gradient_error, primitive_checks
from src.engine import (
    EngineError,
    Parameter,
    ShapeError,
    Tape,
    active_tape,
    add,
    constant,
    contract,
    gather,
    log,
    matmul,
    mul,
    neg,
    relu,
    softmax,
    sum_axis,
)


class TestPrimitives:
    """Tests for forward values of the primitives."""

    def test_softmax_symmetric(self) -> None:
        """Test softmax of equal logits is uniform."""
        out = softmax(constant([0.0, 0.0]))
        np.testing.assert_allclose(out.data, [0.5, 0.5])

    def test_softmax_normalized_and_positive(self, rng: np.random.Generator) -> None:
        """Test softmax rows sum to one and stay positive."""
        out = softmax(constant(rng.normal(scale=20.0, size=(5, 7))))
        np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-9)
        assert np.all(out.data > 0)

    def test_relu(self) -> None:
        """Test relu clamps negatives to zero."""
        out = relu(constant([-1.5, 0.0, 2.0]))
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])

    def test_contract_point_masses(self) -> None:
        """Test contracting an addition table against point masses."""
        table = np.zeros((3, 3, 3))
        for x in range(3):
            for y in range(3):
                table[(x + y) % 3, x, y] = 1.0
        out = contract(
            "ijk,j,k->i",
            constant(table),
            constant([1.0, 0.0, 0.0]),
            constant([0.0, 1.0, 0.0]),
        )
        np.testing.assert_array_equal(out.data, [0.0, 1.0, 0.0])

    def test_bias_add(self) -> None:
        """Test a vector adds to every row."""
        out = add(constant(np.zeros((2, 3))), constant([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(out.data, [[1, 2, 3], [1, 2, 3]])

    def test_log_floor(self) -> None:
        """Test log clamps at the floor."""
        out = log(constant([0.0, 1.0]), floor=1e-12)
        np.testing.assert_allclose(out.data, [np.log(1e-12), 0.0])

    def test_gather_per_row(self) -> None:
        """Test gathering one entry per row."""
        out = gather(constant([[1.0, 2.0], [3.0, 4.0]]), np.array([1, 0]))
        np.testing.assert_array_equal(out.data, [2.0, 3.0])

    def test_ops_outside_tape_only_compute(self) -> None:
        """Test primitives work without an active tape."""
        assert active_tape() is None
        out = matmul(constant(np.eye(2)), constant([[1.0], [2.0]]))
        assert out.tape is None
        np.testing.assert_array_equal(out.data, [[1.0], [2.0]])


class TestShapeErrors:
    """Tests for shape validation."""

    def test_matmul_mismatch_names_shapes(self) -> None:
        """Test matmul mismatch error names the primitive and shapes."""
        with pytest.raises(ShapeError, match=r"matmul.*\(2, 3\).*\(2, 3\)"):
            matmul(constant(np.zeros((2, 3))), constant(np.zeros((2, 3))))

    def test_add_refuses_general_broadcast(self) -> None:
        """Test add only broadcasts bias vectors."""
        with pytest.raises(ShapeError, match="add"):
            add(constant(np.zeros((2, 3))), constant(np.zeros((2, 1))))

    def test_mul_mismatch(self) -> None:
        """Test mul needs equal shapes."""
        with pytest.raises(ShapeError):
            mul(constant(np.zeros(3)), constant(np.zeros(4)))

    def test_contract_inconsistent_index(self) -> None:
        """Test contract rejects an index with two sizes."""
        with pytest.raises(ShapeError, match="index 'j'"):
            contract("ij,j->i", constant(np.zeros((2, 3))), constant(np.zeros(4)))

    def test_shape_error_is_engine_error(self) -> None:
        """Test shape errors share the engine base class."""
        assert issubclass(ShapeError, EngineError)


class TestBackward:
    """Tests for reverse-mode differentiation."""

    def test_square(self) -> None:
        """Test d(x^2)/dx at 3 is 6."""
        x = Parameter([3.0])
        with Tape() as tape:
            loss = sum_axis(mul(x, x))
        grads = tape.backward(loss)
        np.testing.assert_allclose(grads[x], [6.0])

    def test_cross_entropy_identity(self, rng: np.random.Generator) -> None:
        """Test the gradient of -log softmax(z)[k] is softmax(z) - onehot(k)."""
        z = Parameter(rng.normal(size=5))
        with Tape() as tape:
            loss = neg(log(gather(softmax(z), 2)))
        grads = tape.backward(loss)
        expected = softmax(constant(z.data)).data
        expected[2] -= 1.0
        np.testing.assert_allclose(grads[z], expected, atol=1e-12)

    def test_shared_leaf_accumulates(self) -> None:
        """Test a parameter used twice gets the sum of both gradients."""
        x = Parameter([2.0, -1.0])
        with Tape() as tape:
            loss = sum_axis(add(x, x))
        grads = tape.backward(loss)
        np.testing.assert_array_equal(grads[x], [2.0, 2.0])

    def test_non_parameter_leaves_dropped(self) -> None:
        """Test constants get no gradient entry."""
        x = Parameter([1.0])
        c = constant([5.0])
        with Tape() as tape:
            loss = sum_axis(mul(x, c))
        grads = tape.backward(loss)
        assert list(grads) == [x]

    def test_non_scalar_loss(self) -> None:
        """Test backward rejects a vector loss."""
        x = Parameter([1.0, 2.0])
        with Tape() as tape:
            out = mul(x, x)
        with pytest.raises(EngineError, match="scalar"):
            tape.backward(out)

    def test_empty_tape(self) -> None:
        """Test backward on an empty tape fails."""
        with pytest.raises(EngineError, match="empty"):
            Tape().backward(constant(1.0))

    def test_topological_order(self) -> None:
        """Test every node's inputs precede it on the tape."""
        x = Parameter(np.ones((2, 2)))
        with Tape() as tape:
            sum_axis(relu(matmul(x, x)))
        for index, node in enumerate(tape.nodes):
            assert all(i < index for i in node.inputs)

    def test_deterministic(self, rng: np.random.Generator) -> None:
        """Test identical inputs give bit-identical gradients."""
        data = rng.normal(size=(4, 3))

        def grads() -> np.ndarray:
            w = Parameter(data)
            with Tape() as tape:
                loss = sum_axis(log(softmax(matmul(w, constant(data.T)))))
            return tape.backward(loss)[w]

        np.testing.assert_array_equal(grads(), grads())


class TestGradientCheck:
    """Tests comparing tape gradients with finite differences."""

    def test_every_primitive(self, rng: np.random.Generator) -> None:
        """Test each primitive's gradient matches central differences."""
        for name, (loss_fn, params) in primitive_checks(rng).items():
            error = gradient_error(loss_fn, params, rng)
            assert error < GRADIENT_TOLERANCE, name

    def test_three_layer_mlp(self, rng: np.random.Generator) -> None:
        """Test a random 3-layer perceptron to 1e-4 relative error."""
        x = constant(rng.normal(size=(6, 5)))
        layers = [
            (Parameter(rng.normal(size=(5, 8))), Parameter(rng.normal(size=8))),
            (Parameter(rng.normal(size=(8, 8))), Parameter(rng.normal(size=8))),
            (Parameter(rng.normal(size=(8, 3))), Parameter(rng.normal(size=3))),
        ]
        targets = np.array([0, 1, 2, 0, 1, 2])

        def loss():
            h = x
            for i, (w, b) in enumerate(layers):
                h = add(matmul(h, w), b)
                if i < len(layers) - 1:
                    h = relu(h)
            return neg(sum_axis(log(gather(softmax(h), targets))))

        params = [p for layer in layers for p in layer]
        assert gradient_error(loss, params, rng, eps=1e-5) < 1e-4
