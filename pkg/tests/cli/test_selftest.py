"""Tests for the offline self-checks."""

import numpy as np
import pytest

from src.cli import EXIT_OK, gradient_error, main, run_selftest
from src.cli.selftest import (
    check_golden_math,
    check_idx,
    check_normalization,
    check_point_mass,
)
from src.engine import Parameter, constant, matmul, sum_axis
from src.tasks import SymbolSource


class TestChecks:
    """Tests for individual self-checks."""

    def test_gradient_error_small(self, rng: np.random.Generator) -> None:
        """Test a linear loss has matching tape and numeric gradients."""
        weights = Parameter(rng.normal(size=(3, 2)), name="w")
        inputs = rng.normal(size=(4, 3))

        def loss():
            return sum_axis(matmul(constant(inputs), weights))

        assert gradient_error(loss, [weights], rng) < 1e-6

    def test_idx(self, rng: np.random.Generator) -> None:
        """Test the IDX round trip check passes and is not numeric."""
        result = check_idx(rng)
        assert result.passed
        assert not result.numeric

    def test_point_mass(self, rng: np.random.Generator) -> None:
        """Test random one-hot models agree with exact execution."""
        assert check_point_mass(rng, 20).passed

    def test_normalization_counts_steps(
        self, rng: np.random.Generator, test_source: SymbolSource
    ) -> None:
        """Test the mass check runs until it has covered the requested steps."""
        result = check_normalization(rng, test_source, 300)
        assert result.passed, result.detail
        assert result.checked >= 300
        assert result.detail.startswith(f"{result.checked} machine steps")

    def test_golden_math(self, rng: np.random.Generator) -> None:
        """Test the reference block program on every length."""
        result = check_golden_math(rng, 2)
        assert result.passed
        assert result.detail == "32 expressions"


@pytest.mark.slow
class TestQuickSelftest:
    """The whole quick self-test."""

    def test_all_pass(self) -> None:
        """Test every check passes with a fixed seed."""
        results = run_selftest(seed=0, quick=True)
        failed = [r for r in results if not r.passed]
        assert not failed, failed
        assert [r.name for r in results] == [
            "idx",
            "gradients",
            "point-mass",
            "normalization",
            "golden-math",
        ]

    def test_command(self) -> None:
        """Test the selftest command exits 0."""
        assert main(["--quiet", "selftest", "--quick"]) == EXIT_OK
