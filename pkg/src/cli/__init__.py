"""Command-line interface."""

from .main import (
    EXIT_DATA,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    build_parser,
    main,
    parse_lengths,
)
from .selftest import CheckResult, gradient_error, run_selftest

__all__ = [
    # Exit codes
    "EXIT_DATA",
    "EXIT_NUMERIC",
    "EXIT_OK",
    "EXIT_USAGE",
    # Entry points
    "build_parser",
    "main",
    "parse_lengths",
    # Self-test
    "CheckResult",
    "gradient_error",
    "run_selftest",
]
