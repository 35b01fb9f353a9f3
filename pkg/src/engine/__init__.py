"""Tensor engine for ntpt.

This package provides the numerical substrate every other package compiles
into: dense float64 tensors, a define-by-run tape for reverse-mode
differentiation, and grouped-rate optimizers.
"""

from .optim import Optimizer, OptimizerError, OptimizerKind, OptimizerState
from .tensor import (
    DTYPE,
    EngineError,
    Parameter,
    ShapeError,
    Tape,
    TapeNode,
    Tensor,
    active_tape,
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

__all__ = [
    # Tensors and tape
    "DTYPE",
    "EngineError",
    "Parameter",
    "ShapeError",
    "Tape",
    "TapeNode",
    "Tensor",
    "active_tape",
    # Primitives
    "add",
    "concat",
    "constant",
    "contract",
    "gather",
    "log",
    "matmul",
    "mul",
    "neg",
    "relu",
    "scale",
    "softmax",
    "sum_axis",
    # Optimizers
    "Optimizer",
    "OptimizerError",
    "OptimizerKind",
    "OptimizerState",
]
