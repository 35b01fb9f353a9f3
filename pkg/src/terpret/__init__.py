"""Differentiable interpreter models over bounded integers.

Models are written with :class:`ModelBuilder`, compiled by
:func:`compile_model` into a graph whose forward pass propagates marginal
distributions, and discretized back into program listings that run exactly.
"""

from .compiler import FeedError, ModelGraph, compile_model
from .domains import DomainError, IntDomain, MarginalVec, ParamVar, TerpretError
from .indicator import (
    IndicatorTensor,
    LiftError,
    clear_cache,
    from_table,
    lift,
    lift_constant,
)
from .listing import (
    ConcreteResult,
    ProgramListing,
    concrete_eval,
    discretize,
    load_listing,
)
from .model import (
    Apply,
    Call,
    CompileError,
    CopyInput,
    DifferentiableProgram,
    ForwardResult,
    FunctionSig,
    LearnableFunction,
    Model,
    ModelBuilder,
    Observe,
    Statement,
    Switch,
    SwitchCase,
)
from .sampling import RandomModel, point_mass_mismatches, random_model
from .semantics import (
    PROB_FLOOR,
    SwitchError,
    broadcast_batch,
    eval_apply,
    eval_switch,
    identity_into,
    observe,
)

__all__ = [
    # Errors
    "CompileError",
    "DomainError",
    "FeedError",
    "LiftError",
    "SwitchError",
    "TerpretError",
    # Domains and marginals
    "IntDomain",
    "MarginalVec",
    "ParamVar",
    # Lifting
    "IndicatorTensor",
    "clear_cache",
    "from_table",
    "identity_into",
    "lift",
    "lift_constant",
    # Semantics
    "PROB_FLOOR",
    "broadcast_batch",
    "eval_apply",
    "eval_switch",
    "observe",
    # Models
    "Apply",
    "Call",
    "CopyInput",
    "DifferentiableProgram",
    "ForwardResult",
    "FunctionSig",
    "LearnableFunction",
    "Model",
    "ModelBuilder",
    "ModelGraph",
    "Observe",
    "Statement",
    "Switch",
    "SwitchCase",
    "compile_model",
    # Listings
    "ConcreteResult",
    "ProgramListing",
    "concrete_eval",
    "discretize",
    "load_listing",
    # Random models
    "RandomModel",
    "point_mass_mismatches",
    "random_model",
]
