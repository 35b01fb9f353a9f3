"""Neural library: learnable functions shared across task models."""

from .functions import (
    FunctionArityError,
    LibraryError,
    NeuralFunction,
    NeuralFunctionSpec,
    digit_net_spec,
    operator_net_spec,
    slot_width,
)
from .library import (
    FORMAT_VERSION,
    DuplicateFunctionError,
    Library,
    LibraryFormatError,
    UntrainedNetworkError,
)
from .perception import (
    OracleFunction,
    Perception,
    accuracy_by_function,
    bind_functions,
    classifier_accuracy,
    oracle_class,
    pretrain_supervised,
)

DIGIT_NET = "net_0"
OPERATOR_NET = "net_1"

__all__ = [
    # Errors
    "DuplicateFunctionError",
    "FunctionArityError",
    "LibraryError",
    "LibraryFormatError",
    "UntrainedNetworkError",
    # Functions
    "DIGIT_NET",
    "OPERATOR_NET",
    "NeuralFunction",
    "NeuralFunctionSpec",
    "digit_net_spec",
    "operator_net_spec",
    "slot_width",
    # Library
    "FORMAT_VERSION",
    "Library",
    # Perception
    "OracleFunction",
    "Perception",
    "accuracy_by_function",
    "bind_functions",
    "classifier_accuracy",
    "oracle_class",
    "pretrain_supervised",
]
