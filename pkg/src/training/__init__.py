"""Training, evaluation and run bookkeeping."""

from .convergence import convergence_index, detect_convergence
from .evaluation import (
    EvalResult,
    LengthRow,
    TransferReport,
    evaluate_listing,
    evaluate_math_listing,
    evaluate_program,
    feed_for,
    length_sweep,
    measure_transfer,
    wilson_score_interval,
)
from .math_training import MATH_NETS, MathResult, math_functions, train_math
from .metrics import CSV_FIELDS, MetricsLog, MetricsRow, Split
from .restarts import RestartOutcome, RestartSummary, run_restarts, task_flags
from .run_store import RunKind, RunRecord, load_run, resolve_config, write_run
from .tensorboard import ScalarWriter
from .trainer import (
    LifelongResult,
    LifelongTrainer,
    NumericalError,
    RunConfig,
    TaskState,
    eval_set,
    networks_read,
    open_sources,
    oracle_functions,
    program_state,
    replay_snapshot,
    restore_logits,
    schedule_from_config,
    train_lifelong,
)

__all__ = [
    # Errors
    "NumericalError",
    # Metrics
    "CSV_FIELDS",
    "MetricsLog",
    "MetricsRow",
    "ScalarWriter",
    "Split",
    # Convergence
    "convergence_index",
    "detect_convergence",
    # Evaluation
    "EvalResult",
    "LengthRow",
    "TransferReport",
    "evaluate_listing",
    "evaluate_math_listing",
    "evaluate_program",
    "feed_for",
    "length_sweep",
    "measure_transfer",
    "wilson_score_interval",
    # Lifelong training
    "LifelongResult",
    "LifelongTrainer",
    "RunConfig",
    "TaskState",
    "eval_set",
    "networks_read",
    "open_sources",
    "oracle_functions",
    "program_state",
    "replay_snapshot",
    "restore_logits",
    "schedule_from_config",
    "train_lifelong",
    # Math
    "MATH_NETS",
    "MathResult",
    "math_functions",
    "train_math",
    # Restarts and run directories
    "RestartOutcome",
    "RestartSummary",
    "RunKind",
    "RunRecord",
    "load_run",
    "resolve_config",
    "run_restarts",
    "task_flags",
    "write_run",
]
