"""Task data: symbol sources, ground truth, example generators and schedules."""

from .generators import (
    Batch,
    Example,
    GridBatch,
    GridExample,
    TapeBatch,
    TapeExample,
    TaskDataset,
    batches,
    collate,
    fixed_examples,
    gen_example,
)
from .glyphs import render_glyph
from .ground_truth import (
    ALL_GRID_TASKS,
    CELL_NAMES,
    GRID_VARIANTS,
    MATH_TASK,
    MODULUS,
    NE,
    NUM_OPS,
    NW,
    OP_TEXT,
    SE,
    SW,
    M,
    Scenario,
    TaskId,
    Variant,
    arith_apply,
    arith_table,
    eval_expression,
    ground_truth,
)
from .idx import IdxFormatError, load_idx, read_idx_images, read_idx_labels, write_idx
from .schedule import (
    Phase,
    Schedule,
    sample_task,
    sequential_schedule,
    single_task_schedule,
)
from .symbols import (
    ALL_CLASSES,
    DIGIT_CLASSES,
    DIVIDE,
    IMAGE_SIZE,
    MINUS,
    OPERATOR_CLASSES,
    PLUS,
    TIMES,
    SourceKind,
    SymbolBatch,
    SymbolSource,
    TaskDataError,
    open_symbol_source,
    parse_symbols,
    symbol_text,
)

__all__ = [
    # Errors
    "IdxFormatError",
    "TaskDataError",
    # Symbols
    "ALL_CLASSES",
    "DIGIT_CLASSES",
    "DIVIDE",
    "IMAGE_SIZE",
    "MINUS",
    "OPERATOR_CLASSES",
    "PLUS",
    "TIMES",
    "SourceKind",
    "SymbolBatch",
    "SymbolSource",
    "open_symbol_source",
    "parse_symbols",
    "render_glyph",
    "symbol_text",
    # IDX files
    "load_idx",
    "read_idx_images",
    "read_idx_labels",
    "write_idx",
    # Ground truth
    "ALL_GRID_TASKS",
    "CELL_NAMES",
    "GRID_VARIANTS",
    "M",
    "MATH_TASK",
    "MODULUS",
    "NE",
    "NUM_OPS",
    "NW",
    "OP_TEXT",
    "SE",
    "SW",
    "Scenario",
    "TaskId",
    "Variant",
    "arith_apply",
    "arith_table",
    "eval_expression",
    "ground_truth",
    # Generators
    "Batch",
    "Example",
    "GridBatch",
    "GridExample",
    "TapeBatch",
    "TapeExample",
    "TaskDataset",
    "batches",
    "collate",
    "fixed_examples",
    "gen_example",
    # Schedules
    "Phase",
    "Schedule",
    "sample_task",
    "sequential_schedule",
    "single_task_schedule",
]
