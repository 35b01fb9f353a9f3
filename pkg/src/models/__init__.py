"""Task models: the 2x2 straight-line interpreter and the loopy math machine."""

from .grid import (
    COMBINE,
    INSTRUCTION_NAMES,
    MOVE_EAST,
    MOVE_NORTH,
    MOVE_SOUTH,
    MOVE_WEST,
    NOOP,
    GridModelError,
    build_grid_model,
    format_grid_program,
    golden_listing,
    grid_example_inputs,
    grid_feed,
    init_registers,
    move_and_read,
    move_cell,
    program_space_size,
)
from .math_machine import (
    DEFAULT_BLOCKS,
    DEFAULT_REGISTERS,
    MachineRun,
    MathMachine,
    MathModelError,
    build_math_model,
    extract_and_run,
    format_math_program,
    math_feed,
    max_steps_for,
    neural_reader,
    num_blocks_of,
    num_registers_of,
)
from .math_machine import golden_listing as golden_math_listing

__all__ = [
    # Errors
    "GridModelError",
    "MathModelError",
    # 2x2 grid
    "COMBINE",
    "INSTRUCTION_NAMES",
    "MOVE_EAST",
    "MOVE_NORTH",
    "MOVE_SOUTH",
    "MOVE_WEST",
    "NOOP",
    "build_grid_model",
    "format_grid_program",
    "golden_listing",
    "grid_example_inputs",
    "grid_feed",
    "init_registers",
    "move_and_read",
    "move_cell",
    "program_space_size",
    # Math machine
    "DEFAULT_BLOCKS",
    "DEFAULT_REGISTERS",
    "MachineRun",
    "MathMachine",
    "build_math_model",
    "extract_and_run",
    "format_math_program",
    "golden_math_listing",
    "math_feed",
    "max_steps_for",
    "neural_reader",
    "num_blocks_of",
    "num_registers_of",
]
