"""Straight-line interpreter over a 2x2 grid of symbol images.

A read head starts on the NW cell. Registers over Z_19 are immutable: the
initialization writes R_0..R_{k-1} (k = 1 for add2x2, where R_0 is READ of
the NW cell; k = 4 for apply2x2, where R_0..R_2 hold the auxiliary integers
and R_3 is the READ), and program line t writes R_{k+t}. Each line chooses
an instruction, argument addresses over the registers written so far, and
the network that a MOVE reads through. The model returns the register
written by the last line.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np

from src.tasks import (
    CELL_NAMES,
    MODULUS,
    NUM_OPS,
    GridBatch,
    Scenario,
    TaskId,
    Variant,
    arith_apply,
)
from src.terpret import (
    IntDomain,
    MarginalVec,
    ModelBuilder,
    ModelGraph,
    ProgramListing,
    TerpretError,
    compile_model,
    eval_apply,
    eval_switch,
    identity_into,
    lift,
    lift_constant,
)

NUM_LINES = 4
NUM_CELLS = 4
REGISTER = IntDomain(MODULUS)
CELL = IntDomain(NUM_CELLS)
OP = IntDomain(NUM_OPS)

NOOP, MOVE_NORTH, MOVE_EAST, MOVE_SOUTH, MOVE_WEST, COMBINE = range(6)
MOVES = (MOVE_NORTH, MOVE_EAST, MOVE_SOUTH, MOVE_WEST)
INSTRUCTION_NAMES = ("NOOP", "MOVE_NORTH", "MOVE_EAST", "MOVE_SOUTH", "MOVE_WEST")
INSTRUCTION = IntDomain(6)
LABEL_SLOT = "label"


class GridModelError(TerpretError):
    """Raised when a grid model cannot be built for the given networks."""

    pass


def move_cell(direction: int, cell: int) -> int:
    """Cell after moving one step, staying put at the grid edge."""
    row, col = divmod(cell, 2)
    if direction == MOVE_NORTH:
        row = max(row - 1, 0)
    elif direction == MOVE_SOUTH:
        row = min(row + 1, 1)
    elif direction == MOVE_EAST:
        col = min(col + 1, 1)
    elif direction == MOVE_WEST:
        col = max(col - 1, 0)
    return 2 * row + col


def _head_after(instr: int, cell: int) -> int:
    return move_cell(instr, cell) if instr in MOVES else cell


def _add19(a: int, b: int) -> int:
    return (a + b) % MODULUS


def _decode_op(v: int) -> int:
    return v % NUM_OPS


def _arith(a: int, b: int, op: int) -> int:
    return arith_apply(a, b, op)


def move_and_read(
    head: MarginalVec,
    direction: int,
    cell_outputs: Sequence[MarginalVec],
) -> tuple[MarginalVec, MarginalVec]:
    """Move the head and read the cell under it.

    Args:
        head: Marginal over the four cells.
        direction: One of the MOVE instructions.
        cell_outputs: Network output marginal for each cell's image, over the
            network's classes (embedded into Z_19 by index).

    Returns:
        The new head marginal and the read value over Z_19.
    """
    moved = eval_apply(
        lift(_head_after, (INSTRUCTION, CELL), CELL),
        [MarginalVec.point_mass(INSTRUCTION, direction), head],
    )
    values = [
        eval_apply(identity_into(o.domain, REGISTER), [o]) for o in cell_outputs
    ]
    return moved, eval_switch(moved, values)


def _reg(index: int) -> str:
    return f"R{index}"


def init_registers(task: TaskId) -> int:
    """Number of registers written before the first program line."""
    return 4 if task.scenario is Scenario.APPLY2X2 else 1


def build_grid_model(
    task: TaskId,
    nets: Sequence[tuple[str, int]],
    rng: np.random.Generator | None = None,
    init_scale: float = 0.1,
) -> ModelGraph:
    """Build and compile the 4-line model for a 2x2 task.

    Args:
        task: An add2x2 or apply2x2 task.
        nets: (name, number of classes) of every library network the model
            may read through, in library order.
        rng: Initialization of the program parameters.
        init_scale: Standard deviation of the initial logits.

    Raises:
        GridModelError: If ``task`` is not a 2x2 task or no network is given.
    """
    if not task.is_grid:
        raise GridModelError(f"{task} is not a 2x2 task")
    if not nets:
        raise GridModelError(f"No library network available for {task}")
    apply = task.scenario is Scenario.APPLY2X2
    k = init_registers(task)
    builder = ModelBuilder(str(task), rng=rng, init_scale=init_scale)

    for name, classes in nets:
        builder.function(name, IntDomain(classes))
    for cell in range(NUM_CELLS):
        builder.input_tensor(f"cell{cell}", (28, 28))
        for name, classes in nets:
            raw = builder.call(f"{name}@{cell}", name, f"cell{cell}")
            inject = identity_into(IntDomain(classes), REGISTER)
            builder.apply(f"v_{name}@{cell}", inject, raw)

    def read(prefix: str, head: str, net_param: str) -> str:
        per_cell = [
            builder.switch(
                f"{prefix}@{cell}", net_param, [f"v_{n}@{cell}" for n, _ in nets]
            )
            for cell in range(NUM_CELLS)
        ]
        return builder.switch(prefix, head, per_cell)

    if apply:
        for j in range(3):
            builder.input_int(f"aux{j}", MODULUS)
            builder.copy_input(_reg(j), f"aux{j}")
    head = builder.apply("head_init", lift_constant(0, CELL))
    init_net = builder.param("init_net_choice", len(nets))
    read(_reg(k - 1), head, init_net)

    for t in range(NUM_LINES):
        written = k + t
        instr = builder.param(f"instr_{t}", INSTRUCTION.size)
        net = builder.param(f"net_choice_{t}", len(nets))
        a = builder.param(f"a_{t}", written)
        b_addr = builder.param(f"b_{t}", written)
        registers = [_reg(i) for i in range(written)]
        x = builder.switch(f"x_{t}", a, registers)
        y = builder.switch(f"y_{t}", b_addr, registers)
        move = lift(_head_after, (INSTRUCTION, CELL), CELL)
        head = builder.apply(f"head_{t + 1}", move, instr, head)
        value = read(f"read_{t}", head, net)

        if apply:
            op = builder.param(f"op_{t}", written)

            def combine(body: ModelBuilder, t: int = t, op: str = op) -> str:
                o = body.switch(f"o_{t}", op, [_reg(i) for i in range(k + t)])
                decode = lift(_decode_op, (REGISTER,), OP)
                code = body.apply(f"opcode_{t}", decode, o)
                return body.apply(
                    f"apply_{t}",
                    lift(_arith, (REGISTER, REGISTER, OP), REGISTER),
                    f"x_{t}",
                    f"y_{t}",
                    code,
                )

        else:

            def combine(body: ModelBuilder, t: int = t) -> str:
                return body.apply(
                    f"add_{t}",
                    lift(_add19, (REGISTER, REGISTER), REGISTER),
                    f"x_{t}",
                    f"y_{t}",
                )

        builder.switch(_reg(written), instr, [x, value, value, value, value, combine])

    builder.observe(_reg(k + NUM_LINES - 1), LABEL_SLOT)
    names = [n for n, _ in nets]
    builder.set_formatter(lambda values: format_grid_program(task, names, values))
    return compile_model(builder.build())


def program_space_size(graph: ModelGraph) -> int:
    """Number of syntactically distinct programs (product of parameter domains)."""
    return int(np.prod([p.domain.size for p in graph.params.values()], dtype=object))


def format_grid_program(
    task: TaskId, nets: Sequence[str], values: Mapping[str, int]
) -> str:
    """Source listing of a discrete 2x2 program."""
    apply = task.scenario is Scenario.APPLY2X2
    k = init_registers(task)
    combine_name = "APPLY" if apply else "ADD"
    lines = []
    if apply:
        lines.append("R0, R1, R2 = aux")
    lines.append(f"{_reg(k - 1)} = READ {nets[values['init_net_choice']]}")
    for t in range(NUM_LINES):
        target = _reg(k + t)
        instr = values[f"instr_{t}"]
        a = _reg(values[f"a_{t}"])
        if instr == NOOP:
            lines.append(f"{target} = NOOP({a})")
        elif instr in MOVES:
            net = nets[values[f"net_choice_{t}"]]
            lines.append(f"{target} = {INSTRUCTION_NAMES[instr]} {net}")
        else:
            args = [a, _reg(values[f"b_{t}"])]
            if apply:
                args.append(_reg(values[f"op_{t}"]))
            lines.append(f"{target} = {combine_name}({', '.join(args)})")
    lines.append(f"return {_reg(k + NUM_LINES - 1)}")
    return "\n".join(lines)


# Known solutions: (instruction, address arguments) per line.
_GOLDEN: dict[tuple[Scenario, Variant], list[tuple[int, tuple[int, ...]]]] = {
    (Scenario.ADD2X2, Variant.TOP): [
        (MOVE_EAST, ()),
        (COMBINE, (0, 1)),
        (NOOP, (2,)),
        (NOOP, (3,)),
    ],
    (Scenario.ADD2X2, Variant.LEFT): [
        (MOVE_SOUTH, ()),
        (COMBINE, (0, 1)),
        (NOOP, (2,)),
        (NOOP, (3,)),
    ],
    (Scenario.ADD2X2, Variant.BOTTOM): [
        (MOVE_SOUTH, ()),
        (MOVE_EAST, ()),
        (COMBINE, (1, 2)),
        (NOOP, (3,)),
    ],
    (Scenario.ADD2X2, Variant.RIGHT): [
        (MOVE_EAST, ()),
        (MOVE_SOUTH, ()),
        (COMBINE, (1, 2)),
        (NOOP, (3,)),
    ],
    (Scenario.APPLY2X2, Variant.TOP): [
        (MOVE_EAST, ()),
        (COMBINE, (0, 1, 3)),
        (COMBINE, (5, 2, 4)),
        (NOOP, (6,)),
    ],
    (Scenario.APPLY2X2, Variant.LEFT): [
        (MOVE_SOUTH, ()),
        (COMBINE, (0, 1, 3)),
        (COMBINE, (5, 2, 4)),
        (NOOP, (6,)),
    ],
    (Scenario.APPLY2X2, Variant.BOTTOM): [
        (MOVE_SOUTH, ()),
        (MOVE_EAST, ()),
        (COMBINE, (0, 1, 4)),
        (COMBINE, (6, 2, 5)),
    ],
    (Scenario.APPLY2X2, Variant.RIGHT): [
        (MOVE_EAST, ()),
        (MOVE_SOUTH, ()),
        (COMBINE, (0, 1, 4)),
        (COMBINE, (6, 2, 5)),
    ],
}


def golden_listing(graph: ModelGraph, task: TaskId, read_net: str) -> ProgramListing:
    """A hand-written correct program for ``task``.

    Args:
        graph: Model built by :func:`build_grid_model` for ``task``.
        task: The 2x2 task.
        read_net: Network every READ and MOVE reads through.
    """
    nets = list(graph.model.functions)
    net_index = nets.index(read_net)
    values = {name: 0 for name in graph.params}
    values["init_net_choice"] = net_index
    for t, (instr, args) in enumerate(_GOLDEN[(task.scenario, task.variant)]):
        values[f"instr_{t}"] = instr
        values[f"net_choice_{t}"] = net_index
        for name, arg in zip(("a", "b", "op"), args, strict=False):
            values[f"{name}_{t}"] = arg
    return ProgramListing(graph.name, values, graph.format(values))


def grid_feed(batch: GridBatch) -> dict[str, Any]:
    """Forward-pass feed for a batch: cell symbols, auxiliary ints, labels."""
    feed: dict[str, Any] = {
        f"cell{i}": cells for i, cells in enumerate(batch.cells)
    }
    if batch.aux is not None:
        for j in range(batch.aux.shape[1]):
            feed[f"aux{j}"] = batch.aux[:, j]
    feed[LABEL_SLOT] = batch.labels
    return feed


def grid_example_inputs(batch: GridBatch, index: int) -> dict[str, Any]:
    """Inputs of one example of a batch, for discrete execution."""
    inputs: dict[str, Any] = {
        f"cell{i}": cells.take(index) for i, cells in enumerate(batch.cells)
    }
    if batch.aux is not None:
        for j in range(batch.aux.shape[1]):
            inputs[f"aux{j}"] = int(batch.aux[index, j])
    return inputs
