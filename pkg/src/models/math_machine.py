"""Loopy block machine over a tape of symbol images.

The machine has B blocks and a file of R registers over Z_19. Block k holds
an instruction (MOVE or APPLY), the register ``reg`` it writes, APPLY's
register addresses a, b and op, the network a MOVE reads through and the
block control passes to next. A MOVE advances the head and loads the symbol
under it into ``R_reg``; an APPLY writes
``R_reg = arith_apply(R_a, R_b, R_op mod 4)``. After each instruction the
machine halts if the head has moved past the last symbol, returning the
register chosen by ``return_addr``; otherwise control goes to the block's
``goto`` target.

Initialization reads symbol 0 through ``init_net_choice`` into R0; other
registers start at 0 and control starts in block 0.

The differentiable forward pass keeps a joint marginal over (block, head
position) for live mass, a marginal per register, and accumulates the
output from the mass that halts at each step. Mass still live after the
last unrolled step contributes a uniform output.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from src.engine import (
    DTYPE,
    Tensor,
    add,
    constant,
    contract,
    gather,
    neg,
    sum_axis,
)
from src.neural import oracle_class
from src.tasks import MODULUS, NUM_OPS, TapeBatch, arith_apply
from src.terpret import (
    DifferentiableProgram,
    FeedError,
    ForwardResult,
    IntDomain,
    LearnableFunction,
    MarginalVec,
    ParamVar,
    ProgramListing,
    TerpretError,
    eval_apply,
    eval_switch,
    identity_into,
    lift,
    observe,
)

logger = logging.getLogger(__name__)

MOVE, APPLY = 0, 1
INSTRUCTION = IntDomain(2)
REGISTER = IntDomain(MODULUS)
OP = IntDomain(NUM_OPS)
MAX_BLOCKS = 4
DEFAULT_BLOCKS = 2
MAX_REGISTERS = 4
DEFAULT_REGISTERS = 2
SYMBOLS_SLOT = "symbols"
LABEL_SLOT = "label"


class MathModelError(TerpretError):
    """Raised when a block machine cannot be built or run as requested."""

    pass


def _decode_op(v: int) -> int:
    return v % NUM_OPS


def _arith(a: int, b: int, op: int) -> int:
    return arith_apply(a, b, op)


def max_steps_for(tape_len: int) -> int:
    """Unrolled steps for a tape of ``tape_len`` symbols."""
    return 2 * tape_len + 2


def _one_minus(t: Tensor) -> Tensor:
    return add(constant(np.ones(t.shape, dtype=DTYPE)), neg(t))


class MathMachine(DifferentiableProgram):
    """The block machine's parameters and its differentiable execution.

    Parameters do not depend on the tape length, so one machine runs
    batches of any length; the number of unrolled steps follows each batch.

    Attributes:
        name: Program name.
        num_blocks: Number of blocks B.
        num_registers: Number of registers R.
        nets: (name, number of classes) of the networks MOVE can read through.
        tape_len: Tape length the machine was built for.
    """

    def __init__(
        self,
        num_blocks: int,
        nets: Sequence[tuple[str, int]],
        rng: np.random.Generator | None = None,
        init_scale: float = 0.1,
        tape_len: int = 3,
        name: str = "math",
        num_registers: int = DEFAULT_REGISTERS,
    ) -> None:
        if not 1 <= num_blocks <= MAX_BLOCKS:
            raise MathModelError(
                f"Block count must be in 1..{MAX_BLOCKS}, got {num_blocks}"
            )
        if not 1 <= num_registers <= MAX_REGISTERS:
            raise MathModelError(
                f"Register count must be in 1..{MAX_REGISTERS}, got {num_registers}"
            )
        if not nets:
            raise MathModelError("The block machine needs at least one network")
        if tape_len < 1 or tape_len % 2 == 0:
            raise MathModelError(f"Tape length must be odd, got {tape_len}")
        self.name = name
        self.num_blocks = num_blocks
        self.num_registers = num_registers
        self.nets = list(nets)
        self.tape_len = tape_len
        rng = rng if rng is not None else np.random.default_rng(0)
        blocks = IntDomain(num_blocks)
        registers = IntDomain(num_registers)
        net_domain = IntDomain(len(self.nets))
        specs: list[tuple[str, IntDomain]] = []
        for k in range(num_blocks):
            specs += [
                (f"instr_{k}", INSTRUCTION),
                (f"reg_{k}", registers),
                (f"a_{k}", registers),
                (f"b_{k}", registers),
                (f"op_{k}", registers),
                (f"net_choice_{k}", net_domain),
                (f"goto_{k}", blocks),
            ]
        specs += [("init_net_choice", net_domain), ("return_addr", registers)]
        self._params = {
            name: ParamVar(name, domain, rng=rng, init_scale=init_scale)
            for name, domain in specs
        }

    @property
    def params(self) -> Mapping[str, ParamVar]:
        return self._params

    def format(self, values: Mapping[str, int]) -> str:
        return format_math_program(self.num_blocks, [n for n, _ in self.nets], values)

    # ------------------------------------------------------------------
    # Differentiable execution
    # ------------------------------------------------------------------

    def _reads(
        self,
        symbols: Sequence[Any],
        functions: Mapping[str, LearnableFunction],
    ) -> list[list[MarginalVec]]:
        """Register value of every symbol under every network: [net][pos]."""
        reads = []
        for name, classes in self.nets:
            fn = functions.get(name)
            if fn is None:
                raise FeedError(f"No function bound for {name!r}")
            inject = identity_into(IntDomain(classes), REGISTER)
            reads.append([eval_apply(inject, [fn.forward([s])]) for s in symbols])
        return reads

    def _stack(self, values: Sequence[MarginalVec], length: int) -> Tensor:
        """Stack per-position (N, 19) marginals into an (N, L, 19) tensor."""
        total: Tensor | None = None
        for position, value in enumerate(values):
            basis = np.zeros(length, dtype=DTYPE)
            basis[position] = 1.0
            term = contract("bv,p->bpv", value.probs, constant(basis))
            total = term if total is None else add(total, term)
        assert total is not None
        return total

    def forward(
        self,
        feed: Mapping[str, Any],
        functions: Mapping[str, LearnableFunction] | None = None,
        reduction: str = "mean",
        observe_outputs: bool = True,
        max_steps: int | None = None,
    ) -> ForwardResult:
        """Run the unrolled machine on a batch of equal-length tapes.

        Args:
            feed: ``"symbols"``, one symbol batch per tape position, and
                ``"label"`` when observing.
            functions: Bound networks by name.
            reduction: Batch reduction of the loss.
            observe_outputs: If False, no loss is computed.
            max_steps: Unrolled steps (default ``2L + 2``).

        Returns:
            The output marginal under ``"label"``; ``values`` also holds the
            live control tensor ``live_t`` (batch, block, position) and the
            cumulative halted mass ``halted_t`` after every step t.

        Raises:
            FeedError: If symbols, labels or a network are missing.
        """
        functions = functions or {}
        if SYMBOLS_SLOT not in feed:
            raise FeedError(f"No value fed for input {SYMBOLS_SLOT!r}")
        symbols = list(feed[SYMBOLS_SLOT])
        length = len(symbols)
        if length == 0:
            raise FeedError("Empty tape")
        batch = len(symbols[0])
        steps = max_steps if max_steps is not None else max_steps_for(length)
        num_blocks = self.num_blocks
        p = {name: param.marginal() for name, param in self._params.items()}

        reads = self._reads(symbols, functions)
        per_net = [self._stack(r, length) for r in reads]
        net_values = per_net[0]
        if len(per_net) > 1:
            net_values = self._stack_nets(per_net)

        # Shift by one position; moving off the last symbol leaves the tape.
        shift = np.eye(length, k=1, dtype=DTYPE)
        shift_t = constant(shift)

        zero = MarginalVec.point_mass(REGISTER, np.zeros(batch, dtype=np.int64))
        init_read = eval_switch(p["init_net_choice"], [r[0] for r in reads])
        registers = [init_read] + [zero] * (self.num_registers - 1)

        control0 = np.zeros((batch, num_blocks, length), dtype=DTYPE)
        control0[:, 0, 0] = 1.0
        control = constant(control0)
        output = constant(np.zeros((batch, MODULUS), dtype=DTYPE))
        halted = constant(np.zeros(batch, dtype=DTYPE))
        values: dict[str, Any] = {}

        decode = lift(_decode_op, (REGISTER,), OP)
        arith = lift(_arith, (REGISTER, REGISTER, OP), REGISTER)

        for t in range(steps):
            returned = eval_switch(p["return_addr"], registers)
            next_control: Tensor | None = None
            halting: Tensor | None = None
            written: list[Tensor] = []
            changed: list[Tensor] = []
            for k in range(num_blocks):
                at_k = gather(control, k, axis=1)
                mass = sum_axis(at_k, 1)
                last = gather(at_k, length - 1, axis=1)
                instr = p[f"instr_{k}"].probs
                move = gather(instr, MOVE)
                apply = gather(instr, APPLY)

                # What block k writes, and the mass that writes it.
                if len(per_net) > 1:
                    chosen = contract(
                        "m,mbpv->bpv", p[f"net_choice_{k}"].probs, net_values
                    )
                else:
                    chosen = net_values
                x = eval_switch(p[f"a_{k}"], registers)
                y = eval_switch(p[f"b_{k}"], registers)
                code = eval_apply(decode, [eval_switch(p[f"op_{k}"], registers)])
                applied = eval_apply(arith, [x, y, code])
                loaded = contract(",bp,pq,bqv->bv", move, at_k, shift_t, chosen)
                written.append(
                    add(loaded, contract(",b,bv->bv", apply, mass, applied.probs))
                )
                # A MOVE off the last symbol halts and leaves the register as is.
                changed.append(add(mass, neg(contract(",b->b", move, last))))

                # Control: MOVE shifts the head, APPLY keeps it, then goto.
                moved = contract(",bp,pq->bq", move, at_k, shift_t)
                kept = contract(",bq->bq", apply, at_k)
                routed = contract("j,bq->bjq", p[f"goto_{k}"].probs, add(moved, kept))
                next_control = (
                    routed if next_control is None else add(next_control, routed)
                )
                leaving = contract(",b->b", move, last)
                halting = leaving if halting is None else add(halting, leaving)

            assert next_control is not None and halting is not None
            new_registers = [
                self._update_register(j, old, written, changed, p)
                for j, old in enumerate(registers)
            ]
            output = add(output, contract("b,bv->bv", halting, returned.probs))
            halted = add(halted, halting)
            control = next_control
            registers = new_registers
            values[f"live_{t}"] = control
            values[f"halted_{t}"] = halted

        residual = sum_axis(sum_axis(control, 2), 1)
        uniform = constant(np.full(MODULUS, 1.0 / MODULUS, dtype=DTYPE))
        output = add(output, contract("b,v->bv", residual, uniform))
        result = MarginalVec(REGISTER, output)
        for j, reg in enumerate(registers):
            values[f"R{j}"] = reg
        values["output"] = result

        loss = None
        if observe_outputs:
            if LABEL_SLOT not in feed:
                raise FeedError(f"No observation fed for {LABEL_SLOT!r}")
            loss = observe(result, feed[LABEL_SLOT], reduction)
        return ForwardResult(values=values, loss=loss, outputs={LABEL_SLOT: result})

    def _update_register(
        self,
        j: int,
        old: MarginalVec,
        written: Sequence[Tensor],
        changed: Sequence[Tensor],
        p: Mapping[str, MarginalVec],
    ) -> MarginalVec:
        """R_j after one step: each block's write weighted by P(reg_k = j)."""
        lost: Tensor | None = None
        value: Tensor | None = None
        for k in range(self.num_blocks):
            w = gather(p[f"reg_{k}"].probs, j)
            share = contract(",b->b", w, changed[k])
            term = contract(",bv->bv", w, written[k])
            lost = share if lost is None else add(lost, share)
            value = term if value is None else add(value, term)
        assert lost is not None and value is not None
        kept = contract("b,bv->bv", _one_minus(lost), old.probs)
        return MarginalVec(REGISTER, add(kept, value))

    def _stack_nets(self, per_net: Sequence[Tensor]) -> Tensor:
        total: Tensor | None = None
        for index, values in enumerate(per_net):
            basis = np.zeros(len(per_net), dtype=DTYPE)
            basis[index] = 1.0
            term = contract("bpv,m->mbpv", values, constant(basis))
            total = term if total is None else add(total, term)
        assert total is not None
        return total


def build_math_model(
    num_blocks: int = DEFAULT_BLOCKS,
    tape_len: int = 3,
    nets: Sequence[tuple[str, int]] = (("net_0", 10), ("net_1", 4)),
    rng: np.random.Generator | None = None,
    init_scale: float = 0.1,
    num_registers: int = DEFAULT_REGISTERS,
) -> MathMachine:
    """Build the block machine.

    Raises:
        MathModelError: If the block count, register count or tape length is
            invalid.
    """
    machine = MathMachine(
        num_blocks, nets, rng, init_scale, tape_len, num_registers=num_registers
    )
    logger.debug(
        "built math machine: %d blocks, %d registers, %d nets, %d unrolled steps",
        num_blocks,
        num_registers,
        len(machine.nets),
        max_steps_for(tape_len),
    )
    return machine


def math_feed(batch: TapeBatch) -> dict[str, Any]:
    """Forward-pass feed for a batch of tapes."""
    return {SYMBOLS_SLOT: batch.symbols, LABEL_SLOT: batch.labels}


# ----------------------------------------------------------------------
# Listings and discrete execution
# ----------------------------------------------------------------------


def _reg(index: int) -> str:
    return f"R{index}"


def format_math_program(
    num_blocks: int, nets: Sequence[str], values: Mapping[str, int]
) -> str:
    """Source listing of a discrete block program."""
    lines = [f"{_reg(0)} = READ {nets[values['init_net_choice']]}"]
    for k in range(num_blocks):
        goto = values[f"goto_{k}"]
        target = _reg(values[f"reg_{k}"])
        if values[f"instr_{k}"] == MOVE:
            body = f"{target} = MOVE {nets[values[f'net_choice_{k}']]}"
        else:
            args = ", ".join(_reg(values[f"{a}_{k}"]) for a in ("a", "b", "op"))
            body = f"{target} = APPLY({args})"
        lines.append(f"block {k}: {body} ; goto {goto}")
    lines.append(f"halt: return {_reg(values['return_addr'])}")
    return "\n".join(lines)


def num_blocks_of(listing: ProgramListing) -> int:
    """Block count of a listing, from its parameter names."""
    return sum(1 for name in listing.values if name.startswith("instr_"))


def num_registers_of(listing: ProgramListing) -> int:
    """Registers a listing can touch: R0 plus every register it addresses."""
    v = listing.values
    addressed = [v["return_addr"]]
    for k in range(num_blocks_of(listing)):
        addressed += [v[f"{field}_{k}"] for field in ("reg", "a", "b", "op")]
    return max(addressed) + 1


def golden_listing(machine: MathMachine) -> ProgramListing:
    """The hand-written left-to-right evaluator.

    R0 accumulates, block 0 loads the operator into R1, block 1 the next
    digit into R2 and block 2 folds them into R0.

    Raises:
        MathModelError: If the machine does not have 3 blocks and at least
            3 registers, or lacks ``net_0``/``net_1``.
    """
    if machine.num_blocks != 3 or machine.num_registers < 3:
        raise MathModelError(
            "The reference program needs 3 blocks and at least 3 registers"
        )
    names = [n for n, _ in machine.nets]
    if "net_0" not in names or "net_1" not in names:
        raise MathModelError("The reference program reads through net_0 and net_1")
    digit, operator = names.index("net_0"), names.index("net_1")
    values = {name: 0 for name in machine.params}
    values.update(
        {
            "init_net_choice": digit,
            "instr_0": MOVE,
            "reg_0": 1,
            "net_choice_0": operator,
            "goto_0": 1,
            "instr_1": MOVE,
            "reg_1": 2,
            "net_choice_1": digit,
            "goto_1": 2,
            "instr_2": APPLY,
            "reg_2": 0,
            "a_2": 0,
            "b_2": 2,
            "op_2": 1,
            "goto_2": 0,
            "return_addr": 0,
        }
    )
    return ProgramListing(machine.name, values, machine.format(values))


@dataclass(frozen=True)
class MachineRun:
    """Outcome of a discrete run.

    Attributes:
        value: Returned register value, or None if the machine did not halt.
        steps: Steps executed.
    """

    value: int | None
    steps: int

    @property
    def halted(self) -> bool:
        """Whether the machine halted within its step budget."""
        return self.value is not None


Reader = Callable[[int, int], int]


def extract_and_run(
    listing: ProgramListing,
    symbol_classes: Sequence[int],
    max_steps: int | None = None,
    nets: Sequence[tuple[str, int]] = (("net_0", 10), ("net_1", 4)),
    read: Reader | None = None,
) -> MachineRun:
    """Execute a discrete block program exactly.

    Args:
        listing: Discretized parameters.
        symbol_classes: Ground-truth class of each tape symbol.
        max_steps: Step budget (default ``2L + 2``); exceeding it reports a
            non-halting run.
        nets: Networks in the order the listing's net choices index.
        read: ``read(net_index, position)`` giving the class a network sees;
            defaults to perfect perception of ``symbol_classes``.
    """
    length = len(symbol_classes)
    budget = max_steps if max_steps is not None else max_steps_for(length)
    v = listing.values

    def perfect(net: int, position: int) -> int:
        return int(oracle_class(symbol_classes[position], nets[net][1]))

    read = read or perfect

    registers = [0] * num_registers_of(listing)
    registers[0] = read(v["init_net_choice"], 0)
    block, head = 0, 0
    for step in range(1, budget + 1):
        if v[f"instr_{block}"] == MOVE:
            head += 1
            if head >= length:
                return MachineRun(registers[v["return_addr"]], step)
            registers[v[f"reg_{block}"]] = read(v[f"net_choice_{block}"], head)
        else:
            registers[v[f"reg_{block}"]] = arith_apply(
                registers[v[f"a_{block}"]],
                registers[v[f"b_{block}"]],
                registers[v[f"op_{block}"]] % NUM_OPS,
            )
        block = v[f"goto_{block}"]
    return MachineRun(None, budget)


def neural_reader(
    functions: Mapping[str, LearnableFunction],
    nets: Sequence[tuple[str, int]],
    symbols: Sequence[Any],
) -> Reader:
    """Reader that classifies one tape's symbol batches with bound networks."""
    cache: dict[tuple[int, int], int] = {}

    def read(net: int, position: int) -> int:
        key = (net, position)
        if key not in cache:
            out = functions[nets[net][0]].forward([symbols[position]])
            cache[key] = int(np.asarray(out.argmax()).reshape(-1)[0])
        return cache[key]

    return read
