"""Lifelong training of 2x2 task programs over a shared neural library.

Each step draws a task from the schedule, runs that task's program on a
batch, and updates the program's logits together with the library networks
it read through. Interpreter logits and network weights sit in separate
learning-rate groups. Every task seen so far is evaluated periodically and
at every phase end, where the library and all programs are snapshotted.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import zlib
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from configs import DataConfig, NtptConfig, OptimizerConfig
from src.engine import Optimizer, Tape
from src.models import build_grid_model
from src.neural import (
    DIGIT_NET,
    OPERATOR_NET,
    Library,
    OracleFunction,
    Perception,
    bind_functions,
    classifier_accuracy,
    digit_net_spec,
    operator_net_spec,
)
from src.tasks import (
    ALL_GRID_TASKS,
    DIGIT_CLASSES,
    OPERATOR_CLASSES,
    Batch,
    Scenario,
    Schedule,
    SymbolSource,
    TaskDataset,
    TaskId,
    batches,
    fixed_examples,
    open_symbol_source,
    sample_task,
    sequential_schedule,
)
from src.terpret import (
    DifferentiableProgram,
    LearnableFunction,
    ModelGraph,
    ProgramListing,
    discretize,
)

from .evaluation import evaluate_listing, evaluate_program, feed_for
from .metrics import MetricsLog, MetricsRow, Split
from .tensorboard import ScalarWriter

logger = logging.getLogger(__name__)

NET_CLASSES = {DIGIT_NET: 10, OPERATOR_NET: 4}
NET_SPECS = {DIGIT_NET: digit_net_spec, OPERATOR_NET: operator_net_spec}
CLASSIFIER_TASKS = {
    DIGIT_NET: ("net_0/digits", DIGIT_CLASSES),
    OPERATOR_NET: ("net_1/operators", OPERATOR_CLASSES),
}
EVAL_BATCH = 250


class NumericalError(Exception):
    """Raised when a loss or gradient stops being finite.

    Attributes:
        restart: Restart index of the failed run.
        step: Training step.
        task: Task being trained.
    """

    def __init__(self, message: str, restart: int, step: int, task: str) -> None:
        self.restart = restart
        self.step = step
        self.task = task
        super().__init__(f"restart {restart}, step {step}, task {task}: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Everything one training run needs.

    Attributes:
        schedule: Task distribution over time.
        seed: Seed of data and evaluation sets (shared by all restarts).
        restart: Restart index; seeds the programs, networks and batches.
        restarts: Number of restarts of the experiment.
        optimizer: Optimizer kind and learning-rate groups.
        data: Symbol source and example pools.
        batch_size: Examples per step.
        eval_every: Steps between evaluations.
        eval_size: Held-out examples per task.
        loss_reduction: "mean" or "sum" over a batch.
        init_scale: Standard deviation of initial program logits.
        perception: Neural networks or perfect classifiers.
        convergence_jump: Accuracy rise that counts as convergence.
        convergence_level: Accuracy a converged run must exceed.
        convergence_window: Evaluations the rise must fit in.
        out_dir: Where snapshots are written (None: no snapshots).
        tensorboard_dir: Where TensorBoard scalars are written.
    """

    schedule: Schedule
    seed: int = 0
    restart: int = 0
    restarts: int = 1
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    data: DataConfig = field(default_factory=DataConfig)
    batch_size: int = 32
    eval_every: int = 500
    eval_size: int = 1000
    loss_reduction: str = "mean"
    init_scale: float = 0.1
    perception: Perception = Perception.NEURAL
    convergence_jump: float = 0.4
    convergence_level: float = 0.9
    convergence_window: int = 5
    out_dir: Path | None = None
    tensorboard_dir: str | None = None

    @classmethod
    def from_config(
        cls,
        config: NtptConfig,
        schedule: Schedule | None = None,
        out_dir: str | Path | None = None,
    ) -> RunConfig:
        """Run settings from a configuration file's sections."""
        if schedule is None:
            schedule = schedule_from_config(config)
        trainer = config.trainer
        return cls(
            schedule=schedule,
            seed=config.seed,
            restarts=trainer.restarts,
            optimizer=config.optimizer,
            data=config.data,
            batch_size=trainer.batch_size,
            eval_every=trainer.eval_every,
            eval_size=trainer.eval_size,
            loss_reduction=trainer.loss_reduction,
            init_scale=trainer.init_scale,
            perception=Perception(trainer.perception),
            convergence_jump=trainer.convergence_jump,
            convergence_level=trainer.convergence_level,
            convergence_window=trainer.convergence_window,
            out_dir=None if out_dir is None else Path(out_dir),
            tensorboard_dir=config.tensorboard_dir,
        )

    def for_restart(self, restart: int) -> RunConfig:
        """Same settings for another restart."""
        out_dir = self.out_dir
        if out_dir is not None and self.restarts > 1:
            out_dir = out_dir / f"restart_{restart}"
        return dataclasses.replace(self, restart=restart, out_dir=out_dir)

    def rng(self, *key: int) -> np.random.Generator:
        """Generator for one purpose of this restart."""
        sequence = np.random.SeedSequence([self.seed, self.restart, *key])
        return np.random.default_rng(sequence)


def schedule_from_config(config: NtptConfig) -> Schedule:
    """Explicit phases if configured, otherwise one phase per 2x2 task."""
    if config.schedule.phases is not None:
        return Schedule.from_dict(config.schedule.phases)
    return sequential_schedule(
        ALL_GRID_TASKS, config.schedule.phase_steps, config.schedule.current_weight
    )


def stable_key(task: TaskId | str) -> int:
    """Seed component derived from a task name."""
    return zlib.crc32(str(task).encode())


def open_sources(
    data: DataConfig, seed: int
) -> tuple[SymbolSource, SymbolSource]:
    """Train and test symbol sources for a run."""
    train = open_symbol_source(
        data.symbol_source, "train", data.glyphs_per_class, seed, data.data_dir
    )
    test = open_symbol_source(
        data.symbol_source, "test", data.test_glyphs_per_class, seed, data.data_dir
    )
    return train, test


def eval_set(
    task: TaskId, source: SymbolSource, size: int, seed: int, num_digits: int = 2
) -> list[Batch]:
    """Held-out evaluation batches of a task, identical across restarts."""
    examples = fixed_examples(
        task, source, size, seed=seed + stable_key(task), num_digits=num_digits
    )
    return batches(task, examples, EVAL_BATCH)


def networks_read(task: TaskId) -> tuple[str, ...]:
    """Networks a task's scenario needs."""
    if task.scenario is Scenario.ADD2X2:
        return (DIGIT_NET,)
    if task.scenario is Scenario.APPLY2X2:
        return (OPERATOR_NET,)
    return (DIGIT_NET, OPERATOR_NET)


def oracle_functions(names: Sequence[str]) -> dict[str, LearnableFunction]:
    """Perfect classifiers standing in for the named networks."""
    return {name: OracleFunction(name, NET_CLASSES[name]) for name in names}


def program_state(
    program: DifferentiableProgram, nets: Sequence[tuple[str, int]]
) -> dict[str, Any]:
    """Exact parameter logits and the extracted listing of a program."""
    return {
        "nets": [list(n) for n in nets],
        "logits": {
            name: param.logits.data.tolist() for name, param in program.params.items()
        },
        "listing": discretize(program).to_dict(),
    }


def restore_logits(program: DifferentiableProgram, state: Mapping[str, Any]) -> None:
    """Load logits saved by :func:`program_state`."""
    for name, param in program.params.items():
        param.logits.data[...] = np.asarray(state["logits"][name])


@dataclass
class TaskState:
    """A task's program and data inside a run."""

    task: TaskId
    graph: ModelGraph
    nets: list[tuple[str, int]]
    dataset: TaskDataset
    eval_batches: list[Batch]
    introduced_step: int


@dataclass
class LifelongResult:
    """Outcome of one lifelong run.

    Attributes:
        log: Metrics rows of the run.
        library: The trained library.
        listings: Extracted program per task name.
        states: Per-task programs and data.
        restart: Restart index.
    """

    log: MetricsLog
    library: Library
    listings: dict[str, ProgramListing]
    states: dict[str, TaskState]
    restart: int = 0

    def programs(self) -> dict[str, dict[str, Any]]:
        """Logits and listings of every task, for saving."""
        return {
            name: program_state(state.graph, state.nets)
            for name, state in self.states.items()
        }


class LifelongTrainer:
    """Trains every task of a schedule against one shared library."""

    def __init__(
        self,
        config: RunConfig,
        library: Library | None = None,
        sources: tuple[SymbolSource, SymbolSource] | None = None,
    ) -> None:
        self.config = config
        self.library = library if library is not None else Library()
        self.train_source, self.test_source = sources or open_sources(
            config.data, config.seed
        )
        self.rng = config.rng(0)
        self.init_rng = config.rng(1)
        self.optimizer = Optimizer(
            config.optimizer.kind,
            config.optimizer.rates,
            beta1=config.optimizer.beta1,
            beta2=config.optimizer.beta2,
            eps=config.optimizer.eps,
            rho=config.optimizer.rho,
        )
        self.log = MetricsLog()
        self.states: dict[str, TaskState] = {}
        self.available: list[str] = (
            list(self.library.names) if self.neural else []
        )
        self.functions: dict[str, LearnableFunction] = {}
        self._rebind()
        self._train_loss: list[float] = []
        self._train_correct = 0
        self._train_seen = 0
        self.writer = (
            ScalarWriter(config.tensorboard_dir, config.restart)
            if config.tensorboard_dir
            else None
        )

    @property
    def neural(self) -> bool:
        """Whether models read symbols through library networks."""
        return self.config.perception is Perception.NEURAL

    def _rebind(self) -> None:
        if self.neural:
            self.functions = bind_functions(self.library, Perception.NEURAL)
        else:
            self.functions = oracle_functions(self.available)

    # ------------------------------------------------------------------
    # Task introduction
    # ------------------------------------------------------------------

    def _declare(self, name: str, task: TaskId) -> None:
        if name in self.available:
            return
        if self.neural:
            self.library.declare(
                name, NET_SPECS[name](), rng=self.init_rng, created_task=str(task)
            )
        self.available.append(name)
        logger.info("network %s available from task %s", name, task)

    def introduce(self, task: TaskId, step: int) -> TaskState:
        """Create a task's program over the networks available now.

        In a multi-task schedule net_0 comes with the first task and net_1
        with the second; a single-task schedule gets only the network its
        task reads.
        """
        lifelong = len(self.config.schedule.tasks()) > 1
        if lifelong:
            wanted = [DIGIT_NET] if not self.states else [DIGIT_NET, OPERATOR_NET]
        else:
            wanted = list(networks_read(task))
        for name in wanted:
            self._declare(name, task)
        self._rebind()

        nets = [(n, NET_CLASSES[n]) for n in self.available if n in NET_CLASSES]
        graph = build_grid_model(
            task, nets, rng=self.init_rng, init_scale=self.config.init_scale
        )
        data = self.config.data
        dataset = TaskDataset(
            task,
            self.train_source,
            pool_cap=data.pool_cap,
            seed=self.config.seed + stable_key(task),
        )
        state = TaskState(
            task,
            graph,
            nets,
            dataset,
            eval_set(task, self.test_source, self.config.eval_size, self.config.seed),
            step,
        )
        self.states[str(task)] = state
        logger.info("introduced %s at step %d over %s", task, step, nets)
        return state

    # ------------------------------------------------------------------
    # Training
    # ------------------------------------------------------------------

    def train_step(self, step: int) -> float:
        """One optimizer step on a batch of a scheduled task.

        Raises:
            NumericalError: If the loss or a gradient is not finite.
        """
        task = sample_task(self.config.schedule, step, self.rng)
        state = self.states.get(str(task)) or self.introduce(task, step)
        batch = state.dataset.sample(self.config.batch_size, self.rng)
        with Tape() as tape:
            result = state.graph.forward(
                feed_for(batch), self.functions, self.config.loss_reduction
            )
        assert result.loss is not None
        loss = result.loss.item()
        if not np.isfinite(loss):
            raise NumericalError(
                f"loss is {loss}", self.config.restart, step, str(task)
            )
        grads = tape.backward(result.loss)
        for param, grad in grads.items():
            if not np.all(np.isfinite(grad)):
                raise NumericalError(
                    f"gradient of {param.name!r} is not finite",
                    self.config.restart,
                    step,
                    str(task),
                )
        self.optimizer.step(grads.keys(), grads)
        if self.neural:
            used = {p.name.split(".")[0] for p in grads if p.group == "perceptual"}
            self.library.mark_trained(used & set(self.library.names))

        predicted = result.outputs["label"].argmax()
        self._train_correct += int(np.sum(predicted == batch.labels))
        self._train_seen += len(batch)
        self._train_loss.append(loss)
        return loss

    def _record(self, row: MetricsRow) -> None:
        self.log.log(row)
        if self.writer is not None:
            self.writer.add_row(row)

    def evaluate(self, step: int) -> dict[str, float]:
        """Log held-out accuracy of every task seen so far."""
        restart = self.config.restart
        if self._train_seen:
            self._record(
                MetricsRow(
                    step,
                    "all",
                    Split.TRAIN.value,
                    self._train_correct / self._train_seen,
                    float(np.mean(self._train_loss)),
                    restart,
                )
            )
            self._train_loss.clear()
            self._train_correct = self._train_seen = 0

        accuracies = {}
        for name, state in self.states.items():
            result = evaluate_program(state.graph, state.eval_batches, self.functions)
            self._record(
                MetricsRow(
                    step, name, Split.TEST.value, result.accuracy, result.loss, restart
                )
            )
            accuracies[name] = result.accuracy

        if self.neural:
            for net in self.library.names:
                if net not in CLASSIFIER_TASKS:
                    continue
                label, classes = CLASSIFIER_TASKS[net]
                images, targets = self.test_source.labelled(classes)
                accuracy = classifier_accuracy(self.library[net], images, targets)
                self._record(
                    MetricsRow(step, label, Split.TEST.value, accuracy, None, restart)
                )
        logger.info(
            "step %d: %s",
            step,
            ", ".join(f"{k} {v:.3f}" for k, v in accuracies.items()) or "no tasks",
        )
        return accuracies

    def snapshot(self, phase: int) -> None:
        """Save the library and every program at a phase end."""
        if self.config.out_dir is None:
            return
        directory = self.config.out_dir / "snapshots"
        directory.mkdir(parents=True, exist_ok=True)
        library_path = directory / f"phase_{phase}.ntpt"
        self.library.save(library_path)
        programs = {
            name: program_state(state.graph, state.nets)
            for name, state in self.states.items()
        }
        (directory / f"phase_{phase}_programs.json").write_text(
            json.dumps(programs, indent=2)
        )
        self.log.record_snapshot(phase, library_path, self.config.restart)
        logger.info("snapshot of phase %d written to %s", phase, library_path)

    def run(self) -> LifelongResult:
        """Train through the whole schedule."""
        schedule = self.config.schedule
        total = schedule.total_steps
        ends = schedule.phase_ends
        introduced = schedule.introduced_at()
        for task, phase in introduced.items():
            if phase == 0:
                self.introduce(task, 0)

        for step in range(total):
            phase = schedule.phase_index(step)
            for task, first in introduced.items():
                if first == phase and str(task) not in self.states:
                    self.introduce(task, step)
            self.train_step(step)
            done = step + 1
            if done % self.config.eval_every == 0 or done in ends:
                self.evaluate(done)
            if done in ends:
                self.snapshot(ends.index(done))

        listings = {}
        for name, state in self.states.items():
            listing = discretize(state.graph)
            listings[name] = listing
            result = evaluate_listing(
                state.graph, listing, state.eval_batches, self.functions
            )
            self._record(
                MetricsRow(
                    total,
                    name,
                    Split.DISCRETE.value,
                    result.accuracy,
                    None,
                    self.config.restart,
                )
            )
        if self.writer is not None:
            self.writer.close()
        return LifelongResult(
            self.log, self.library, listings, self.states, self.config.restart
        )


def train_lifelong(
    config: RunConfig,
    library: Library | None = None,
    sources: tuple[SymbolSource, SymbolSource] | None = None,
) -> LifelongResult:
    """Train every task of ``config.schedule`` over a shared library.

    Args:
        config: Run settings.
        library: Library to start from (a new empty one by default).
        sources: Pre-opened train and test symbol sources.

    Raises:
        NumericalError: If the loss becomes NaN or infinite.
        UntrainedNetworkError: If introducing a task would add a second
            untrained network.
    """
    logger.info(
        "restart %d: %d steps over %d tasks",
        config.restart,
        config.schedule.total_steps,
        len(config.schedule.tasks()),
    )
    return LifelongTrainer(config, library, sources).run()


def replay_snapshot(
    snapshot_dir: str | Path,
    phase: int,
    task: TaskId | str,
    config: RunConfig,
    sources: tuple[SymbolSource, SymbolSource] | None = None,
) -> float:
    """Held-out accuracy of a task recomputed from a phase snapshot.

    Raises:
        LibraryFormatError: If the library snapshot is corrupt.
        KeyError: If the task had not been introduced by that phase.
    """
    snapshot_dir = Path(snapshot_dir)
    library = Library.load(snapshot_dir / f"phase_{phase}.ntpt")
    programs = json.loads(
        (snapshot_dir / f"phase_{phase}_programs.json").read_text()
    )
    task = task if isinstance(task, TaskId) else TaskId.parse(task)
    state = programs[str(task)]
    nets = [(str(n), int(k)) for n, k in state["nets"]]
    graph = build_grid_model(task, nets)
    restore_logits(graph, state)
    _, test = sources or open_sources(config.data, config.seed)
    if config.perception is Perception.NEURAL:
        functions = bind_functions(library, Perception.NEURAL)
    else:
        functions = oracle_functions([n for n, _ in nets])
    eval_batches = eval_set(task, test, config.eval_size, config.seed)
    return evaluate_program(graph, eval_batches, functions).accuracy
