"""Time-varying task distributions for lifelong training."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .ground_truth import ALL_GRID_TASKS, TaskId
from .symbols import TaskDataError


@dataclass(frozen=True)
class Phase:
    """A stretch of training with a fixed task distribution.

    Attributes:
        steps: Duration in training steps.
        weights: Probability of each task.
    """

    steps: int
    weights: tuple[tuple[TaskId, float], ...]

    def __post_init__(self) -> None:
        """Validate duration and probabilities."""
        if self.steps < 1:
            raise TaskDataError(f"Phase duration must be positive, got {self.steps}")
        total = sum(p for _, p in self.weights)
        if not self.weights or abs(total - 1.0) > 1e-9:
            raise TaskDataError(f"Phase probabilities sum to {total}, expected 1")
        if any(p < 0 for _, p in self.weights):
            raise TaskDataError("Phase probabilities must be non-negative")

    @property
    def tasks(self) -> list[TaskId]:
        """Tasks with positive probability."""
        return [t for t, p in self.weights if p > 0]

    def probability(self, task: TaskId) -> float:
        """Probability of ``task`` in this phase."""
        return sum(p for t, p in self.weights if t == task)


@dataclass(frozen=True)
class Schedule:
    """Ordered phases; the last phase's distribution persists past its end."""

    phases: tuple[Phase, ...]

    def __post_init__(self) -> None:
        """Require at least one phase."""
        if not self.phases:
            raise TaskDataError("A schedule needs at least one phase")

    @property
    def total_steps(self) -> int:
        """Sum of phase durations."""
        return sum(p.steps for p in self.phases)

    @property
    def phase_ends(self) -> list[int]:
        """Step at which each phase ends (exclusive)."""
        return [int(e) for e in np.cumsum([p.steps for p in self.phases])]

    def phase_index(self, step: int) -> int:
        """Phase containing ``step`` (the last phase beyond the end)."""
        if step < 0:
            raise TaskDataError(f"Step must be non-negative, got {step}")
        for index, end in enumerate(self.phase_ends):
            if step < end:
                return index
        return len(self.phases) - 1

    def introduced_at(self) -> dict[TaskId, int]:
        """Phase in which each task first has positive probability."""
        first: dict[TaskId, int] = {}
        for index, phase in enumerate(self.phases):
            for task in phase.tasks:
                first.setdefault(task, index)
        return first

    def tasks(self) -> list[TaskId]:
        """All tasks in order of introduction."""
        return list(self.introduced_at())

    def to_dict(self) -> list[dict]:
        """Plain form for configuration files."""
        return [
            {"steps": p.steps, "weights": {str(t): w for t, w in p.weights}}
            for p in self.phases
        ]

    @classmethod
    def from_dict(cls, phases: Sequence[Mapping]) -> Schedule:
        """Inverse of :meth:`to_dict`."""
        return cls(
            tuple(
                Phase(
                    int(p["steps"]),
                    tuple((TaskId.parse(t), float(w)) for t, w in p["weights"].items()),
                )
                for p in phases
            )
        )


def sample_task(schedule: Schedule, step: int, rng: np.random.Generator) -> TaskId:
    """Draw the task to train on at ``step``."""
    phase = schedule.phases[schedule.phase_index(step)]
    tasks = [t for t, _ in phase.weights]
    probs = np.array([p for _, p in phase.weights])
    return tasks[int(rng.choice(len(tasks), p=probs / probs.sum()))]


def sequential_schedule(
    tasks: Sequence[TaskId] = ALL_GRID_TASKS,
    phase_steps: int = 2500,
    current_weight: float = 0.8,
) -> Schedule:
    """One phase per task, each dominated by its task.

    The first phase trains only its task. Every later phase gives
    ``current_weight`` to its task and splits the rest uniformly over the
    tasks already seen.
    """
    if not 0.0 < current_weight <= 1.0:
        raise TaskDataError(f"current_weight must be in (0, 1], got {current_weight}")
    phases = []
    for index, task in enumerate(tasks):
        seen = list(tasks[:index])
        if not seen or current_weight == 1.0:
            weights = ((task, 1.0),)
        else:
            rest = (1.0 - current_weight) / len(seen)
            weights = ((task, current_weight), *((t, rest) for t in seen))
        phases.append(Phase(phase_steps, weights))
    return Schedule(tuple(phases))


def single_task_schedule(task: TaskId, steps: int) -> Schedule:
    """A schedule that trains one task for ``steps`` steps."""
    return Schedule((Phase(steps, ((task, 1.0),)),))
