"""Tests for lifelong task schedules."""

import numpy as np
import pytest
from scipy import stats

from src.tasks import (
    ALL_GRID_TASKS,
    Phase,
    Schedule,
    TaskDataError,
    TaskId,
    sample_task,
    sequential_schedule,
    single_task_schedule,
)

ADD_TOP = TaskId.parse("add2x2:top")
ADD_LEFT = TaskId.parse("add2x2:left")
APPLY_TOP = TaskId.parse("apply2x2:top")


def three_phase() -> Schedule:
    return Schedule(
        (
            Phase(100, ((ADD_TOP, 1.0),)),
            Phase(50, ((ADD_LEFT, 0.8), (ADD_TOP, 0.2))),
            Phase(50, ((APPLY_TOP, 0.5), (ADD_LEFT, 0.25), (ADD_TOP, 0.25))),
        )
    )


class TestPhase:
    """Tests for Phase validation."""

    def test_probabilities_sum_to_one(self) -> None:
        """Test weights must form a distribution."""
        with pytest.raises(TaskDataError, match="sum to"):
            Phase(10, ((ADD_TOP, 0.5),))

    def test_positive_duration(self) -> None:
        """Test a phase lasts at least one step."""
        with pytest.raises(TaskDataError, match="positive"):
            Phase(0, ((ADD_TOP, 1.0),))

    def test_negative_weight(self) -> None:
        """Test weights must be non-negative."""
        with pytest.raises(TaskDataError, match="non-negative"):
            Phase(10, ((ADD_TOP, 1.5), (ADD_LEFT, -0.5)))

    def test_zero_weight_task_not_listed(self) -> None:
        """Test tasks with zero probability are inactive."""
        phase = Phase(10, ((ADD_TOP, 1.0), (ADD_LEFT, 0.0)))
        assert phase.tasks == [ADD_TOP]
        assert phase.probability(ADD_LEFT) == 0.0


class TestSchedule:
    """Tests for Schedule."""

    def test_phase_boundaries(self) -> None:
        """Test steps map to their phases and the last phase persists."""
        schedule = three_phase()
        assert schedule.total_steps == 200
        assert schedule.phase_ends == [100, 150, 200]
        assert schedule.phase_index(0) == 0
        assert schedule.phase_index(99) == 0
        assert schedule.phase_index(100) == 1
        assert schedule.phase_index(10_000) == 2

    def test_negative_step(self) -> None:
        """Test steps are non-negative."""
        with pytest.raises(TaskDataError):
            three_phase().phase_index(-1)

    def test_introduction_order(self) -> None:
        """Test tasks are listed by the phase introducing them."""
        schedule = three_phase()
        assert schedule.introduced_at() == {ADD_TOP: 0, ADD_LEFT: 1, APPLY_TOP: 2}
        assert schedule.tasks() == [ADD_TOP, ADD_LEFT, APPLY_TOP]

    def test_dict_round_trip(self) -> None:
        """Test the configuration form round-trips."""
        schedule = three_phase()
        assert Schedule.from_dict(schedule.to_dict()) == schedule

    def test_empty(self) -> None:
        """Test a schedule needs a phase."""
        with pytest.raises(TaskDataError):
            Schedule(())

    def test_sampling_frequencies(self) -> None:
        """Test drawn tasks follow the phase distribution."""
        schedule = three_phase()
        rng = np.random.default_rng(11)
        draws = [sample_task(schedule, 160, rng) for _ in range(10_000)]
        observed = [draws.count(t) for t in (APPLY_TOP, ADD_LEFT, ADD_TOP)]
        expected = [5000, 2500, 2500]
        assert stats.chisquare(observed, expected).pvalue > 0.01

    def test_last_phase_persists(self) -> None:
        """Test sampling past the end keeps the final distribution."""
        schedule = single_task_schedule(ADD_LEFT, 5)
        rng = np.random.default_rng(0)
        assert {sample_task(schedule, 500, rng) for _ in range(20)} == {ADD_LEFT}


class TestSequentialSchedule:
    """Tests for sequential_schedule."""

    def test_one_phase_per_task(self) -> None:
        """Test each grid task gets its own phase."""
        schedule = sequential_schedule(ALL_GRID_TASKS, phase_steps=10)
        assert len(schedule.phases) == 8
        assert schedule.tasks() == list(ALL_GRID_TASKS)
        assert schedule.total_steps == 80

    def test_weights(self) -> None:
        """Test the current task dominates and the rest share the remainder."""
        schedule = sequential_schedule(ALL_GRID_TASKS[:3], current_weight=0.8)
        assert schedule.phases[0].weights == ((ALL_GRID_TASKS[0], 1.0),)
        last = schedule.phases[2]
        assert last.probability(ALL_GRID_TASKS[2]) == pytest.approx(0.8)
        assert last.probability(ALL_GRID_TASKS[0]) == pytest.approx(0.1)

    def test_pure_sequential(self) -> None:
        """Test weight 1 trains one task per phase."""
        schedule = sequential_schedule(ALL_GRID_TASKS[:2], current_weight=1.0)
        assert schedule.phases[1].tasks == [ALL_GRID_TASKS[1]]

    def test_bad_weight(self) -> None:
        """Test the current weight lies in (0, 1]."""
        with pytest.raises(TaskDataError):
            sequential_schedule(current_weight=0.0)
