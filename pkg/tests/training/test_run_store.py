"""Tests for restarts and run directories."""

from pathlib import Path

import pytest

from configs import DEFAULT_CONFIG, DataConfig, MathConfig, OptimizerConfig
from src.neural import Library, LibraryFormatError, Perception
from src.tasks import Phase, Schedule, TaskId, single_task_schedule
from src.training import (
    MetricsLog,
    NumericalError,
    RestartSummary,
    RunConfig,
    RunKind,
    load_run,
    resolve_config,
    run_restarts,
    task_flags,
    write_run,
)
from src.training import restarts as restarts_module

ADD_TOP = TaskId.parse("add2x2:top")
ADD_LEFT = TaskId.parse("add2x2:left")


def tiny_config(schedule: Schedule | None = None, **overrides) -> RunConfig:
    settings = {
        "schedule": schedule or single_task_schedule(ADD_TOP, 6),
        "perception": Perception.ORACLE,
        "batch_size": 4,
        "eval_every": 3,
        "eval_size": 8,
        "optimizer": OptimizerConfig(interpreter_rate=0.05),
        "data": DataConfig(glyphs_per_class=3, test_glyphs_per_class=3),
    }
    settings.update(overrides)
    return RunConfig(**settings)


def two_restarts_schedule() -> Schedule:
    return Schedule(
        (Phase(4, ((ADD_TOP, 1.0),)), Phase(4, ((ADD_LEFT, 0.5), (ADD_TOP, 0.5))))
    )


@pytest.fixture(scope="module")
def two_restarts() -> RestartSummary:
    """Two short oracle restarts of a two-task schedule."""
    return run_restarts(tiny_config(two_restarts_schedule(), eval_every=4), 2)


class TestRunRestarts:
    """Tests for run_restarts."""

    def test_counts_validated(self) -> None:
        """Test restart and job counts must be positive."""
        with pytest.raises(ValueError, match="at least one restart"):
            run_restarts(tiny_config(), 0)
        with pytest.raises(ValueError, match="at least one job"):
            run_restarts(tiny_config(), 1, jobs=0)

    def test_outcomes(self, two_restarts: RestartSummary) -> None:
        """Test every restart reports and logs are merged."""
        assert [o.restart for o in two_restarts.outcomes] == [0, 1]
        assert two_restarts.merged_log().restarts() == [0, 1]
        assert two_restarts.failures == []
        best = two_restarts.best
        assert best is not None
        assert best.score == max(o.score for o in two_restarts.outcomes)
        assert set(best.listings) == {str(ADD_TOP), str(ADD_LEFT)}
        assert best.library is None

    def test_numerical_failure_is_contained(
        self, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test a diverging restart is recorded instead of raised."""

        def diverge(config: RunConfig, library=None):
            raise NumericalError("loss is nan", config.restart, 3, str(ADD_TOP))

        monkeypatch.setattr(restarts_module, "train_lifelong", diverge)
        summary = run_restarts(tiny_config(), 2)
        assert len(summary.failures) == 2
        assert summary.best is None
        assert summary.convergence_count == 0
        assert "step 3" in summary.failures[0].error

    def test_math_restarts(self) -> None:
        """Test block-machine restarts package their program."""
        summary = run_restarts(tiny_config(), 1, math=MathConfig(steps=3))
        outcome = summary.outcomes[0]
        assert set(outcome.programs) == {"math"}
        assert "instr_0" in outcome.listings["math"]["params"]
        assert summary.merged_log().select("math", "discrete")


class TestTaskFlags:
    """Tests for the converged and solved flags of a restart."""

    def log_series(self, accuracies: list[float]) -> MetricsLog:
        log = MetricsLog()
        for i, accuracy in enumerate(accuracies):
            log.log_eval(3 * (i + 1), str(ADD_TOP), accuracy)
        return log

    def test_accurate_from_start_is_solved_only(self) -> None:
        """Test a task high from its first evaluation shows no convergence jump."""
        log = self.log_series([0.95, 0.96, 0.97])
        assert task_flags(log, [str(ADD_TOP)], tiny_config()) == (False, True)

    def test_jump_converges(self) -> None:
        """Test a rise from chance to above the level converges and solves."""
        log = self.log_series([0.1, 0.2, 0.97])
        assert task_flags(log, [str(ADD_TOP)], tiny_config()) == (True, True)

    def test_jump_then_collapse(self) -> None:
        """Test a task that converged but ends low is not solved."""
        log = self.log_series([0.1, 0.97, 0.3])
        assert task_flags(log, [str(ADD_TOP)], tiny_config()) == (True, False)

    def test_every_task_counts(self) -> None:
        """Test one task without a jump keeps the restart from converging."""
        log = MetricsLog()
        for step, top, left in ((3, 0.1, 0.95), (6, 0.2, 0.96), (9, 0.97, 0.97)):
            log.log_eval(step, str(ADD_TOP), top)
            log.log_eval(step, str(ADD_LEFT), left)
        flags = task_flags(log, [str(ADD_TOP), str(ADD_LEFT)], tiny_config())
        assert flags == (False, True)

    def test_no_tasks(self) -> None:
        """Test a restart with no tasks is neither converged nor solved."""
        assert task_flags(MetricsLog(), [], tiny_config()) == (False, False)


class TestRunDirectory:
    """Tests for write_run and load_run."""

    def test_round_trip(self, tmp_path: Path, two_restarts: RestartSummary) -> None:
        """Test a written run loads back with its best restart."""
        schedule = two_restarts_schedule()
        directory = write_run(
            tmp_path / "run",
            DEFAULT_CONFIG,
            two_restarts,
            RunKind.LIFELONG,
            schedule.to_dict(),
        )
        record = load_run(directory)
        assert record.kind is RunKind.LIFELONG
        assert record.best_restart == two_restarts.best.restart
        assert record.log.rows == two_restarts.merged_log().rows
        assert set(record.listings) == {str(ADD_TOP), str(ADD_LEFT)}
        expected = two_restarts.best.listings[str(ADD_TOP)]
        assert record.listings[str(ADD_TOP)].to_dict() == expected
        assert set(record.programs) == set(record.listings)
        assert [r["restart"] for r in record.restarts] == [0, 1]
        assert [r["solved"] for r in record.restarts] == [
            o.solved for o in two_restarts.outcomes
        ]
        assert Schedule.from_dict(record.config.schedule.phases) == schedule
        assert record.library() is None

    def test_resolve_keeps_config_without_phases(self) -> None:
        """Test math runs record the configuration unchanged."""
        assert resolve_config(DEFAULT_CONFIG, None) is DEFAULT_CONFIG

    def test_snapshot_dirs(self, tmp_path: Path, two_restarts: RestartSummary) -> None:
        """Test multi-restart runs keep snapshots per restart."""
        record = load_run(
            write_run(tmp_path, DEFAULT_CONFIG, two_restarts, RunKind.LIFELONG)
        )
        assert record.snapshot_dir(1) == tmp_path / "restart_1" / "snapshots"

    def test_verify_snapshots(
        self, tmp_path: Path, two_restarts: RestartSummary
    ) -> None:
        """Test every restart's snapshots are parsed and a bad one is named."""
        record = load_run(
            write_run(tmp_path, DEFAULT_CONFIG, two_restarts, RunKind.LIFELONG)
        )
        for restart in (0, 1):
            Library().save(record.snapshot_dir(restart) / "phase_0.ntpt")
        assert len(record.snapshot_paths()) == 2
        assert record.verify_snapshots() == 2

        bad = record.snapshot_dir(1) / "phase_0.ntpt"
        bad.write_bytes(bad.read_bytes()[:-1])
        with pytest.raises(LibraryFormatError, match="restart_1"):
            record.verify_snapshots()

    def test_all_failed(
        self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test a run whose restarts all failed has no best restart."""

        def diverge(config: RunConfig, library=None):
            raise NumericalError("loss is inf", config.restart, 0, str(ADD_TOP))

        monkeypatch.setattr(restarts_module, "train_lifelong", diverge)
        summary = run_restarts(tiny_config(), 1)
        record = load_run(write_run(tmp_path, DEFAULT_CONFIG, summary, RunKind.SINGLE))
        assert record.best_restart is None
        assert record.listings == {}
        assert record.snapshot_dir() == tmp_path / "snapshots"

    def test_corrupt_library(
        self, tmp_path: Path, two_restarts: RestartSummary
    ) -> None:
        """Test a damaged library file is reported when read."""
        record = load_run(
            write_run(tmp_path, DEFAULT_CONFIG, two_restarts, RunKind.LIFELONG)
        )
        record.library_path.write_bytes(b"not a library")
        with pytest.raises(LibraryFormatError):
            record.library()

    def test_missing_directory(self, tmp_path: Path) -> None:
        """Test loading a directory that is not a run."""
        with pytest.raises(OSError):
            load_run(tmp_path / "nowhere")

