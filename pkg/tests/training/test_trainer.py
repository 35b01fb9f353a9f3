"""Tests for lifelong training over a shared library."""

from pathlib import Path

import numpy as np
import pytest

from configs import DEFAULT_CONFIG, OptimizerConfig
from src.models import build_grid_model
from src.neural import Library, Perception, UntrainedNetworkError, digit_net_spec
from src.tasks import Phase, Schedule, SymbolSource, TaskId, single_task_schedule
from src.terpret import discretize
from src.training import (
    LifelongTrainer,
    NumericalError,
    RunConfig,
    Split,
    networks_read,
    program_state,
    replay_snapshot,
    restore_logits,
    run_restarts,
    train_lifelong,
)

ADD_TOP = TaskId.parse("add2x2:top")
APPLY_TOP = TaskId.parse("apply2x2:top")
BOTH_NETS = [("net_0", 10), ("net_1", 4)]


def two_phase(steps: int = 20) -> Schedule:
    return Schedule(
        (
            Phase(steps, ((ADD_TOP, 1.0),)),
            Phase(steps, ((APPLY_TOP, 0.8), (ADD_TOP, 0.2))),
        )
    )


def quick_config(schedule: Schedule, **overrides) -> RunConfig:
    """Small oracle-perception settings for fast runs."""
    settings = {
        "schedule": schedule,
        "perception": Perception.ORACLE,
        "batch_size": 8,
        "eval_every": 10,
        "eval_size": 20,
        "optimizer": OptimizerConfig(interpreter_rate=0.05),
    }
    settings.update(overrides)
    return RunConfig(**settings)


class TestRunConfig:
    """Tests for RunConfig."""

    def test_from_defaults(self) -> None:
        """Test the default configuration yields the 8-phase schedule."""
        config = RunConfig.from_config(DEFAULT_CONFIG)
        assert len(config.schedule.phases) == 8
        assert config.perception is Perception.NEURAL
        assert config.batch_size == 32
        assert config.out_dir is None

    def test_restart_directories(self) -> None:
        """Test restarts of a multi-restart run write to their own directory."""
        config = quick_config(two_phase(), restarts=3, out_dir=Path("runs"))
        assert config.for_restart(2).out_dir == Path("runs/restart_2")
        assert config.for_restart(2).restart == 2
        single = quick_config(two_phase(), out_dir=Path("runs"))
        assert single.for_restart(0).out_dir == Path("runs")

    def test_rng_streams(self) -> None:
        """Test generators depend on seed, restart and purpose."""
        config = quick_config(two_phase())
        assert config.rng(1).random() == config.rng(1).random()
        assert config.rng(1).random() != config.rng(2).random()
        other = config.for_restart(1)
        assert config.rng(1).random() != other.rng(1).random()

    def test_networks_read(self) -> None:
        """Test which networks each scenario reads."""
        assert networks_read(ADD_TOP) == ("net_0",)
        assert networks_read(APPLY_TOP) == ("net_1",)


class TestProgramState:
    """Tests for saving and restoring program logits."""

    def test_restore(self) -> None:
        """Test saved logits restore exactly into a fresh model."""
        trained = build_grid_model(ADD_TOP, BOTH_NETS, rng=np.random.default_rng(3))
        state = program_state(trained, BOTH_NETS)
        fresh = build_grid_model(ADD_TOP, BOTH_NETS, rng=np.random.default_rng(4))
        restore_logits(fresh, state)
        for name, param in fresh.params.items():
            expected = trained.params[name].logits.data
            np.testing.assert_array_equal(param.logits.data, expected)
        assert state["listing"] == discretize(trained).to_dict()
        assert state["nets"] == [["net_0", 10], ["net_1", 4]]


class TestLifelongOracle:
    """Tests for lifelong runs under oracle perception."""

    def test_evaluation_rows(
        self, train_source: SymbolSource, test_source: SymbolSource
    ) -> None:
        """Test tasks are evaluated from their introduction on."""
        config = quick_config(two_phase())
        result = train_lifelong(config, sources=(train_source, test_source))
        log = result.log
        assert [s for s, _ in log.series(str(ADD_TOP))] == [10, 20, 30, 40]
        assert [s for s, _ in log.series(str(APPLY_TOP))] == [30, 40]
        assert len(log.select(split=Split.TRAIN)) == 4
        discrete = log.select(split=Split.DISCRETE)
        assert {r.task for r in discrete} == {str(ADD_TOP), str(APPLY_TOP)}
        assert all(r.step == 40 for r in discrete)
        assert set(result.listings) == {str(ADD_TOP), str(APPLY_TOP)}
        assert len(result.library) == 0

    def test_deterministic(
        self, train_source: SymbolSource, test_source: SymbolSource
    ) -> None:
        """Test equal settings give identical logs and programs."""
        config = quick_config(two_phase(10), eval_every=5)
        sources = (train_source, test_source)
        first = train_lifelong(config, sources=sources)
        second = train_lifelong(config, sources=sources)
        assert first.log.rows == second.log.rows
        assert first.programs() == second.programs()

    def test_restarts_differ(
        self, train_source: SymbolSource, test_source: SymbolSource
    ) -> None:
        """Test another restart starts from other program logits."""
        config = quick_config(two_phase(10))
        sources = (train_source, test_source)
        first = LifelongTrainer(config, sources=sources).introduce(ADD_TOP, 0)
        second = LifelongTrainer(config.for_restart(1), sources=sources).introduce(
            ADD_TOP, 0
        )
        name = next(iter(first.graph.params))
        assert not np.array_equal(
            first.graph.params[name].logits.data,
            second.graph.params[name].logits.data,
        )

    def test_later_tasks_see_both_networks(
        self, train_source: SymbolSource, test_source: SymbolSource
    ) -> None:
        """Test the first task sees net_0 only and the second both networks."""
        config = quick_config(two_phase(5))
        result = train_lifelong(config, sources=(train_source, test_source))
        assert result.states[str(ADD_TOP)].nets == [("net_0", 10)]
        assert result.states[str(APPLY_TOP)].nets == BOTH_NETS

    def test_snapshots_replay(
        self,
        tmp_path: Path,
        train_source: SymbolSource,
        test_source: SymbolSource,
    ) -> None:
        """Test a phase snapshot reproduces the accuracy logged at its end."""
        config = quick_config(two_phase(), out_dir=tmp_path)
        sources = (train_source, test_source)
        result = train_lifelong(config, sources=sources)
        snapshots = tmp_path / "snapshots"
        for phase in (0, 1):
            assert (snapshots / f"phase_{phase}.ntpt").exists()
            assert (snapshots / f"phase_{phase}_programs.json").exists()
        assert set(result.log.snapshots[0]) == {0, 1}

        logged = dict(result.log.series(str(ADD_TOP)))
        replayed = replay_snapshot(snapshots, 0, ADD_TOP, config, sources)
        assert replayed == logged[20]
        replayed = replay_snapshot(snapshots, 1, str(APPLY_TOP), config, sources)
        assert replayed == dict(result.log.series(str(APPLY_TOP)))[40]

    def test_replay_unknown_task(
        self,
        tmp_path: Path,
        train_source: SymbolSource,
        test_source: SymbolSource,
    ) -> None:
        """Test replaying a task not yet introduced at that phase."""
        config = quick_config(two_phase(5), out_dir=tmp_path)
        sources = (train_source, test_source)
        train_lifelong(config, sources=sources)
        with pytest.raises(KeyError):
            replay_snapshot(tmp_path / "snapshots", 0, APPLY_TOP, config, sources)


class TestLifelongNeural:
    """Tests for lifelong runs reading through library networks."""

    def test_networks_declared_in_order(
        self, train_source: SymbolSource, test_source: SymbolSource
    ) -> None:
        """Test net_0 comes with the first task and net_1 with the second."""
        config = quick_config(
            two_phase(3), perception=Perception.NEURAL, eval_every=3, eval_size=8
        )
        result = train_lifelong(config, sources=(train_source, test_source))
        library = result.library
        assert library.names == ["net_0", "net_1"]
        assert library["net_0"].created_task == str(ADD_TOP)
        assert library["net_1"].created_task == str(APPLY_TOP)
        assert library["net_0"].train_steps >= 3
        assert result.log.series("net_0/digits")
        assert result.log.series("net_1/operators")

    def test_single_task_declares_needed_network(
        self, train_source: SymbolSource, test_source: SymbolSource
    ) -> None:
        """Test an apply-only run never declares the digit network."""
        config = quick_config(
            single_task_schedule(APPLY_TOP, 2),
            perception=Perception.NEURAL,
            eval_every=2,
            eval_size=8,
        )
        result = train_lifelong(config, sources=(train_source, test_source))
        assert result.library.names == ["net_1"]

    def test_refuses_second_untrained_network(
        self, train_source: SymbolSource, test_source: SymbolSource
    ) -> None:
        """Test a library with an untrained network blocks a new one."""
        library = Library()
        library.declare("net_0", digit_net_spec((8,)))
        config = quick_config(
            single_task_schedule(APPLY_TOP, 2), perception=Perception.NEURAL
        )
        with pytest.raises(UntrainedNetworkError, match="net_0"):
            train_lifelong(config, library, sources=(train_source, test_source))

    def test_loaded_library_is_reused(
        self, train_source: SymbolSource, test_source: SymbolSource
    ) -> None:
        """Test a trained library's networks are read rather than redeclared."""
        library = Library()
        library.declare("net_0", digit_net_spec((8,)))
        library.mark_trained(["net_0"])
        config = quick_config(
            single_task_schedule(ADD_TOP, 2),
            perception=Perception.NEURAL,
            eval_every=2,
            eval_size=8,
        )
        result = train_lifelong(config, library, sources=(train_source, test_source))
        assert result.library.names == ["net_0"]
        assert result.library["net_0"].train_steps == 3


class TestNumericalError:
    """Tests for NumericalError."""

    def test_message(self) -> None:
        """Test the diagnostic names restart, step and task."""
        error = NumericalError("loss is nan", 2, 17, "add2x2:top")
        assert str(error) == "restart 2, step 17, task add2x2:top: loss is nan"
        assert (error.restart, error.step, error.task) == (2, 17, "add2x2:top")


@pytest.mark.slow
class TestOracleConvergence:
    """End-to-end training with perfect perception."""

    def test_add_task_converges(
        self, train_source: SymbolSource, test_source: SymbolSource
    ) -> None:
        """Test add2x2:top is solved by at least one of three restarts."""
        config = quick_config(
            single_task_schedule(ADD_TOP, 1500),
            eval_every=100,
            eval_size=100,
            batch_size=16,
        )
        summary = run_restarts(config, 3)
        assert summary.best is not None
        assert summary.best.score > 0.9
