"""Tests for metrics logs, convergence detection and TensorBoard export."""

from pathlib import Path

import pytest

from src.training import (
    CSV_FIELDS,
    MetricsLog,
    MetricsRow,
    ScalarWriter,
    Split,
    convergence_index,
    detect_convergence,
)


def sample_log() -> MetricsLog:
    log = MetricsLog()
    log.log_eval(10, "add2x2:top", 0.25, 1.5)
    log.log_eval(10, "all", 0.3, 1.2, split=Split.TRAIN)
    log.log_eval(20, "add2x2:top", 0.75, 0.4)
    log.log_eval(20, "net_0/digits", 0.9)
    log.log_eval(20, "add2x2:top", 1.0, split=Split.DISCRETE)
    return log


class TestConvergence:
    """Tests for convergence detection."""

    def test_jump_detected(self) -> None:
        """Test a rise from 0.1 to 0.95 counts as convergence."""
        assert detect_convergence([0.1, 0.1, 0.95, 0.97])
        assert convergence_index([0.1, 0.1, 0.95, 0.97]) == 2

    def test_flat_series(self) -> None:
        """Test a high but flat series never jumped."""
        assert not detect_convergence([0.95, 0.96, 0.97])

    def test_slow_climb(self) -> None:
        """Test a rise spread over more than the window does not count."""
        slow = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.91]
        assert not detect_convergence(slow, window=3)
        assert detect_convergence(slow, window=9)

    def test_must_end_above_level(self) -> None:
        """Test a jump that stays below the level is ignored."""
        assert not detect_convergence([0.0, 0.85])

    def test_too_short(self) -> None:
        """Test fewer than two evaluations never converge."""
        assert not detect_convergence([])
        assert not detect_convergence([1.0])


class TestMetricsLog:
    """Tests for MetricsLog."""

    def test_steps_monotone_per_restart(self) -> None:
        """Test a step going backwards within a restart is rejected."""
        log = MetricsLog()
        log.log_eval(20, "add2x2:top", 0.5)
        log.log_eval(5, "add2x2:top", 0.5, restart=1)
        with pytest.raises(ValueError, match="Step 10 precedes step 20 in restart 0"):
            log.log_eval(10, "add2x2:top", 0.5)

    def test_equal_steps_allowed(self) -> None:
        """Test several rows may share a step."""
        assert len(sample_log()) == 5

    def test_select_and_series(self) -> None:
        """Test filtering by task, split and restart."""
        log = sample_log()
        assert log.series("add2x2:top") == [(10, 0.25), (20, 0.75)]
        assert len(log.select(split=Split.DISCRETE)) == 1
        assert len(log.select(split="train")) == 1
        assert log.select(restart=3) == []

    def test_tasks_in_order(self) -> None:
        """Test task names are listed by first appearance."""
        assert sample_log().tasks() == ["add2x2:top", "all", "net_0/digits"]

    def test_merge(self) -> None:
        """Test merging keeps every restart's rows and snapshots."""
        first = sample_log()
        first.record_snapshot(0, "a/phase_0.ntpt")
        second = MetricsLog()
        second.log_eval(10, "add2x2:top", 0.5, restart=1)
        second.record_snapshot(0, "b/phase_0.ntpt", restart=1)
        merged = MetricsLog.merge([first, second])
        assert merged.restarts() == [0, 1]
        assert len(merged) == 6
        assert merged.snapshots == {
            0: {0: "a/phase_0.ntpt"},
            1: {0: "b/phase_0.ntpt"},
        }

    def test_rows_are_copied(self) -> None:
        """Test the rows property cannot be used to edit the log."""
        log = sample_log()
        log.rows.clear()
        assert len(log) == 5


class TestSerialization:
    """Tests for CSV and JSON forms."""

    def test_csv_header(self) -> None:
        """Test the CSV columns."""
        header = sample_log().to_csv().splitlines()[0]
        assert header == ",".join(CSV_FIELDS)
        assert header == "step,task,split,accuracy,loss,restart"

    def test_missing_loss_is_empty(self) -> None:
        """Test rows without a loss leave the column empty."""
        lines = sample_log().to_csv().splitlines()
        assert lines[4] == "20,net_0/digits,test,0.9,,0"

    def test_csv_round_trip(self) -> None:
        """Test CSV text reads back to the same rows."""
        log = sample_log()
        assert MetricsLog.from_csv(log.to_csv()).rows == log.rows

    def test_json_round_trip(self) -> None:
        """Test JSON keeps rows and snapshot paths."""
        log = sample_log()
        log.record_snapshot(1, "snapshots/phase_1.ntpt", restart=2)
        restored = MetricsLog.from_json(log.to_json())
        assert restored.rows == log.rows
        assert restored.snapshots == {2: {1: "snapshots/phase_1.ntpt"}}

    def test_row_from_csv_strings(self) -> None:
        """Test rows parse the string fields of a CSV record."""
        row = MetricsRow.from_dict(
            {
                "step": "7",
                "task": "math",
                "split": "test",
                "accuracy": "0.5",
                "loss": "",
                "restart": "1",
            }
        )
        assert row == MetricsRow(7, "math", "test", 0.5, None, 1)

    def test_save(self, tmp_path: Path) -> None:
        """Test saving writes both forms."""
        sample_log().save(tmp_path / "run")
        assert (tmp_path / "run" / "metrics.csv").read_text().startswith("step,")
        restored = MetricsLog.from_json((tmp_path / "run" / "metrics.json").read_text())
        assert len(restored) == 5


class TestScalarWriter:
    """Tests for TensorBoard scalar export."""

    def test_writes_event_file(self, tmp_path: Path) -> None:
        """Test rows land in a per-restart event file."""
        writer = ScalarWriter(tmp_path, restart=2)
        for row in sample_log().rows:
            writer.add_row(row)
        writer.close()
        events = list((tmp_path / "restart_2").glob("events.out.tfevents*"))
        assert len(events) == 1
        assert events[0].stat().st_size > 0
