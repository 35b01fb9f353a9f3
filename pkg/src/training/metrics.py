"""Training metrics for replay and analysis.

This module records accuracy and loss rows during training so runs can be
compared, plotted by external tools, and checked against snapshots.
"""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Any

CSV_FIELDS = ("step", "task", "split", "accuracy", "loss", "restart")


class Split(Enum):
    """What a metrics row measures."""

    TRAIN = "train"  # running average over training batches
    TEST = "test"  # held-out examples, differentiable execution
    DISCRETE = "discrete"  # held-out examples, extracted program


@dataclass(frozen=True)
class MetricsRow:
    """One measurement.

    Attributes:
        step: Training step after which the measurement was taken.
        task: Task name, or ``net_k/...`` for direct classifier accuracy.
        split: What was measured.
        accuracy: Fraction correct.
        loss: Mean loss, or None where no loss applies.
        restart: Restart index.
    """

    step: int
    task: str
    split: str
    accuracy: float
    loss: float | None
    restart: int = 0

    def to_dict(self) -> dict[str, Any]:
        """Convert row to dictionary for serialization."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MetricsRow:
        """Create row from dictionary (CSV strings are accepted)."""
        loss = data.get("loss")
        return cls(
            step=int(data["step"]),
            task=str(data["task"]),
            split=str(data["split"]),
            accuracy=float(data["accuracy"]),
            loss=None if loss in (None, "") else float(loss),
            restart=int(data.get("restart", 0)),
        )


class MetricsLog:
    """Append-only log of metrics rows.

    Steps never decrease within a restart.

    Attributes:
        rows: Recorded rows in order.
        snapshots: Phase index to library snapshot path, per restart.
    """

    def __init__(self) -> None:
        """Initialize an empty log."""
        self._rows: list[MetricsRow] = []
        self._last_step: dict[int, int] = {}
        self.snapshots: dict[int, dict[int, str]] = {}

    @property
    def rows(self) -> list[MetricsRow]:
        """Get all recorded rows."""
        return self._rows.copy()

    def log(self, row: MetricsRow) -> None:
        """Record a row.

        Raises:
            ValueError: If ``row.step`` precedes an earlier row of its restart.
        """
        last = self._last_step.get(row.restart)
        if last is not None and row.step < last:
            raise ValueError(
                f"Step {row.step} precedes step {last} in restart {row.restart}"
            )
        self._last_step[row.restart] = row.step
        self._rows.append(row)

    def log_eval(
        self,
        step: int,
        task: str,
        accuracy: float,
        loss: float | None = None,
        split: Split = Split.TEST,
        restart: int = 0,
    ) -> MetricsRow:
        """Record a measurement and return its row."""
        row = MetricsRow(step, task, split.value, accuracy, loss, restart)
        self.log(row)
        return row

    def record_snapshot(self, phase: int, path: str | Path, restart: int = 0) -> None:
        """Remember where the library snapshot of a phase was written."""
        self.snapshots.setdefault(restart, {})[phase] = str(path)

    def select(
        self,
        task: str | None = None,
        split: Split | str | None = None,
        restart: int | None = None,
    ) -> list[MetricsRow]:
        """Rows matching every given filter."""
        split_value = split.value if isinstance(split, Split) else split
        return [
            r
            for r in self._rows
            if (task is None or r.task == task)
            and (split_value is None or r.split == split_value)
            and (restart is None or r.restart == restart)
        ]

    def series(
        self, task: str, split: Split | str = Split.TEST, restart: int = 0
    ) -> list[tuple[int, float]]:
        """(step, accuracy) pairs of one task in step order."""
        return [(r.step, r.accuracy) for r in self.select(task, split, restart)]

    def tasks(self) -> list[str]:
        """Task names in order of first appearance."""
        return list(dict.fromkeys(r.task for r in self._rows))

    def restarts(self) -> list[int]:
        """Restart indices present in the log."""
        return sorted({r.restart for r in self._rows})

    @classmethod
    def merge(cls, logs: Iterable[MetricsLog]) -> MetricsLog:
        """Concatenate logs of independent restarts."""
        merged = cls()
        for log in logs:
            for row in log._rows:
                merged.log(row)
            for restart, paths in log.snapshots.items():
                merged.snapshots.setdefault(restart, {}).update(paths)
        return merged

    # -------------------------------------------------------------------------
    # Serialization
    # -------------------------------------------------------------------------

    def to_csv(self) -> str:
        """Rows as CSV with header ``step,task,split,accuracy,loss,restart``."""
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in self._rows:
            data = row.to_dict()
            data["accuracy"] = repr(row.accuracy)
            data["loss"] = "" if row.loss is None else repr(row.loss)
            writer.writerow(data)
        return buffer.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> MetricsLog:
        """Create a log from CSV text."""
        log = cls()
        for data in csv.DictReader(io.StringIO(text)):
            log.log(MetricsRow.from_dict(data))
        return log

    def to_json(self, indent: int | None = 2) -> str:
        """Serialize rows and snapshot paths to JSON."""
        return json.dumps(
            {
                "rows": [r.to_dict() for r in self._rows],
                "snapshots": {
                    str(restart): {str(k): v for k, v in paths.items()}
                    for restart, paths in self.snapshots.items()
                },
            },
            indent=indent,
        )

    @classmethod
    def from_json(cls, json_str: str) -> MetricsLog:
        """Create a log from JSON text."""
        data = json.loads(json_str)
        log = cls()
        for row in data.get("rows", []):
            log.log(MetricsRow.from_dict(row))
        for restart, paths in data.get("snapshots", {}).items():
            for phase, path in paths.items():
                log.record_snapshot(int(phase), path, int(restart))
        return log

    def save(self, directory: str | Path) -> None:
        """Write ``metrics.csv`` and ``metrics.json`` into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "metrics.csv").write_text(self.to_csv())
        (directory / "metrics.json").write_text(self.to_json())

    def __len__(self) -> int:
        """Return number of logged rows."""
        return len(self._rows)
