"""TensorBoard scalar export of metrics rows."""

from __future__ import annotations

import logging
import time
from pathlib import Path

from tensorboard.compat.proto.event_pb2 import Event
from tensorboard.compat.proto.summary_pb2 import Summary
from tensorboard.summary.writer.event_file_writer import EventFileWriter

from .metrics import MetricsRow

logger = logging.getLogger(__name__)


class ScalarWriter:
    """Writes metrics rows as TensorBoard scalars.

    Each row becomes ``{split}/{task}/accuracy`` and, when it has a loss,
    ``{split}/{task}/loss`` at the row's step. Restarts get their own
    subdirectory.
    """

    def __init__(self, log_dir: str | Path, restart: int = 0) -> None:
        self.log_dir = Path(log_dir) / f"restart_{restart}"
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self._writer = EventFileWriter(str(self.log_dir))
        logger.info("writing TensorBoard scalars to %s", self.log_dir)

    def add_scalar(self, tag: str, value: float, step: int) -> None:
        """Append one scalar event."""
        summary = Summary(value=[Summary.Value(tag=tag, simple_value=float(value))])
        self._writer.add_event(Event(wall_time=time.time(), step=step, summary=summary))

    def add_row(self, row: MetricsRow) -> None:
        """Mirror a metrics row."""
        prefix = f"{row.split}/{row.task}"
        self.add_scalar(f"{prefix}/accuracy", row.accuracy, row.step)
        if row.loss is not None:
            self.add_scalar(f"{prefix}/loss", row.loss, row.step)

    def flush(self) -> None:
        """Flush pending events to disk."""
        self._writer.flush()

    def close(self) -> None:
        """Flush and close the event file."""
        self._writer.close()
