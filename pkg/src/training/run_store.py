"""Run directories: what ``ntpt train`` writes and later commands read.

Layout::

    resolved_config.json   every setting, schedule phases included
    run.json               kind of run, best restart, restart outcomes
    metrics.csv            all restarts (also metrics.json)
    library.ntpt           library of the best restart
    listings.json          extracted programs of the best restart
    programs.json          exact program logits of the best restart
    [restart_<i>/]snapshots/phase_<k>.ntpt and phase_<k>_programs.json
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from configs import NtptConfig, load_config, write_config
from src.neural import Library, LibraryFormatError
from src.terpret import ProgramListing

from .metrics import MetricsLog
from .restarts import RestartSummary

logger = logging.getLogger(__name__)

CONFIG_FILE = "resolved_config.json"
RUN_FILE = "run.json"
LIBRARY_FILE = "library.ntpt"
LISTINGS_FILE = "listings.json"
PROGRAMS_FILE = "programs.json"


class RunKind(Enum):
    """What a run trained."""

    LIFELONG = "lifelong"
    SINGLE = "single"
    MATH = "math"


@dataclass
class RunRecord:
    """A run directory loaded back into memory.

    Attributes:
        directory: Where the run lives.
        config: Its resolved configuration.
        kind: What was trained.
        log: Metrics of every restart.
        listings: Extracted program per task of the best restart.
        programs: Exact logits per task of the best restart.
        best_restart: Index of the best restart (None if all failed).
        restarts: Per-restart outcome summaries.
    """

    directory: Path
    config: NtptConfig
    kind: RunKind
    log: MetricsLog
    listings: dict[str, ProgramListing]
    programs: dict[str, dict[str, Any]]
    best_restart: int | None
    restarts: list[dict[str, Any]] = field(default_factory=list)

    @property
    def library_path(self) -> Path:
        """Where the best restart's library is stored."""
        return self.directory / LIBRARY_FILE

    def library(self) -> Library | None:
        """The stored library, or None if the run had none.

        Raises:
            LibraryFormatError: If the file is corrupt.
        """
        if not self.library_path.exists():
            return None
        return Library.load(self.library_path)

    def snapshot_dir(self, restart: int = 0) -> Path:
        """Snapshot directory of a restart."""
        if len(self.restarts) > 1:
            return self.directory / f"restart_{restart}" / "snapshots"
        return self.directory / "snapshots"

    def snapshot_paths(self) -> list[Path]:
        """Library snapshots of every restart, in path order."""
        restarts = [r["restart"] for r in self.restarts] or [0]
        paths: list[Path] = []
        for restart in restarts:
            directory = self.snapshot_dir(restart)
            if directory.is_dir():
                paths.extend(sorted(directory.glob("phase_*.ntpt")))
        return paths

    def verify_snapshots(self) -> int:
        """Parse every library snapshot and return how many there are.

        Raises:
            LibraryFormatError: Naming the first corrupt snapshot.
        """
        paths = self.snapshot_paths()
        for path in paths:
            try:
                Library.load(path)
            except LibraryFormatError as e:
                raise LibraryFormatError(f"snapshot {path}: {e}") from e
        logger.debug("%d library snapshots verified", len(paths))
        return len(paths)


def resolve_config(config: NtptConfig, phases: list[dict] | None) -> NtptConfig:
    """Configuration with the schedule that actually ran made explicit."""
    if phases is None:
        return config
    schedule = dataclasses.replace(config.schedule, phases=tuple(phases))
    return dataclasses.replace(config, schedule=schedule)


def write_run(
    directory: str | Path,
    config: NtptConfig,
    summary: RestartSummary,
    kind: RunKind,
    phases: list[dict] | None = None,
) -> Path:
    """Write a finished run.

    Args:
        directory: Output directory (created if needed).
        config: Configuration the run used.
        summary: Outcomes of every restart.
        kind: What was trained.
        phases: Schedule phases that ran, recorded in the resolved config.

    Returns:
        The run directory.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_config(resolve_config(config, phases), directory / CONFIG_FILE)
    summary.merged_log().save(directory)

    best = summary.best
    run = {
        "kind": kind.value,
        "best_restart": None if best is None else best.restart,
        "restarts": [
            {
                "restart": o.restart,
                "converged": o.converged,
                "solved": o.solved,
                "score": o.score,
                "error": o.error,
            }
            for o in summary.outcomes
        ],
    }
    (directory / RUN_FILE).write_text(json.dumps(run, indent=2) + "\n")
    if best is not None:
        if best.library is not None:
            (directory / LIBRARY_FILE).write_bytes(best.library)
        (directory / LISTINGS_FILE).write_text(json.dumps(best.listings, indent=2))
        (directory / PROGRAMS_FILE).write_text(json.dumps(best.programs))
    logger.info("run written to %s", directory)
    return directory


def load_run(directory: str | Path) -> RunRecord:
    """Read a run directory.

    Raises:
        OSError: If a required file is missing or unreadable.
        ConfigError: If the resolved configuration is invalid.
    """
    directory = Path(directory)
    config = load_config(directory / CONFIG_FILE)
    run = json.loads((directory / RUN_FILE).read_text())
    log = MetricsLog.from_csv((directory / "metrics.csv").read_text())
    listings: dict[str, ProgramListing] = {}
    programs: dict[str, dict[str, Any]] = {}
    if (directory / LISTINGS_FILE).exists():
        raw = json.loads((directory / LISTINGS_FILE).read_text())
        listings = {k: ProgramListing.from_dict(v) for k, v in raw.items()}
        programs = json.loads((directory / PROGRAMS_FILE).read_text())
    return RunRecord(
        directory=directory,
        config=config,
        kind=RunKind(run["kind"]),
        log=log,
        listings=listings,
        programs=programs,
        best_restart=run.get("best_restart"),
        restarts=run.get("restarts", []),
    )
