"""Independent restarts of an experiment, optionally in worker processes.

Each restart reseeds programs, networks and batches from ``(seed, restart)``
and shares nothing with the others; logs are merged after all have finished.
"""

from __future__ import annotations

import dataclasses
import logging
import multiprocessing
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

from configs import MathConfig
from src.neural import Library

from .convergence import detect_convergence
from .math_training import MATH_NETS, train_math
from .metrics import MetricsLog, Split
from .trainer import NumericalError, RunConfig, program_state, train_lifelong

logger = logging.getLogger(__name__)


@dataclass
class RestartOutcome:
    """What one restart sends back to the parent process.

    Attributes:
        restart: Restart index.
        log: Its metrics rows.
        library: Serialized library (None under oracle perception).
        listings: Extracted program per task, as plain dicts.
        programs: Exact logits and listing per task.
        converged: Whether every task showed a convergence jump.
        solved: Whether every task ended above the convergence level, jump
            or not.
        score: Ranking key of restarts (higher is better).
        error: Diagnostic of a numerical failure that aborted the restart.
    """

    restart: int
    log: MetricsLog
    library: bytes | None = None
    listings: dict[str, dict[str, Any]] = field(default_factory=dict)
    programs: dict[str, dict[str, Any]] = field(default_factory=dict)
    converged: bool = False
    solved: bool = False
    score: float = 0.0
    error: str | None = None

    @property
    def failed(self) -> bool:
        """Whether the restart was aborted."""
        return self.error is not None


@dataclass
class RestartSummary:
    """All restarts of an experiment."""

    outcomes: list[RestartOutcome]

    @property
    def converged(self) -> list[RestartOutcome]:
        """Converged restarts in index order."""
        return [o for o in self.outcomes if o.converged]

    @property
    def convergence_count(self) -> int:
        """Number of converged restarts."""
        return len(self.converged)

    @property
    def best(self) -> RestartOutcome | None:
        """Highest-scoring restart that finished (lowest index on ties)."""
        finished = [o for o in self.outcomes if not o.failed]
        if not finished:
            return None
        return max(finished, key=lambda o: (o.score, -o.restart))

    @property
    def failures(self) -> list[RestartOutcome]:
        """Restarts aborted by numerical errors."""
        return [o for o in self.outcomes if o.failed]

    def merged_log(self) -> MetricsLog:
        """Metrics of every restart in one log."""
        return MetricsLog.merge(o.log for o in self.outcomes)


def _final_accuracies(
    log: MetricsLog, tasks: Sequence[str], restart: int
) -> list[float]:
    return [log.series(t, Split.TEST, restart)[-1][1] for t in tasks]


def task_flags(
    log: MetricsLog, tasks: Sequence[str], config: RunConfig
) -> tuple[bool, bool]:
    """Whether every task converged, and whether every task ends above the level.

    A task that is already accurate at its first evaluation (transfer through
    trained networks) is solved but shows no jump, so it does not converge.
    """
    if not tasks:
        return False, False
    converged = solved = True
    for task in tasks:
        accuracies = [a for _, a in log.series(task, Split.TEST, config.restart)]
        converged &= detect_convergence(
            accuracies,
            config.convergence_jump,
            config.convergence_level,
            config.convergence_window,
        )
        solved &= bool(accuracies) and accuracies[-1] > config.convergence_level
    return converged, solved


def lifelong_outcome(config: RunConfig, library: bytes | None) -> RestartOutcome:
    """Run one lifelong restart and package its results."""
    start = Library.from_bytes(library) if library is not None else None
    result = train_lifelong(config, start)
    tasks = list(result.listings)
    finals = _final_accuracies(result.log, tasks, config.restart)
    converged, solved = task_flags(result.log, tasks, config)
    return RestartOutcome(
        restart=config.restart,
        log=result.log,
        library=result.library.to_bytes() if len(result.library) else None,
        listings={k: v.to_dict() for k, v in result.listings.items()},
        programs=result.programs(),
        converged=converged,
        solved=solved,
        score=sum(finals) / len(finals) if finals else 0.0,
    )


def math_outcome(
    config: RunConfig, math: MathConfig, library: bytes | None
) -> RestartOutcome:
    """Run one block-machine restart and package its results."""
    start = Library.from_bytes(library) if library is not None else None
    result = train_math(config, math, start)
    discrete = result.log.select("math", Split.DISCRETE, config.restart)
    score = discrete[-1].accuracy if discrete else 0.0
    return RestartOutcome(
        restart=config.restart,
        log=result.log,
        library=None if result.library is None else result.library.to_bytes(),
        listings={"math": result.listing.to_dict()},
        programs={"math": program_state(result.machine, MATH_NETS)},
        converged=result.converged,
        solved=score > config.convergence_level,
        score=score,
    )


def _run_one(
    args: tuple[RunConfig, MathConfig | None, bytes | None],
) -> RestartOutcome:
    config, math, library = args
    try:
        if math is not None:
            return math_outcome(config, math, library)
        return lifelong_outcome(config, library)
    except NumericalError as e:
        logger.warning("restart %d aborted: %s", config.restart, e)
        return RestartOutcome(restart=config.restart, log=MetricsLog(), error=str(e))


def run_restarts(
    config: RunConfig,
    n: int,
    jobs: int = 1,
    math: MathConfig | None = None,
    library: Library | None = None,
) -> RestartSummary:
    """Run ``n`` isolated restarts, at most ``jobs`` at a time.

    Args:
        config: Settings shared by all restarts (``restart`` is replaced).
        n: Number of restarts.
        jobs: Worker processes; 1 runs everything in this process.
        math: Train the block machine with these settings instead of the
            lifelong 2x2 schedule.
        library: Library every restart starts from (copied per restart).

    Raises:
        ValueError: If ``n`` or ``jobs`` is not positive.
    """
    if n < 1:
        raise ValueError(f"Need at least one restart, got {n}")
    if jobs < 1:
        raise ValueError(f"Need at least one job, got {jobs}")
    config = dataclasses.replace(config, restarts=n)
    payload = library.to_bytes() if library is not None else None
    work = [(config.for_restart(i), math, payload) for i in range(n)]

    if jobs == 1 or n == 1:
        outcomes = [_run_one(w) for w in work]
    else:
        with multiprocessing.Pool(min(jobs, n)) as pool:
            outcomes = list(pool.imap(_run_one, work))

    summary = RestartSummary(outcomes)
    logger.info(
        "%d/%d restarts converged, %d failed",
        summary.convergence_count,
        n,
        len(summary.failures),
    )
    return summary
