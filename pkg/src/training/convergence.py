"""Convergence detection on validation-accuracy series.

Differentiable interpreters tend to sit at low accuracy and then jump to a
correct program within a few evaluations; a run counts as converged when
that jump is seen.
"""

from collections.abc import Sequence


def detect_convergence(
    accuracies: Sequence[float],
    jump: float = 0.4,
    level: float = 0.9,
    window: int = 5,
) -> bool:
    """Whether accuracy jumped by ``jump`` to above ``level`` within ``window`` evals.

    Args:
        accuracies: Validation accuracies in evaluation order.
        jump: Minimum absolute rise.
        level: Accuracy the rise must end above.
        window: Number of consecutive evaluations the rise must fit in.

    Returns:
        False for fewer than two evaluations.
    """
    return convergence_index(accuracies, jump, level, window) is not None


def convergence_index(
    accuracies: Sequence[float],
    jump: float = 0.4,
    level: float = 0.9,
    window: int = 5,
) -> int | None:
    """Index of the first evaluation completing a convergence jump, or None."""
    for end in range(1, len(accuracies)):
        if accuracies[end] <= level:
            continue
        start = max(0, end - window + 1)
        if accuracies[end] - min(accuracies[start:end]) >= jump:
            return end
    return None
