"""Run configuration for ntpt.

This module centralizes every tunable default of the trainer, the task data
and the models. Configurations are frozen dataclasses; files are JSON with
the same nesting as the dataclasses.
"""

from __future__ import annotations

import json
import re
import types
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any


class ConfigError(Exception):
    """Raised for invalid configuration values or files.

    Attributes:
        key: Dotted path of the offending key, if known.
        line: Line number in the configuration file, if known.
    """

    def __init__(
        self, message: str, key: str | None = None, line: int | None = None
    ) -> None:
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


OPTIMIZER_KINDS = ("sgd", "rmsprop", "adam")
SYMBOL_SOURCES = ("synthetic", "mnist_idx")
PERCEPTIONS = ("neural", "oracle")
REDUCTIONS = ("mean", "sum")


@dataclass(frozen=True)
class OptimizerConfig:
    """Optimizer and learning-rate groups.

    Interpreter parameters (program logits) and perceptual parameters
    (library networks) are updated with separate rates.
    """

    kind: str = "adam"
    interpreter_rate: float = 1e-3
    perceptual_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rho: float = 0.9  # RMSProp decay

    def __post_init__(self) -> None:
        """Validate the optimizer kind and the rate ordering."""
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigError(
                f"unknown optimizer {self.kind!r}, expected one of {OPTIMIZER_KINDS}",
                key="optimizer.kind",
            )
        if self.interpreter_rate <= 0 or self.perceptual_rate < 0:
            raise ConfigError("learning rates must be positive", key="optimizer")
        if self.perceptual_rate > self.interpreter_rate:
            raise ConfigError(
                "perceptual_rate must not exceed interpreter_rate",
                key="optimizer.perceptual_rate",
            )

    @property
    def rates(self) -> dict[str, float]:
        """Learning rate per parameter group."""
        return {
            "interpreter": self.interpreter_rate,
            "perceptual": self.perceptual_rate,
        }


@dataclass(frozen=True)
class DataConfig:
    """Symbol images and example pools."""

    symbol_source: str = "synthetic"
    glyphs_per_class: int = 200
    test_glyphs_per_class: int = 100
    pool_cap: int | None = None  # distinct training examples per task
    data_dir: str | None = None  # IDX directory; falls back to NTPT_DATA_DIR

    def __post_init__(self) -> None:
        """Validate the source and pool sizes."""
        if self.symbol_source not in SYMBOL_SOURCES:
            raise ConfigError(
                f"unknown symbol source {self.symbol_source!r}",
                key="data.symbol_source",
            )
        if self.glyphs_per_class < 1 or self.test_glyphs_per_class < 1:
            raise ConfigError("glyph counts must be positive", key="data")
        if self.pool_cap is not None and self.pool_cap < 1:
            raise ConfigError("pool_cap must be positive", key="data.pool_cap")


@dataclass(frozen=True)
class ScheduleConfig:
    """Lifelong task schedule.

    With ``phases`` unset, one phase per 2x2 task is generated, giving
    ``current_weight`` to the new task and the rest uniformly to earlier ones.
    Explicit phases are lists of ``{"steps": n, "weights": {task: p}}``.
    """

    phase_steps: int = 2500
    current_weight: float = 0.8
    phases: tuple[dict[str, Any], ...] | None = None

    def __post_init__(self) -> None:
        """Validate the generated-schedule settings."""
        if self.phase_steps < 1:
            raise ConfigError("phase_steps must be positive", key="schedule")
        if not 0.0 < self.current_weight <= 1.0:
            raise ConfigError(
                "current_weight must be in (0, 1]", key="schedule.current_weight"
            )


@dataclass(frozen=True)
class TrainerConfig:
    """Training loop, evaluation cadence and convergence detection."""

    batch_size: int = 32
    eval_every: int = 500
    eval_size: int = 1000
    loss_reduction: str = "mean"
    init_scale: float = 0.1
    perception: str = "neural"

    # Convergence: a rise of convergence_jump within convergence_window
    # evaluations, ending above convergence_level.
    convergence_jump: float = 0.4
    convergence_level: float = 0.9
    convergence_window: int = 5

    restarts: int = 1
    jobs: int = 1
    single_task_steps: int = 20000

    def __post_init__(self) -> None:
        """Validate sizes and enumerations."""
        for name in ("batch_size", "eval_every", "eval_size", "restarts", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError("must be positive", key=f"trainer.{name}")
        if self.loss_reduction not in REDUCTIONS:
            raise ConfigError(
                f"unknown reduction {self.loss_reduction!r}",
                key="trainer.loss_reduction",
            )
        if self.perception not in PERCEPTIONS:
            raise ConfigError(
                f"unknown perception {self.perception!r}", key="trainer.perception"
            )
        if self.convergence_window < 2:
            raise ConfigError(
                "convergence_window must be at least 2",
                key="trainer.convergence_window",
            )


@dataclass(frozen=True)
class MathConfig:
    """Block machine training and the length-generalization sweep."""

    num_blocks: int = 2
    num_registers: int = 2
    train_digits: int = 2
    eval_lengths: tuple[int, ...] = tuple(range(1, 17))
    steps: int = 20000
    perception: str = "oracle"
    eval_examples: int = 500

    def __post_init__(self) -> None:
        """Validate block and register counts, digits and lengths."""
        if not 1 <= self.num_blocks <= 4:
            raise ConfigError("num_blocks must be in 1..4", key="math.num_blocks")
        if not 1 <= self.num_registers <= 4:
            raise ConfigError(
                "num_registers must be in 1..4", key="math.num_registers"
            )
        if self.train_digits < 1:
            raise ConfigError("train_digits must be positive", key="math")
        if not self.eval_lengths or min(self.eval_lengths) < 1:
            raise ConfigError(
                "eval_lengths must be positive digit counts", key="math.eval_lengths"
            )
        if self.perception not in PERCEPTIONS:
            raise ConfigError(
                f"unknown perception {self.perception!r}", key="math.perception"
            )


@dataclass(frozen=True)
class NtptConfig:
    """Complete run configuration. ``seed`` drives all randomness."""

    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    data: DataConfig = field(default_factory=DataConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    math: MathConfig = field(default_factory=MathConfig)
    seed: int = 0
    tensorboard_dir: str | None = None


# Default configuration instance
DEFAULT_CONFIG = NtptConfig()


# ---------------------------------------------------------------------------
# JSON files
# ---------------------------------------------------------------------------


def to_dict(config: NtptConfig) -> dict[str, Any]:
    """Plain JSON-compatible form with every value explicit."""
    return json.loads(json.dumps(asdict(config)))


def write_config(config: NtptConfig, path: str | Path) -> None:
    """Write ``config`` as JSON."""
    Path(path).write_text(json.dumps(to_dict(config), indent=2) + "\n")


def _line_of(text: str, key: str) -> int | None:
    match = re.search(rf'"{re.escape(key)}"\s*:', text)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1


def _fail(message: str, key: str, text: str) -> ConfigError:
    return ConfigError(message, key, _line_of(text, key.split(".")[-1]))


def _coerce(value: Any, hint: Any, key: str, text: str) -> Any:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (types.UnionType, typing.Union):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], key, text)
    if is_dataclass(hint):
        if not isinstance(value, dict):
            raise _fail("expected an object", key, text)
        return _build(hint, value, key, text)
    if origin is tuple:
        if not isinstance(value, list):
            raise _fail("expected a list", key, text)
        return tuple(value)
    if hint is str and not isinstance(value, str):
        raise _fail(f"expected a string, got {value!r}", key, text)
    if hint is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise _fail(f"expected an integer, got {value!r}", key, text)
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise _fail(f"expected a number, got {value!r}", key, text)
        return float(value)
    return value


def _build(cls: type, data: dict[str, Any], prefix: str, text: str) -> Any:
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for name, value in data.items():
        path = f"{prefix}.{name}" if prefix else name
        if name not in known:
            raise _fail("unknown key", path, text)
        kwargs[name] = _coerce(value, hints[name], path, text)
    try:
        return cls(**kwargs)
    except ConfigError as e:
        if e.line is not None or e.key is None:
            raise
        message = str(e).split(": ", 1)[-1]
        raise _fail(message, e.key, text) from e


def parse_config(text: str) -> NtptConfig:
    """Parse a JSON configuration; missing keys take their defaults.

    Raises:
        ConfigError: On malformed JSON (with line and column), unknown keys
            (with their dotted path and line) or invalid values.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"malformed JSON at column {e.colno}: {e.msg}", line=e.lineno
        ) from e
    if not isinstance(data, dict):
        raise ConfigError("the configuration must be a JSON object", line=1)
    return _build(NtptConfig, data, "", text)


def load_config(path: str | Path | None = None) -> NtptConfig:
    """Load a configuration file, or the defaults when ``path`` is None.

    Raises:
        ConfigError: If the file is invalid.
        OSError: If the file cannot be read.
    """
    if path is None:
        return DEFAULT_CONFIG
    return parse_config(Path(path).read_text())
