"""Configuration module for ntpt."""

from .ntpt_config import (
    DEFAULT_CONFIG,
    ConfigError,
    DataConfig,
    MathConfig,
    NtptConfig,
    OptimizerConfig,
    ScheduleConfig,
    TrainerConfig,
    load_config,
    parse_config,
    to_dict,
    write_config,
)

__all__ = [
    "ConfigError",
    "DataConfig",
    "DEFAULT_CONFIG",
    "MathConfig",
    "NtptConfig",
    "OptimizerConfig",
    "ScheduleConfig",
    "TrainerConfig",
    "load_config",
    "parse_config",
    "to_dict",
    "write_config",
]
