"""Tests for run configuration files."""

import json
from pathlib import Path

import pytest

from configs import (
    DEFAULT_CONFIG,
    ConfigError,
    DataConfig,
    MathConfig,
    OptimizerConfig,
    ScheduleConfig,
    TrainerConfig,
    load_config,
    parse_config,
    to_dict,
    write_config,
)


class TestDefaults:
    """Tests for the reference configuration."""

    def test_values(self) -> None:
        """Test the documented defaults."""
        assert DEFAULT_CONFIG.optimizer.kind == "adam"
        assert DEFAULT_CONFIG.optimizer.rates == {
            "interpreter": 1e-3,
            "perceptual": 1e-5,
        }
        assert DEFAULT_CONFIG.math.num_blocks == 2
        assert DEFAULT_CONFIG.math.num_registers == 2
        assert DEFAULT_CONFIG.math.eval_lengths == tuple(range(1, 17))
        assert DEFAULT_CONFIG.schedule.phases is None

    def test_round_trip(self, tmp_path: Path) -> None:
        """Test writing and loading the defaults changes nothing."""
        path = tmp_path / "config.json"
        write_config(DEFAULT_CONFIG, path)
        assert load_config(path) == DEFAULT_CONFIG

    def test_every_value_explicit(self) -> None:
        """Test the dict form lists every field of every section."""
        data = to_dict(DEFAULT_CONFIG)
        assert set(data) == {
            "optimizer",
            "data",
            "schedule",
            "trainer",
            "math",
            "seed",
            "tensorboard_dir",
        }
        assert data["trainer"]["convergence_window"] == 5

    def test_no_path(self) -> None:
        """Test loading without a file gives the defaults."""
        assert load_config() is DEFAULT_CONFIG


class TestParse:
    """Tests for parse_config."""

    def test_partial(self) -> None:
        """Test missing keys take their defaults."""
        config = parse_config('{"seed": 7, "trainer": {"batch_size": 8}}')
        assert config.seed == 7
        assert config.trainer.batch_size == 8
        assert config.trainer.eval_every == DEFAULT_CONFIG.trainer.eval_every

    def test_int_accepted_as_float(self) -> None:
        """Test integral numbers are accepted for float settings."""
        config = parse_config('{"trainer": {"init_scale": 1}}')
        assert config.trainer.init_scale == 1.0
        assert isinstance(config.trainer.init_scale, float)

    def test_explicit_phases(self) -> None:
        """Test explicit schedule phases are kept."""
        phases = [{"steps": 10, "weights": {"add2x2:top": 1.0}}]
        config = parse_config(json.dumps({"schedule": {"phases": phases}}))
        assert config.schedule.phases == tuple(phases)

    def test_unknown_key(self) -> None:
        """Test an unknown key reports its dotted path and line."""
        text = '{\n  "math": {\n    "num_block": 2\n  }\n}'
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.key == "math.num_block"
        assert info.value.line == 3

    def test_unknown_section(self) -> None:
        """Test unknown top-level keys are rejected."""
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config('{"optimiser": {}}')

    def test_malformed_json(self) -> None:
        """Test syntax errors report their line."""
        with pytest.raises(ConfigError, match="malformed JSON") as info:
            parse_config('{\n  "seed": 1,\n  "trainer": {,}\n}')
        assert info.value.line == 3

    def test_not_an_object(self) -> None:
        """Test the top level must be an object."""
        with pytest.raises(ConfigError, match="JSON object"):
            parse_config("[1, 2]")

    @pytest.mark.parametrize(
        ("text", "key"),
        [
            ('{"seed": "one"}', "seed"),
            ('{"seed": true}', "seed"),
            ('{"trainer": {"init_scale": "big"}}', "trainer.init_scale"),
            ('{"trainer": 3}', "trainer"),
            ('{"math": {"eval_lengths": 4}}', "math.eval_lengths"),
            ('{"optimizer": {"kind": 1}}', "optimizer.kind"),
        ],
    )
    def test_wrong_types(self, text: str, key: str) -> None:
        """Test values of the wrong type name their key."""
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.key == key

    def test_invalid_value_gets_line(self) -> None:
        """Test validation errors inside a section carry the file line."""
        text = '{\n  "optimizer": {\n    "kind": "lbfgs"\n  }\n}'
        with pytest.raises(ConfigError, match="unknown optimizer") as info:
            parse_config(text)
        assert info.value.key == "optimizer.kind"
        assert info.value.line == 3

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test a missing file is an OS error, not a configuration error."""
        with pytest.raises(OSError):
            load_config(tmp_path / "absent.json")


class TestValidation:
    """Tests for section validation."""

    def test_optimizer(self) -> None:
        """Test optimizer kinds and rate ordering."""
        with pytest.raises(ConfigError, match="unknown optimizer"):
            OptimizerConfig(kind="lbfgs")
        with pytest.raises(ConfigError, match="must not exceed"):
            OptimizerConfig(interpreter_rate=1e-4, perceptual_rate=1e-3)
        with pytest.raises(ConfigError, match="positive"):
            OptimizerConfig(interpreter_rate=0.0)

    def test_data(self) -> None:
        """Test symbol sources and pool sizes."""
        with pytest.raises(ConfigError, match="symbol source"):
            DataConfig(symbol_source="emnist")
        with pytest.raises(ConfigError, match="pool_cap"):
            DataConfig(pool_cap=0)
        with pytest.raises(ConfigError):
            DataConfig(glyphs_per_class=0)

    def test_schedule(self) -> None:
        """Test generated-schedule settings."""
        with pytest.raises(ConfigError):
            ScheduleConfig(phase_steps=0)
        with pytest.raises(ConfigError, match="current_weight"):
            ScheduleConfig(current_weight=1.5)

    def test_trainer(self) -> None:
        """Test trainer sizes and enumerations."""
        with pytest.raises(ConfigError) as info:
            TrainerConfig(eval_every=0)
        assert info.value.key == "trainer.eval_every"
        with pytest.raises(ConfigError, match="reduction"):
            TrainerConfig(loss_reduction="max")
        with pytest.raises(ConfigError, match="perception"):
            TrainerConfig(perception="human")
        with pytest.raises(ConfigError, match="convergence_window"):
            TrainerConfig(convergence_window=1)

    def test_math(self) -> None:
        """Test block and register counts and evaluation lengths."""
        with pytest.raises(ConfigError, match="1..4"):
            MathConfig(num_blocks=5)
        with pytest.raises(ConfigError) as info:
            MathConfig(num_registers=0)
        assert info.value.key == "math.num_registers"
        assert MathConfig(num_blocks=1, num_registers=4).num_registers == 4
        with pytest.raises(ConfigError, match="eval_lengths"):
            MathConfig(eval_lengths=(0, 1))
        with pytest.raises(ConfigError, match="eval_lengths"):
            MathConfig(eval_lengths=())

    def test_error_message(self) -> None:
        """Test key and line prefix the message."""
        error = ConfigError("unknown key", key="math.x", line=4)
        assert str(error) == "key 'math.x', line 4: unknown key"
        assert str(ConfigError("plain")) == "plain"
