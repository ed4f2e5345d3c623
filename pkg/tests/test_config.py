import json

import pytest

from textcolorize.config import (
    DataConfig,
    OptimizerConfig,
    RunConfig,
    SynthSpec,
    load_run_config,
)
from textcolorize.errors import ConfigError


class TestOptimizerConfig:
    def test_defaults(self):
        cfg = OptimizerConfig()
        assert cfg.lr == 1e-4
        assert cfg.beta1 == 0.5
        assert cfg.beta2 == 0.999
        assert cfg.weight_decay == 0.0

    def test_invalid(self):
        with pytest.raises(ConfigError):
            OptimizerConfig(lr=-1)
        with pytest.raises(ConfigError):
            OptimizerConfig(beta1=1.0)


class TestRunConfig:
    def test_file_only(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text(json.dumps({
            "run_dir": "runs/x",
            "iterations": 50,
            "model": {"image_size": 32, "base_filters": 8, "rrdb": {"growth_channels": 4}},
            "data": {"synth": {"n": 10, "image_size": 32}},
        }))
        cfg = load_run_config(f, env={})
        assert cfg.iterations == 50
        assert cfg.model.image_size == 32
        assert cfg.data.synth.n == 10

    def test_unknown_key_rejected_with_name(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text(json.dumps({"iterations": 5, "mystery": 1}))
        with pytest.raises(ConfigError, match="mystery"):
            load_run_config(f, env={})

    def test_nested_unknown_key(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text(json.dumps({"optimizer": {"lr": 0.1, "momentum": 0.9}}))
        with pytest.raises(ConfigError, match="momentum"):
            load_run_config(f, env={})

    def test_env_overrides_file(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text(json.dumps({"iterations": 5}))
        cfg = load_run_config(f, env={"TEXTCOLORIZE_ITERATIONS": "9"})
        assert cfg.iterations == 9

    def test_flag_overrides_env(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text(json.dumps({"optimizer": {"lr": 0.001}}))
        cfg = load_run_config(
            f,
            env={"TEXTCOLORIZE_OPTIMIZER__LR": "0.01"},
            overrides={"optimizer.lr": 0.1},
        )
        assert cfg.optimizer.lr == 0.1

    def test_env_nested_path(self):
        cfg = load_run_config(None, env={"TEXTCOLORIZE_OPTIMIZER__LR": "3e-3"})
        assert cfg.optimizer.lr == 3e-3

    def test_defaults_without_any_source(self):
        cfg = load_run_config(None, env={})
        assert cfg.batch_size == 16
        assert cfg.checkpoint_every == 1000
        assert cfg.loss.lambda_l1 == 1.0

    def test_data_config_exclusivity(self):
        with pytest.raises(ConfigError):
            DataConfig(manifest="m.json", synth=SynthSpec())
        with pytest.raises(ConfigError):
            DataConfig()

    def test_validation_bounds(self):
        with pytest.raises(ConfigError):
            RunConfig(iterations=0)
        with pytest.raises(ConfigError):
            RunConfig(batch_size=0)
