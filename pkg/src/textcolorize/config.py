"""Run configuration: one validated view over file, environment and flags.

Precedence (highest wins): command-line overrides > environment variables
> config file > built-in defaults.  Unknown keys anywhere are rejected.

Config files are JSON mirroring the dataclass tree::

    {
      "run_dir": "runs/demo",
      "iterations": 2000,
      "model": {"image_size": 64, "base_filters": 16},
      "optimizer": {"lr": 1e-4},
      "data": {"synth": {"n": 500, "seed": 1, "image_size": 64}}
    }

Environment variables use the ``TEXTCOLORIZE_`` prefix with ``__``
standing in for nesting, e.g. ``TEXTCOLORIZE_OPTIMIZER__LR=3e-4``.
Command-line overrides use dotted paths (``optimizer.lr=3e-4``).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .losses import LossWeights
from .models import DiscriminatorConfig, GeneratorConfig, RrdbConfig  # noqa: F401  (resolved by name)
from .util import dataclass_from_dict

ENV_PREFIX = "TEXTCOLORIZE_"


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam hyperparameters; zero learning rate is the degenerate no-op."""

    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError("learning rate must be >= 0")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("betas must lie in [0, 1)")


@dataclass(frozen=True)
class SynthSpec:
    n: int = 500
    seed: int = 0
    image_size: int = 64
    test_n: int = 50
    palette_file: str | None = None


@dataclass(frozen=True)
class DataConfig:
    manifest: str | None = None
    synth: SynthSpec | None = None
    image_size: int = 256  # resize target for manifest-backed datasets

    def __post_init__(self):
        if (self.manifest is None) == (self.synth is None):
            raise ConfigError("data config needs exactly one of `manifest` or `synth`")


@dataclass(frozen=True)
class VocabConfig:
    embeddings_file: str | None = None
    fallback_seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    run_dir: str = "runs/default"
    iterations: int = 1000
    batch_size: int = 16
    checkpoint_every: int = 1000
    keep_checkpoints: int = 5
    ablate_text: bool = False
    param_seed: int = 0
    data_seed: int = 0
    val_samples: int = 32
    perceptual: str = "stub"  # "stub" or a path to VGG19 weights
    model: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    data: DataConfig = field(default_factory=lambda: DataConfig(synth=SynthSpec()))
    vocab: VocabConfig = field(default_factory=VocabConfig)

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")


def _set_path(tree: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = tree
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {dotted}: {part} is not a section")
    node[parts[-1]] = value


def _parse_scalar(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def env_overrides(env: Mapping[str, str]) -> dict:
    tree: dict = {}
    for key, value in env.items():
        if not key.startswith(ENV_PREFIX):
            continue
        dotted = key[len(ENV_PREFIX):].lower().replace("__", ".")
        _set_path(tree, dotted, _parse_scalar(value))
    return tree


def _deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_run_config(
    path: str | Path | None = None,
    *,
    env: Mapping[str, str] | None = None,
    overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """Merge file, environment and dotted-path overrides into a RunConfig."""
    tree: dict = {}
    if path is not None:
        try:
            file_tree = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(file_tree, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        tree = file_tree
    tree = _deep_merge(tree, env_overrides(env if env is not None else os.environ))
    if overrides:
        for dotted, value in overrides.items():
            _set_path(tree, dotted, value)
    return dataclass_from_dict(RunConfig, tree)
