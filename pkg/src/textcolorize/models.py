"""Generator and patch discriminator architectures plus checkpoint I/O.

The generator has two pathways.  The image pathway contracts the grayscale
channel through stride-2 convolutions (two 3x3 conv blocks per resolution,
batch norm + ReLU) down to a bottleneck at 1/4 resolution.  The text
pathway lifts the 256-d description vector through two bias-free fully
connected layers to one value per bottleneck pixel, and the resulting
field multiplies every channel of the bottleneck features.  A
residual-in-residual dense block refines the fused features before a
transposed-conv decoder with skip concatenations from matching encoder
resolutions emits the two chroma channels through a 1x1 conv + tanh head.

The discriminator scores 3-channel (grayscale + chroma) stacks patchwise:
three 4x4 conv blocks with filter counts F, 2F, 4F and strides 2, 2, 1,
then a single-filter 4x4 conv; its scalar output is the mean of the patch
response map.

Keeping the text path free of bias terms makes the zero embedding act as a
true "no conditioning" switch: the fused bottleneck features vanish and
the decoder works from skip connections alone.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch
from torch import Tensor, nn

from .errors import CheckpointError, ConfigError, ValidationError
from .text import EMBEDDING_DIM, Vocabulary
from .util import atomic_write_bytes, dataclass_from_dict

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class RrdbConfig:
    """Residual-in-residual dense block shape.

    ``beta`` scales every residual branch; 0 is allowed as the degenerate
    value that turns the block into the identity (used to verify the
    residual wiring).
    """

    num_rdb: int = 3
    convs_per_rdb: int = 5
    growth_channels: int = 32
    beta: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must be in [0, 1], got {self.beta}")
        if self.num_rdb < 1 or self.convs_per_rdb < 2 or self.growth_channels < 1:
            raise ConfigError("rrdb block counts must be positive (>=2 convs per block)")


@dataclass(frozen=True)
class GeneratorConfig:
    image_size: int = 256
    base_filters: int = 64
    kernel_size: int = 3
    encoder_levels: int = 3
    text_dim: int = EMBEDDING_DIM
    rrdb: RrdbConfig = field(default_factory=RrdbConfig)
    output_channels: int = 2

    def __post_init__(self):
        if self.encoder_levels < 2:
            raise ConfigError("need at least two encoder levels")
        down = self.downsamples
        if self.image_size % (1 << down) != 0 or self.bottleneck_size < 1:
            raise ConfigError(
                f"image_size {self.image_size} not divisible into {down} halvings"
            )
        if self.base_filters % (1 << down) != 0:
            raise ConfigError("base_filters must halve cleanly across decoder levels")
        if self.kernel_size % 2 != 1:
            raise ConfigError("kernel_size must be odd")

    @property
    def downsamples(self) -> int:
        return self.encoder_levels - 1

    @property
    def bottleneck_size(self) -> int:
        return self.image_size >> self.downsamples

    @property
    def text_fc_sizes(self) -> tuple[int, int]:
        return (self.text_dim, self.bottleneck_size * self.bottleneck_size)

    @property
    def fusion_shape(self) -> tuple[int, int, int]:
        return (1, self.bottleneck_size, self.bottleneck_size)

    @property
    def decoder_filters(self) -> tuple[int, ...]:
        return tuple(self.base_filters >> i for i in range(self.downsamples))


@dataclass(frozen=True)
class DiscriminatorConfig:
    in_channels: int = 3
    base_filters: int = 64
    kernel_size: int = 4
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.in_channels < 1 or self.base_filters < 1:
            raise ConfigError("channel counts must be positive")

    @property
    def block_filters(self) -> tuple[int, int, int]:
        return (self.base_filters, self.base_filters * 2, self.base_filters * 4)

    @property
    def block_strides(self) -> tuple[int, int, int]:
        return (2, 2, 1)

    def patch_map_size(self, input_size: int) -> int:
        """Spatial size of the patch response map for a square input."""
        s = input_size
        for stride in self.block_strides + (1,):
            s = (s - self.kernel_size + 2) // stride + 1
        if s < 1:
            raise ConfigError(
                f"input size {input_size} too small for kernel {self.kernel_size}"
            )
        return s


def conv_block(in_ch: int, out_ch: int, kernel: int, stride: int = 1) -> nn.Sequential:
    """3x3-style conv -> batch norm -> ReLU used on both generator paths."""
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel, stride=stride, padding=kernel // 2),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


class DenseBlock(nn.Module):
    """Densely connected convs; each conv sees the concat of all earlier maps.

    Every conv is followed by batch norm and leaky ReLU.  The output of the
    last conv (back at ``channels`` width) is scaled by beta and added to
    the block input.
    """

    def __init__(self, channels: int, cfg: RrdbConfig):
        super().__init__()
        self.beta = cfg.beta
        self.convs = nn.ModuleList()
        width = channels
        for i in range(cfg.convs_per_rdb):
            out = channels if i == cfg.convs_per_rdb - 1 else cfg.growth_channels
            self.convs.append(
                nn.Sequential(
                    nn.Conv2d(width, out, 3, 1, 1),
                    nn.BatchNorm2d(out),
                    nn.LeakyReLU(0.2, inplace=True),
                )
            )
            width += out if i < cfg.convs_per_rdb - 1 else 0

    def forward(self, x: Tensor) -> Tensor:
        feats = [x]
        for conv in self.convs[:-1]:
            feats.append(conv(torch.cat(feats, dim=1)))
        out = self.convs[-1](torch.cat(feats, dim=1))
        return x + self.beta * out


class Rrdb(nn.Module):
    """Stack of dense blocks with an outer beta-scaled residual connection."""

    def __init__(self, channels: int, cfg: RrdbConfig):
        super().__init__()
        self.beta = cfg.beta
        self.blocks = nn.ModuleList(DenseBlock(channels, cfg) for _ in range(cfg.num_rdb))

    def forward(self, x: Tensor) -> Tensor:
        out = x
        for block in self.blocks:
            out = block(out)
        return x + self.beta * out


class Generator(nn.Module):
    def __init__(self, cfg: GeneratorConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or GeneratorConfig()
        c, k = cfg.base_filters, cfg.kernel_size

        self.encoder_levels = nn.ModuleList()
        self.downs = nn.ModuleList()
        in_ch = 1
        for level in range(cfg.encoder_levels):
            self.encoder_levels.append(
                nn.Sequential(conv_block(in_ch, c, k), conv_block(c, c, k))
            )
            in_ch = c
            if level < cfg.downsamples:
                self.downs.append(conv_block(c, c, k, stride=2))

        fc_in, fc_out = cfg.text_fc_sizes
        self.text_fc = nn.Sequential(
            nn.Linear(fc_in, fc_in, bias=False),
            nn.ReLU(inplace=True),
            nn.Linear(fc_in, fc_out, bias=False),
        )

        self.rrdb = Rrdb(c, cfg.rrdb)

        self.ups = nn.ModuleList()
        self.decoder_levels = nn.ModuleList()
        prev = c
        skip_channels = c
        for filters in cfg.decoder_filters:
            self.ups.append(
                nn.Sequential(
                    nn.ConvTranspose2d(prev, filters, 4, stride=2, padding=1),
                    nn.BatchNorm2d(filters),
                    nn.ReLU(inplace=True),
                )
            )
            self.decoder_levels.append(
                nn.Sequential(
                    conv_block(filters + skip_channels, filters, k),
                    conv_block(filters, filters, k),
                )
            )
            prev = filters

        self.head = nn.Conv2d(prev, cfg.output_channels, kernel_size=1)

    def forward(self, l: Tensor, s: Tensor) -> Tensor:
        """Map (N x 1 x S x S grayscale, N x text_dim embedding) -> N x 2 x S x S chroma."""
        cfg = self.cfg
        if l.dim() != 4 or l.shape[1] != 1:
            raise ValidationError(f"expected l of shape N x 1 x S x S, got {tuple(l.shape)}")
        if l.shape[2] != cfg.image_size or l.shape[3] != cfg.image_size:
            raise ValidationError(
                f"expected spatial size {cfg.image_size}, got {tuple(l.shape[2:])}"
            )
        if s.dim() != 2 or s.shape[1] != cfg.text_dim or s.shape[0] != l.shape[0]:
            raise ValidationError(
                f"expected embedding of shape {l.shape[0]} x {cfg.text_dim}, got {tuple(s.shape)}"
            )

        skips = []
        x = l
        for level in range(cfg.encoder_levels):
            x = self.encoder_levels[level](x)
            if level < cfg.downsamples:
                skips.append(x)
                x = self.downs[level](x)

        b = cfg.bottleneck_size
        text_field = self.text_fc(s).view(-1, 1, b, b)
        x = x * text_field  # broadcast over all feature channels

        x = self.rrdb(x)

        for up, level, skip in zip(self.ups, self.decoder_levels, reversed(skips)):
            x = up(x)
            x = level(torch.cat([x, skip], dim=1))

        return torch.tanh(self.head(x))


class Discriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or DiscriminatorConfig()
        k = cfg.kernel_size
        layers: list[nn.Module] = []
        in_ch = cfg.in_channels
        for filters, stride in zip(cfg.block_filters, cfg.block_strides):
            layers += [
                nn.Conv2d(in_ch, filters, k, stride=stride, padding=1),
                nn.BatchNorm2d(filters),
                nn.LeakyReLU(cfg.leaky_slope, inplace=True),
            ]
            in_ch = filters
        self.blocks = nn.Sequential(*layers)
        self.response = nn.Conv2d(in_ch, 1, k, stride=1, padding=1)

    def forward(self, l: Tensor, ab: Tensor) -> tuple[Tensor, Tensor]:
        """Score an (l, ab) stack; returns (per-sample mean logit, patch map)."""
        if l.dim() != 4 or ab.dim() != 4 or l.shape[1] + ab.shape[1] != self.cfg.in_channels:
            raise ValidationError(
                f"expected stacked channels {self.cfg.in_channels}, got l {tuple(l.shape)} ab {tuple(ab.shape)}"
            )
        if l.shape[0] != ab.shape[0] or l.shape[2:] != ab.shape[2:]:
            raise ValidationError(
                f"l {tuple(l.shape)} and ab {tuple(ab.shape)} do not stack"
            )
        self.cfg.patch_map_size(l.shape[2])  # reject inputs too small for the stack
        patch_map = self.response(self.blocks(torch.cat([l, ab], dim=1)))
        return patch_map.mean(dim=(1, 2, 3)), patch_map


def init_parameters(module: nn.Module, seed: int) -> nn.Module:
    """Deterministically initialize parameters in place.

    Convs and linears get fan-in scaled uniform weights (and biases); norm
    layers get unit gain, zero shift and reset running statistics.  The
    draw order follows module construction order, so the same (config,
    seed) pair always yields bitwise-identical parameters.
    """
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
                bound = 1.0 / math.sqrt(fan_in)
                m.weight.uniform_(-bound, bound, generator=gen)
                if m.bias is not None:
                    m.bias.uniform_(-bound, bound, generator=gen)
            elif isinstance(m, nn.Linear):
                bound = 1.0 / math.sqrt(m.in_features)
                m.weight.uniform_(-bound, bound, generator=gen)
                if m.bias is not None:
                    m.bias.uniform_(-bound, bound, generator=gen)
            elif isinstance(m, nn.BatchNorm2d):
                m.weight.fill_(1.0)
                m.bias.zero_()
                m.running_mean.zero_()
                m.running_var.fill_(1.0)
                m.num_batches_tracked.zero_()
    return module


def build_generator(cfg: GeneratorConfig | None = None, seed: int = 0) -> Generator:
    return init_parameters(Generator(cfg), seed)


def build_discriminator(cfg: DiscriminatorConfig | None = None, seed: int = 0) -> Discriminator:
    return init_parameters(Discriminator(cfg), seed)


def _vocab_payload(vocab: Vocabulary) -> dict[str, Any]:
    tokens = [t for t, _ in sorted(vocab.index.items(), key=lambda kv: kv[1])]
    return {"source": vocab.source, "tokens": tokens, "table": torch.from_numpy(vocab.table.copy())}


def _vocab_from_payload(payload: dict[str, Any]) -> Vocabulary:
    table = payload["table"].numpy().astype(np.float64)
    return Vocabulary(
        index={t: i for i, t in enumerate(payload["tokens"])},
        table=table,
        source=payload["source"],
    )


def save_checkpoint(
    path: str | Path,
    *,
    generator: Generator,
    vocab: Vocabulary | None = None,
    discriminator: Discriminator | None = None,
    trainer_state: dict[str, Any] | None = None,
) -> None:
    """Write a versioned checkpoint (config echo + named parameter tensors).

    The write is atomic (temp file then rename) so a crash never leaves a
    truncated checkpoint in place of a good one.
    """
    payload: dict[str, Any] = {
        "format_version": CHECKPOINT_VERSION,
        "generator": {"config": asdict(generator.cfg), "state": generator.state_dict()},
    }
    if vocab is not None:
        payload["vocab"] = _vocab_payload(vocab)
    if discriminator is not None:
        payload["discriminator"] = {
            "config": asdict(discriminator.cfg),
            "state": discriminator.state_dict(),
        }
    if trainer_state is not None:
        payload["trainer"] = trainer_state
    atomic_write_bytes(path, lambda tmp: torch.save(payload, tmp))


@dataclass
class Checkpoint:
    generator: Generator
    generator_config: GeneratorConfig
    vocab: Vocabulary | None
    discriminator: Discriminator | None
    discriminator_config: DiscriminatorConfig | None
    trainer_state: dict[str, Any] | None


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Load and validate a checkpoint; raises CheckpointError on any defect."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointError(f"{path} is not a checkpoint file")
    version = payload["format_version"]
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {version} unsupported (expected {CHECKPOINT_VERSION})"
        )
    try:
        gen_cfg = dataclass_from_dict(GeneratorConfig, payload["generator"]["config"], "generator.config")
        generator = Generator(gen_cfg)
        generator.load_state_dict(payload["generator"]["state"], strict=True)
    except (KeyError, ConfigError, RuntimeError) as exc:
        raise CheckpointError(f"generator section of {path} is invalid: {exc}") from exc
    generator.eval()

    vocab = _vocab_from_payload(payload["vocab"]) if "vocab" in payload else None

    discriminator = None
    disc_cfg = None
    if "discriminator" in payload:
        try:
            disc_cfg = dataclass_from_dict(
                DiscriminatorConfig, payload["discriminator"]["config"], "discriminator.config"
            )
            discriminator = Discriminator(disc_cfg)
            discriminator.load_state_dict(payload["discriminator"]["state"], strict=True)
        except (KeyError, ConfigError, RuntimeError) as exc:
            raise CheckpointError(f"discriminator section of {path} is invalid: {exc}") from exc

    return Checkpoint(
        generator=generator,
        generator_config=gen_cfg,
        vocab=vocab,
        discriminator=discriminator,
        discriminator_config=disc_cfg,
        trainer_state=payload.get("trainer"),
    )
