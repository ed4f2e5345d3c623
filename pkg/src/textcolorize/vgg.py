"""Pluggable perceptual feature extractors.

The perceptual loss and the feature-space evaluation distance both consume
an extractor object exposing ``features(images, layer)`` where ``layer``
indexes the convolutional stage (1..5) whose closing activation is
returned.  Two providers:

* ``Vgg19Extractor`` — the standard 16-conv VGG19 trunk.  Weights are
  never bundled; callers supply a state-dict file (a plain features-only
  dict or a full torchvision ``vgg19`` checkpoint both work).  Inputs are
  RGB in [0, 1] and are normalized with the usual ImageNet statistics.
* ``IdentityExtractor`` — returns its input unchanged; with it the
  perceptual loss degenerates to a normalized pixel L1, which is exactly
  what offline tests need.
"""

from __future__ import annotations

from pathlib import Path

import torch
from torch import Tensor, nn

from .errors import ProviderError, ValidationError

# Conv widths per stage; "M" closes a stage with 2x2 max pooling.
_VGG19_LAYOUT = [64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M",
                 512, 512, 512, 512, "M", 512, 512, 512, 512, "M"]

# Index (in the sequential trunk) of the ReLU that closes each conv stage.
_STAGE_END = {1: 3, 2: 8, 3: 17, 4: 26, 5: 35}

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


class IdentityExtractor:
    """Test stub: feature map = the image itself."""

    provider = "identity-stub"
    layers = tuple(_STAGE_END)

    def features(self, images: Tensor, layer: int) -> Tensor:
        if layer not in _STAGE_END:
            raise ValidationError(f"unknown perceptual layer {layer}")
        return images


class Vgg19Extractor(nn.Module):
    provider = "vgg19"
    layers = tuple(_STAGE_END)

    def __init__(self, weights_path: str | Path):
        super().__init__()
        trunk: list[nn.Module] = []
        in_ch = 3
        for item in _VGG19_LAYOUT:
            if item == "M":
                trunk.append(nn.MaxPool2d(2, 2))
            else:
                trunk.append(nn.Conv2d(in_ch, item, 3, padding=1))
                trunk.append(nn.ReLU(inplace=True))
                in_ch = item
        self.trunk = nn.Sequential(*trunk)
        self.register_buffer("mean", torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1))
        self._load_weights(weights_path)
        self.eval()
        self.requires_grad_(False)

    def _load_weights(self, path: str | Path) -> None:
        try:
            state = torch.load(path, map_location="cpu", weights_only=True)
        except Exception as exc:
            raise ProviderError(f"cannot read VGG19 weights from {path}: {exc}") from exc
        if not isinstance(state, dict):
            raise ProviderError(f"{path} does not hold a state dict")
        # accept full torchvision checkpoints by keeping only the trunk
        remapped = {}
        for key, value in state.items():
            if key.startswith("features."):
                remapped[key[len("features."):]] = value
            elif key.startswith("classifier."):
                continue
            else:
                remapped[key] = value
        try:
            self.trunk.load_state_dict(remapped, strict=True)
        except RuntimeError as exc:
            raise ProviderError(f"VGG19 weights at {path} do not match the trunk: {exc}") from exc

    def features(self, images: Tensor, layer: int) -> Tensor:
        """Activation closing conv stage ``layer`` for N x 3 x H x W RGB in [0, 1]."""
        if layer not in _STAGE_END:
            raise ValidationError(f"unknown perceptual layer {layer}")
        if images.dim() != 4 or images.shape[1] != 3:
            raise ValidationError(f"expected N x 3 x H x W images, got {tuple(images.shape)}")
        x = (images - self.mean.to(images.dtype)) / self.std.to(images.dtype)
        end = _STAGE_END[layer]
        for i, module in enumerate(self.trunk):
            x = module(x)
            if i == end:
                return x
        raise AssertionError("unreachable")


def load_extractor(spec: str | Path) -> IdentityExtractor | Vgg19Extractor:
    """Build an extractor from a config value: "stub" or a weights file path."""
    if str(spec) == "stub":
        return IdentityExtractor()
    path = Path(spec)
    if not path.exists():
        raise ProviderError(f"perceptual provider missing: no weights file at {path}")
    return Vgg19Extractor(path)
