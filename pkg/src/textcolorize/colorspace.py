"""sRGB <-> CIELAB conversion and the model-unit normalization contract.

All image math in the pipeline goes through this module: ground-truth RGB
images are converted to LAB, the networks see affinely normalized "model
units" (l in [-1,1], ab in [-1,1]), and predictions come back out through
the inverse maps.  Conversions use sRGB companding with the D65 reference
white.  Out-of-gamut colors (the generator is free to emit chroma with no
sRGB preimage) are clamped after conversion.

NumPy functions here are the canonical, validated API.  ``assemble_rgb``
is the torch twin of the LAB->RGB direction used where gradients must flow
(perceptual loss on assembled color images); a regression test pins the
two paths together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor

from .errors import ValidationError

# sRGB -> XYZ (linear light, D65), IEC 61966-2-1
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)

# D65 reference white, normalized to Y=1 (row sums of the matrix above)
_WHITE = _RGB_TO_XYZ.sum(axis=1)

_DELTA = 6.0 / 29.0


@dataclass(frozen=True)
class LabImage:
    """Planar CIELAB image in physical units.

    L in [0, 100], A and B in [-128, 127]; all planes share one H x W shape.
    """

    L: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        if not (self.L.shape == self.A.shape == self.B.shape):
            raise ValidationError(
                f"LAB planes disagree in shape: {self.L.shape}, {self.A.shape}, {self.B.shape}"
            )
        _check_range(self.L, -1e-6, 100.0 + 1e-6, "L")
        _check_range(self.A, -128.0 - 1e-6, 127.0 + 1e-6, "A")
        _check_range(self.B, -128.0 - 1e-6, 127.0 + 1e-6, "B")

    @property
    def shape(self) -> tuple[int, int]:
        return self.L.shape


@dataclass(frozen=True)
class ModelLab:
    """LAB image in normalized model units: l = L/50 - 1, ab = (A, B)/128.

    ``l`` is H x W in [-1, 1]; ``ab`` is 2 x H x W in [-1, 1].
    """

    l: np.ndarray
    ab: np.ndarray

    def __post_init__(self):
        if self.ab.shape != (2,) + self.l.shape:
            raise ValidationError(
                f"ab shape {self.ab.shape} does not match l shape {self.l.shape}"
            )
        _check_range(self.l, -1.0 - 1e-6, 1.0 + 1e-6, "l")
        _check_range(self.ab, -1.0 - 1e-6, 1.0 + 1e-6, "ab")


def _check_range(arr: np.ndarray, lo: float, hi: float, name: str) -> None:
    bad = (arr < lo) | (arr > hi) | ~np.isfinite(arr)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValidationError(
            f"{name} value {arr[idx]} at index {idx} outside [{lo:g}, {hi:g}]"
        )


def validate_rgb(img: np.ndarray) -> np.ndarray:
    """Check an H x W x 3 sRGB array with channel values in [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValidationError(f"expected H x W x 3 RGB array, got shape {img.shape}")
    _check_range(img, 0.0, 1.0, "rgb")
    return img


def _srgb_companding_inverse(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _srgb_companding(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * np.power(c, 1.0 / 2.4) - 0.055)


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA**3, np.cbrt(t), t / (3.0 * _DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA, t**3, 3.0 * _DELTA**2 * (t - 4.0 / 29.0))


def rgb_to_lab(img: np.ndarray) -> LabImage:
    """Convert an H x W x 3 sRGB image (values in [0, 1]) to CIELAB.

    Raises ValidationError naming the first offending pixel if any value
    falls outside [0, 1].
    """
    img = validate_rgb(img)
    linear = _srgb_companding_inverse(img)
    xyz = linear @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE)
    lum = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    # Guard against -0.0 / tiny negatives from rounding at the black point.
    lum = np.clip(lum, 0.0, 100.0)
    a = np.clip(a, -128.0, 127.0)
    b = np.clip(b, -128.0, 127.0)
    return LabImage(L=lum, A=a, B=b)


def lab_to_rgb(lab: LabImage) -> np.ndarray:
    """Convert a LabImage back to sRGB in [0, 1].

    Exact inverse of :func:`rgb_to_lab` for in-gamut colors; out-of-gamut
    results are clamped channelwise to [0, 1].
    """
    fy = (lab.L + 16.0) / 116.0
    fx = fy + lab.A / 500.0
    fz = fy - lab.B / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _WHITE
    linear = np.clip(xyz @ _XYZ_TO_RGB.T, 0.0, 1.0)
    return np.clip(_srgb_companding(linear), 0.0, 1.0)


def to_model_units(lab: LabImage) -> ModelLab:
    """Affine map from physical LAB to [-1, 1] model units (clamped)."""
    l = np.clip(lab.L / 50.0 - 1.0, -1.0, 1.0)
    ab = np.clip(np.stack([lab.A, lab.B]) / 128.0, -1.0, 1.0)
    return ModelLab(l=l, ab=ab)


def from_model_units(m: ModelLab) -> LabImage:
    """Inverse affine map from model units back to physical LAB."""
    lum = np.clip((m.l + 1.0) * 50.0, 0.0, 100.0)
    a = np.clip(m.ab[0] * 128.0, -128.0, 127.0)
    b = np.clip(m.ab[1] * 128.0, -128.0, 127.0)
    return LabImage(L=lum, A=a, B=b)


def assemble_rgb(l: Tensor, ab: Tensor) -> Tensor:
    """Differentiable model-units -> sRGB assembly for N x 1|2 x H x W tensors.

    ``l`` is N x 1 x H x W in [-1, 1], ``ab`` is N x 2 x H x W in [-1, 1];
    returns N x 3 x H x W sRGB in [0, 1].  Matches the NumPy path
    ``lab_to_rgb(from_model_units(...))`` to float precision but keeps the
    autograd graph intact so the perceptual loss can reach the generator.
    """
    if l.dim() != 4 or l.shape[1] != 1:
        raise ValidationError(f"expected l of shape N x 1 x H x W, got {tuple(l.shape)}")
    if ab.dim() != 4 or ab.shape[1] != 2 or ab.shape[0] != l.shape[0] or ab.shape[2:] != l.shape[2:]:
        raise ValidationError(
            f"ab shape {tuple(ab.shape)} incompatible with l shape {tuple(l.shape)}"
        )
    lum = (l[:, 0] + 1.0) * 50.0
    a = ab[:, 0] * 128.0
    b = ab[:, 1] * 128.0

    fy = (lum + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0

    def f_inv(t: Tensor) -> Tensor:
        return torch.where(t > _DELTA, t**3, 3.0 * _DELTA**2 * (t - 4.0 / 29.0))

    white = torch.as_tensor(_WHITE, dtype=l.dtype, device=l.device)
    xyz = torch.stack([f_inv(fx), f_inv(fy), f_inv(fz)], dim=1) * white.view(1, 3, 1, 1)
    m_inv = torch.as_tensor(_XYZ_TO_RGB, dtype=l.dtype, device=l.device)
    linear = torch.einsum("rc,nchw->nrhw", m_inv, xyz).clamp(0.0, 1.0)
    srgb = torch.where(
        linear <= 0.0031308,
        12.92 * linear,
        1.055 * linear.clamp(min=1e-8) ** (1.0 / 2.4) - 0.055,
    )
    return srgb.clamp(0.0, 1.0)
