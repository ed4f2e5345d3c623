"""Training losses: pixel L1, adversarial BCE terms, perceptual term, total.

All functions take and return torch tensors so gradients flow wherever the
inputs carry them.  The discriminator's scalar (patch-averaged) logit is
what enters the BCE terms; per-batch reduction is the mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor

from .errors import ValidationError


@dataclass(frozen=True)
class LossWeights:
    """Weights of the generator objective and the perceptual layer index."""

    lambda_adv: float = 1.0
    lambda_perceptual: float = 1.0
    lambda_l1: float = 1.0
    perceptual_layer: int = 4

    def __post_init__(self):
        weights = (self.lambda_adv, self.lambda_perceptual, self.lambda_l1)
        if any(w < 0 for w in weights):
            raise ValidationError("loss weights must be nonnegative")
        if not any(w > 0 for w in weights):
            raise ValidationError("at least one loss weight must be positive")


def l1_loss(estimate: Tensor, target: Tensor) -> Tensor:
    """Mean absolute difference over all elements."""
    if estimate.shape != target.shape:
        raise ValidationError(
            f"shape mismatch: {tuple(estimate.shape)} vs {tuple(target.shape)}"
        )
    return (estimate - target).abs().mean()


def bce_with_logit(logit: Tensor, label: float) -> Tensor:
    """Binary cross entropy on raw logits, stabilized via the log-sum-exp form.

    ``logit`` may be a scalar or a batch of per-sample logits (mean
    reduction).  ``label`` is 0 or 1.
    """
    if label not in (0, 1, 0.0, 1.0):
        raise ValidationError(f"label must be 0 or 1, got {label}")
    logit = torch.as_tensor(logit)
    # -[y log s(x) + (1-y) log s(-x)] = max(x,0) - x*y + log(1 + exp(-|x|))
    loss = logit.clamp(min=0) - logit * label + torch.log1p(torch.exp(-logit.abs()))
    return loss.mean()


def adv_generator_loss(d_logit_fake: Tensor) -> Tensor:
    """Generator wants fakes scored as real."""
    return bce_with_logit(d_logit_fake, 1)


def adv_discriminator_loss(d_logit_real: Tensor, d_logit_fake: Tensor) -> Tensor:
    """Real stacks labeled 1 plus fake stacks labeled 0."""
    return bce_with_logit(d_logit_real, 1) + bce_with_logit(d_logit_fake, 0)


def perceptual_loss(estimate_img: Tensor, target_img: Tensor, extractor, layer: int) -> Tensor:
    """Feature-space L1 between assembled color images, normalized by h*w*c.

    Inputs are the full assembled images (grayscale + chroma already
    converted to RGB), not raw chroma planes.  With the identity stub this
    equals the mean absolute pixel difference.
    """
    if estimate_img.shape != target_img.shape:
        raise ValidationError(
            f"shape mismatch: {tuple(estimate_img.shape)} vs {tuple(target_img.shape)}"
        )
    feats_e = extractor.features(estimate_img, layer)
    feats_t = extractor.features(target_img, layer)
    return (feats_e - feats_t).abs().mean()


def total_generator_loss(adv: Tensor, perceptual: Tensor, l1: Tensor, w: LossWeights) -> Tensor:
    """Weighted sum of the three generator terms."""
    return w.lambda_adv * adv + w.lambda_perceptual * perceptual + w.lambda_l1 * l1
