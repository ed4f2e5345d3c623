"""Shared single-image colorization pipeline used by the CLI and service.

decode -> resize -> LAB -> grayscale channel -> encode description ->
generator (eval) -> reassemble LAB -> RGB.  Deterministic for fixed
(checkpoint, image, description).
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .colorspace import ModelLab, from_model_units, lab_to_rgb, rgb_to_lab, to_model_units
from .data import resize_rgb, to_uint8
from .errors import ValidationError
from .models import Generator, GeneratorConfig, load_checkpoint
from .text import Vocabulary, encode_description, fallback_vocabulary

log = logging.getLogger(__name__)


@dataclass
class InferenceModel:
    generator: Generator
    vocab: Vocabulary
    config: GeneratorConfig
    path: str
    id: str


def checkpoint_id(path: str | Path) -> str:
    """Stable short id for a checkpoint file path (idempotent re-registration)."""
    return hashlib.sha256(str(Path(path).resolve()).encode()).hexdigest()[:12]


def load_inference_model(path: str | Path) -> InferenceModel:
    ckpt = load_checkpoint(path)
    vocab = ckpt.vocab
    if vocab is None:
        log.warning("checkpoint %s carries no vocabulary; all tokens map to zero", path)
        vocab = fallback_vocabulary(set(), seed=0)
    ckpt.generator.eval()
    return InferenceModel(
        generator=ckpt.generator,
        vocab=vocab,
        config=ckpt.generator_config,
        path=str(path),
        id=checkpoint_id(path),
    )


def colorize_rgb(model: InferenceModel, rgb: np.ndarray, description: str) -> np.ndarray:
    """Colorize an H x W x 3 image in [0, 1]; returns uint8 RGB at model size."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValidationError(f"expected H x W x 3 image, got shape {rgb.shape}")
    rgb = resize_rgb(rgb, model.config.image_size)
    m = to_model_units(rgb_to_lab(rgb))
    l = torch.from_numpy(m.l).float()[None, None]
    emb = torch.from_numpy(encode_description(description, model.vocab)).float()[None]
    with torch.no_grad():
        ab = model.generator(l, emb)[0].numpy().astype(np.float64)
    assembled = ModelLab(l=m.l, ab=np.clip(ab, -1.0, 1.0))
    return to_uint8(lab_to_rgb(from_model_units(assembled)))
