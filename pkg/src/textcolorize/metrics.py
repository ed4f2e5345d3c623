"""Image quality metrics and checkpoint evaluation reports.

PSNR and SSIM operate on 8-bit RGB (or grayscale) arrays; SSIM follows the
classic windowed formulation: 11x11 Gaussian window with sigma 1.5,
K1=0.01, K2=0.03, dynamic range 255, statistics over valid window
positions only, channels averaged.  The perceptual distance is a provider
interface — the stub provider (normalized pixel L1) keeps evaluation fully
offline, a VGG19 feature provider plugs in when a weights file is
supplied.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from scipy.signal import fftconvolve

from .colorspace import from_model_units, lab_to_rgb, rgb_to_lab, to_model_units
from .data import Sample, to_uint8
from .errors import ProviderError, ValidationError
from .models import Generator
from .text import Vocabulary, encode_description
from .vgg import Vgg19Extractor


def _as_float_pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValidationError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for 8-bit images; inf when identical."""
    x, y = _as_float_pair(x, y)
    mse = float(((x - y) ** 2).mean())
    if mse == 0.0:
        return float("inf")
    return 10.0 * math.log10(255.0**2 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


def ssim(
    x: np.ndarray,
    y: np.ndarray,
    *,
    window: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
    data_range: float = 255.0,
) -> float:
    """Mean local structural similarity over valid window positions."""
    x, y = _as_float_pair(x, y)
    if x.ndim == 2:
        x = x[..., None]
        y = y[..., None]
    if x.ndim != 3:
        raise ValidationError(f"expected H x W or H x W x C image, got shape {x.shape}")
    if min(x.shape[0], x.shape[1]) < window:
        raise ValidationError(
            f"image {x.shape[0]}x{x.shape[1]} smaller than the {window}x{window} window"
        )
    w = _gaussian_window(window, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    channel_means = []
    for c in range(x.shape[2]):
        xc, yc = x[..., c], y[..., c]
        mu_x = fftconvolve(xc, w, mode="valid")
        mu_y = fftconvolve(yc, w, mode="valid")
        xx = fftconvolve(xc * xc, w, mode="valid") - mu_x * mu_x
        yy = fftconvolve(yc * yc, w, mode="valid") - mu_y * mu_y
        xy = fftconvolve(xc * yc, w, mode="valid") - mu_x * mu_y
        ssim_map = ((2 * mu_x * mu_y + c1) * (2 * xy + c2)) / (
            (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
        )
        channel_means.append(float(ssim_map.mean()))
    return float(np.mean(channel_means))


class StubDistanceProvider:
    """Normalized pixel-space L1; mirrors what the identity extractor does
    for the perceptual loss.  Always available."""

    name = "stub"

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        x, y = _as_float_pair(x, y)
        return float(np.abs(x / 255.0 - y / 255.0).mean())


class VggFeatureDistanceProvider:
    """Feature-space L1 at one VGG19 stage, normalized by h*w*c.

    Not a calibrated learned-perceptual metric — it has no per-channel
    weighting — but it ranks by deep-feature agreement with the same trunk.
    """

    def __init__(self, weights_path: str | Path, layer: int = 4):
        self.extractor = Vgg19Extractor(weights_path)
        self.layer = layer
        self.name = f"vgg19-l{layer}"

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        x, y = _as_float_pair(x, y)
        if x.ndim != 3 or x.shape[2] != 3:
            raise ValidationError(f"expected H x W x 3 RGB, got {x.shape}")
        tx = torch.from_numpy(x / 255.0).float().permute(2, 0, 1)[None]
        ty = torch.from_numpy(y / 255.0).float().permute(2, 0, 1)[None]
        with torch.no_grad():
            fx = self.extractor.features(tx, self.layer)
            fy = self.extractor.features(ty, self.layer)
        return float((fx - fy).abs().mean())


def get_distance_provider(spec: str | Path):
    """"stub" or a path to VGG19 weights; missing files raise, never a silent zero."""
    if str(spec) == "stub":
        return StubDistanceProvider()
    path = Path(spec)
    if not path.exists():
        raise ProviderError(f"perceptual distance provider missing: no weights at {path}")
    return VggFeatureDistanceProvider(path)


def perceptual_distance(x: np.ndarray, y: np.ndarray, provider) -> float:
    if provider is None:
        raise ProviderError("perceptual distance provider missing")
    return provider.distance(x, y)


@dataclass
class EvalRow:
    id: str
    ssim: float
    psnr: float
    distances: dict[str, float]


@dataclass
class EvalReport:
    model_id: str
    rows: list[EvalRow]
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def sample_count(self) -> int:
        return len(self.rows)

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r.ssim for r in self.rows])) if self.rows else float("nan")

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r.psnr for r in self.rows])) if self.rows else float("nan")

    def mean_distances(self) -> dict[str, float]:
        if not self.rows:
            return {}
        keys = self.rows[0].distances.keys()
        return {k: float(np.mean([r.distances[k] for r in self.rows])) for k in keys}

    def table(self) -> str:
        """Quantitative summary, one row per model: SSIM up, PSNR up, distances down."""
        dists = self.mean_distances()
        header = ["method", "ssim", "psnr_db"] + [f"dist_{k}" for k in dists]
        row = [self.model_id, f"{self.mean_ssim:.4f}", f"{self.mean_psnr:.2f}"]
        row += [f"{v:.4f}" for v in dists.values()]
        lines = ["\t".join(header), "\t".join(row)]
        lines.append(f"# samples={self.sample_count} failures={len(self.failures)}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "sample_count": self.sample_count,
            "mean": {"ssim": self.mean_ssim, "psnr_db": self.mean_psnr,
                     "distances": self.mean_distances()},
            "per_image": [
                {"id": r.id, "ssim": r.ssim, "psnr_db": r.psnr, "distances": r.distances}
                for r in self.rows
            ],
            "failures": [{"id": i, "error": e} for i, e in self.failures],
        }

    def write(self, text_path: str | Path, json_path: str | Path) -> None:
        Path(text_path).write_text(self.table() + "\n", encoding="utf-8")
        Path(json_path).write_text(json.dumps(self.to_dict(), indent=2, allow_nan=True), encoding="utf-8")


def colorize_sample(generator: Generator, vocab: Vocabulary, sample: Sample) -> np.ndarray:
    """Colorize one sample's grayscale channel under its description (uint8 RGB)."""
    m = to_model_units(rgb_to_lab(sample.image))
    l = torch.from_numpy(m.l).float()[None, None]
    emb = torch.from_numpy(encode_description(sample.description, vocab)).float()[None]
    generator.eval()
    with torch.no_grad():
        ab = generator(l, emb)[0].numpy().astype(np.float64)
    predicted = type(m)(l=m.l, ab=np.clip(ab, -1.0, 1.0))
    return to_uint8(lab_to_rgb(from_model_units(predicted)))


def evaluate(
    generator: Generator,
    vocab: Vocabulary,
    samples: list[Sample],
    providers: list | None = None,
    *,
    model_id: str = "model",
) -> EvalReport:
    """Colorize every sample and score against ground truth.

    Per-sample failures are recorded and excluded from the means rather
    than aborting the run.
    """
    if not samples:
        raise ValidationError("evaluation dataset is empty")
    providers = providers if providers is not None else [StubDistanceProvider()]
    report = EvalReport(model_id=model_id, rows=[])
    for sample in samples:
        try:
            predicted = colorize_sample(generator, vocab, sample)
            truth = to_uint8(sample.image)
            row = EvalRow(
                id=sample.id,
                ssim=ssim(predicted, truth),
                psnr=psnr(predicted, truth),
                distances={p.name: p.distance(predicted, truth) for p in providers},
            )
            report.rows.append(row)
        except Exception as exc:  # noqa: BLE001 - per-sample isolation is the contract
            report.failures.append((sample.id, str(exc)))
    return report
