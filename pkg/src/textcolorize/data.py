"""Dataset records, manifest-driven loaders, the synthetic shapes corpus,
and batch assembly.

On-disk datasets are described by a JSON manifest so the loaders never
assume a directory layout.  Schema::

    {
      "name": "birds-mini",
      "kind": "plain" | "birds" | "ncd" | "coco",
      "root": "relative/or/absolute/base/for/record/paths",
      "records": [
        {"id": "...", "image": "img/001.png", "split": "train"|"test",
         "description": "...",            # plain / birds: inline text
         "description_file": "d/001.txt", # plain / birds: text file
         "class_label": "tomato",         # ncd: mapped through the color table
         "captions": ["...", "..."],      # coco: filtered by the color lexicon
         "captions_file": "c/001.txt"}    # coco: one caption per line
      ]
    }

Train and test records must be disjoint by id.  Missing or unreadable
files are collected per record into a :class:`LoadReport` instead of
aborting the whole load.

The synthetic corpus draws one filled shape (circle, square or triangle)
per sample on a neutral gray background and captions it "a <color>
<shape>".  The default palette (resources/shape_palette.txt) holds five
fills that share CIELAB lightness L=60, so the grayscale channel never
betrays the color — text conditioning is the only reliable signal.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Iterator

import numpy as np
import torch
from PIL import Image

from . import colorspace as cs
from .errors import DataError, ValidationError
from .text import Vocabulary, encode_description, extract_color_sentences, ncd_color_table

log = logging.getLogger(__name__)

SHAPES = ("circle", "square", "triangle")
BACKGROUND_GRAY = 0.777778  # CIELAB L=80 neutral gray

MANIFEST_KINDS = ("plain", "birds", "ncd", "coco")


@dataclass
class Sample:
    image: np.ndarray  # H x W x 3 sRGB in [0, 1]
    description: str
    id: str
    split: str
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    image: str
    split: str
    description: str | None = None
    description_file: str | None = None
    class_label: str | None = None
    captions: tuple[str, ...] | None = None
    captions_file: str | None = None

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise DataError(f"record {self.id}: split must be train or test, got {self.split!r}")


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    kind: str
    root: str
    records: tuple[ManifestRecord, ...]

    def __post_init__(self):
        if self.kind not in MANIFEST_KINDS:
            raise DataError(f"unknown dataset kind {self.kind!r} (expected one of {MANIFEST_KINDS})")
        seen: dict[str, str] = {}
        for rec in self.records:
            if rec.id in seen:
                raise DataError(f"duplicate record id {rec.id!r} (splits {seen[rec.id]}/{rec.split})")
            seen[rec.id] = rec.split

    def split_counts(self) -> dict[str, int]:
        counts = {"train": 0, "test": 0}
        for rec in self.records:
            counts[rec.split] += 1
        return counts


_RECORD_KEYS = {"id", "image", "split", "description", "description_file",
                "class_label", "captions", "captions_file"}


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    unknown = set(raw) - {"name", "kind", "root", "records"}
    if unknown:
        raise DataError(f"{path}: unknown manifest key(s): {', '.join(sorted(unknown))}")
    records = []
    for i, rec in enumerate(raw.get("records", [])):
        bad = set(rec) - _RECORD_KEYS
        if bad:
            raise DataError(f"{path}: record {i}: unknown key(s): {', '.join(sorted(bad))}")
        if "captions" in rec:
            rec = dict(rec, captions=tuple(rec["captions"]))
        try:
            records.append(ManifestRecord(**rec))
        except TypeError as exc:
            raise DataError(f"{path}: record {i}: {exc}") from exc
    root = raw.get("root", ".")
    if not Path(root).is_absolute():
        root = str(path.parent / root)
    return DatasetManifest(
        name=raw.get("name", path.stem),
        kind=raw.get("kind", "plain"),
        root=root,
        records=tuple(records),
    )


@dataclass
class LoadReport:
    loaded: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)

    def __str__(self) -> str:
        msg = f"{self.loaded} samples loaded, {len(self.errors)} record error(s)"
        for rec_id, err in self.errors[:10]:
            msg += f"\n  {rec_id}: {err}"
        return msg


def _resolve_description(rec: ManifestRecord, kind: str, root: Path,
                         lexicon: frozenset[str], color_table: dict[str, str]) -> str:
    if kind == "ncd":
        if not rec.class_label:
            raise DataError("ncd record has no class_label")
        color = color_table.get(rec.class_label.lower())
        if color is None:
            raise DataError(f"class {rec.class_label!r} missing from the color table")
        return color
    if kind == "coco":
        captions = list(rec.captions) if rec.captions is not None else None
        if captions is None and rec.captions_file:
            captions = [ln.strip() for ln in (root / rec.captions_file).read_text(encoding="utf-8").splitlines() if ln.strip()]
        if captions is None:
            raise DataError("coco record has neither captions nor captions_file")
        return extract_color_sentences(captions, lexicon)
    # plain / birds: inline text preferred, file fallback
    if rec.description is not None:
        return rec.description
    if rec.description_file:
        return (root / rec.description_file).read_text(encoding="utf-8").strip()
    raise DataError("record has neither description nor description_file")


def load_dataset(
    manifest: DatasetManifest,
    *,
    lexicon: frozenset[str] | None = None,
    color_table: dict[str, str] | None = None,
    image_size: int = 256,
) -> tuple[list[Sample], LoadReport]:
    """Materialize manifest records into Samples, resizing to image_size.

    Per-record failures (missing files, undecodable images, unmappable
    class labels) are collected in the report; good records still load.
    """
    from .text import default_color_lexicon

    lexicon = lexicon if lexicon is not None else default_color_lexicon()
    color_table = color_table if color_table is not None else ncd_color_table()
    root = Path(manifest.root)
    samples: list[Sample] = []
    report = LoadReport()
    for rec in manifest.records:
        try:
            description = _resolve_description(rec, manifest.kind, root, lexicon, color_table)
            rgb = load_png(root / rec.image)
            rgb = resize_rgb(rgb, image_size)
            samples.append(Sample(image=rgb, description=description, id=rec.id, split=rec.split))
        except (OSError, DataError, ValidationError) as exc:
            report.errors.append((rec.id, str(exc)))
    report.loaded = len(samples)
    return samples, report


def default_shape_palette() -> dict[str, tuple[float, float, float]]:
    raw = importlib_resources.files("textcolorize.resources").joinpath("shape_palette.txt").read_text()
    palette = {}
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, r, g, b = line.split()
        palette[word] = (float(r), float(g), float(b))
    return palette


def load_palette(path: str | Path) -> dict[str, tuple[float, float, float]]:
    """Parse a `word r g b` palette file."""
    palette = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected `word r g b`")
            palette[parts[0].lower()] = tuple(float(v) for v in parts[1:])
    if not palette:
        raise DataError(f"{path}: empty palette")
    return palette


def _shape_mask(shape: str, size: int, cy: float, cx: float, radius: float) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    if shape == "circle":
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
    if shape == "square":
        return (np.abs(yy - cy) <= radius) & (np.abs(xx - cx) <= radius)
    if shape == "triangle":
        # upright isoceles: apex at cy - radius, base at cy + radius
        rel = (yy - (cy - radius)) / (2.0 * radius)
        half_width = np.clip(rel, 0.0, 1.0) * radius
        return (rel >= 0) & (rel <= 1) & (np.abs(xx - cx) <= half_width)
    raise ValidationError(f"unknown shape {shape!r}")


def synth_generate(
    n: int,
    seed: int,
    palette: dict[str, tuple[float, float, float]] | None = None,
    *,
    image_size: int = 64,
    split: str = "train",
) -> list[Sample]:
    """Deterministic corpus of captioned colored shapes on gray background.

    Each sample's metadata carries the fill color word, the shape name and
    the boolean foreground mask used by region-level evaluation.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    palette = palette if palette is not None else default_shape_palette()
    if not palette:
        raise ValidationError("palette must not be empty")
    words = sorted(palette)
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        color = words[int(rng.integers(len(words)))]
        shape = SHAPES[int(rng.integers(len(SHAPES)))]
        radius = float(rng.uniform(0.18, 0.32) * image_size)
        margin = radius + 1
        cy = float(rng.uniform(margin, image_size - margin))
        cx = float(rng.uniform(margin, image_size - margin))
        mask = _shape_mask(shape, image_size, cy, cx, radius)
        img = np.full((image_size, image_size, 3), BACKGROUND_GRAY)
        img[mask] = palette[color]
        samples.append(
            Sample(
                image=img,
                description=f"a {color} {shape}",
                id=f"synth-{seed}-{i:05d}",
                split=split,
                metadata={"color": color, "shape": shape, "mask": mask},
            )
        )
    return samples


@dataclass
class EncodedDataset:
    """Model-unit tensors for a list of samples, in sample order."""

    l: torch.Tensor  # N x 1 x H x W
    ab: torch.Tensor  # N x 2 x H x W
    embeddings: torch.Tensor  # N x 256
    ids: tuple[str, ...]

    def __len__(self) -> int:
        return self.l.shape[0]


def encode_samples(samples: list[Sample], vocab: Vocabulary) -> EncodedDataset:
    """Convert RGB + description into normalized network inputs."""
    if not samples:
        raise DataError("no samples to encode")
    ls, abs_, embs, ids = [], [], [], []
    for sample in samples:
        m = cs.to_model_units(cs.rgb_to_lab(sample.image))
        ls.append(torch.from_numpy(m.l).float()[None])
        abs_.append(torch.from_numpy(m.ab).float())
        embs.append(torch.from_numpy(encode_description(sample.description, vocab)).float())
        ids.append(sample.id)
    return EncodedDataset(
        l=torch.stack(ls), ab=torch.stack(abs_), embeddings=torch.stack(embs), ids=tuple(ids)
    )


def iter_batches(
    encoded: EncodedDataset, batch_size: int, seed
) -> Iterator[tuple[torch.Tensor, torch.Tensor, torch.Tensor]]:
    """One shuffled pass over an encoded dataset; the short tail batch is kept."""
    if batch_size < 1:
        raise ValidationError("batch_size must be >= 1")
    order = np.random.default_rng(seed).permutation(len(encoded))
    for start in range(0, len(order), batch_size):
        idx = torch.from_numpy(order[start : start + batch_size].copy())
        yield encoded.l[idx], encoded.ab[idx], encoded.embeddings[idx]


def make_batches(samples: list[Sample], batch_size: int, seed, vocab: Vocabulary):
    """Shuffle, convert and batch samples for one epoch."""
    yield from iter_batches(encode_samples(samples, vocab), batch_size, seed)


def load_png(path: str | Path) -> np.ndarray:
    """Decode a PNG (or any PIL-readable image) to H x W x 3 floats in [0, 1]."""
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            return np.asarray(rgb, dtype=np.float64) / 255.0
    except (OSError, SyntaxError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc


def decode_png_bytes(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, SyntaxError) as exc:
        raise DataError(f"cannot decode image bytes: {exc}") from exc


def to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)


def save_png(path: str | Path, rgb: np.ndarray) -> None:
    Image.fromarray(to_uint8(rgb)).save(path, format="PNG")


def encode_png_bytes(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(rgb)).save(buf, format="PNG")
    return buf.getvalue()


def resize_rgb(img: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize of the shorter side to ``size`` then center crop."""
    h, w = img.shape[:2]
    if h == w == size:
        return img
    scale = size / min(h, w)
    new_h, new_w = max(size, round(h * scale)), max(size, round(w * scale))
    pil = Image.fromarray(to_uint8(img)).resize((new_w, new_h), Image.BILINEAR)
    arr = np.asarray(pil, dtype=np.float64) / 255.0
    top = (new_h - size) // 2
    left = (new_w - size) // 2
    return arr[top : top + size, left : left + size]
