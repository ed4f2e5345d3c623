"""Free-text color descriptions -> 256-d conditioning vectors.

The conditioning vector for a description is the componentwise mean of the
per-token vectors of a :class:`Vocabulary`.  Vocabularies either come from
a pretrained embedding file (``token v1 ... v256`` per line) or are seeded
deterministically per token, which keeps desk-scale experiments free of
external weight downloads.  Also hosts the caption filtering step that
keeps only color-bearing sentences, and the class-label -> color lookup
for datasets annotated by class instead of text.
"""

from __future__ import annotations

import hashlib
import logging
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError, ValidationError

log = logging.getLogger(__name__)

EMBEDDING_DIM = 256

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token -> 256-d vector table.

    ``index`` maps lowercased tokens to rows of ``table``; lookups are
    case-insensitive.  ``source`` records provenance ("pretrained-file" or
    "jointly-seeded").
    """

    index: dict[str, int]
    table: np.ndarray
    source: str = "pretrained-file"
    _zero: np.ndarray = field(default=None, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self):
        if self.table.ndim != 2 or self.table.shape[1] != EMBEDDING_DIM:
            raise ValidationError(
                f"embedding table must be N x {EMBEDDING_DIM}, got {self.table.shape}"
            )
        if len(self.index) != self.table.shape[0]:
            raise ValidationError("index size does not match table rows")
        if not np.isfinite(self.table).all():
            raise ValidationError("embedding table contains non-finite values")
        object.__setattr__(self, "_zero", np.zeros(EMBEDDING_DIM))

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token.lower() in self.index

    def vector(self, token: str) -> np.ndarray:
        """Vector for a token; the zero vector when out of vocabulary."""
        row = self.index.get(token.lower())
        return self._zero if row is None else self.table[row]


def load_embeddings(path: str | Path) -> Vocabulary:
    """Parse a ``token v1 ... v256`` text file into a Vocabulary.

    Duplicate tokens: last occurrence wins, with a warning.  Malformed
    lines and wrong dimensionality raise DataError naming the line number.
    """
    index: dict[str, int] = {}
    rows: list[np.ndarray] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) - 1 != EMBEDDING_DIM:
                raise DataError(
                    f"{path}:{lineno}: expected {EMBEDDING_DIM} components, got {len(parts) - 1}"
                )
            token = parts[0].lower()
            try:
                vec = np.array([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: unparsable float ({exc})") from exc
            if not np.isfinite(vec).all():
                raise DataError(f"{path}:{lineno}: non-finite component")
            if token in index:
                log.warning("duplicate token %r at %s:%d, last occurrence wins", token, path, lineno)
                rows[index[token]] = vec
            else:
                index[token] = len(rows)
                rows.append(vec)
    table = np.stack(rows) if rows else np.zeros((0, EMBEDDING_DIM))
    return Vocabulary(index=index, table=table, source="pretrained-file")


def fallback_embedding(token: str, seed: int) -> np.ndarray:
    """Deterministic unit-norm pseudo-random vector for (token, seed).

    A stable digest of the lowercased token keeps the function
    reproducible across processes, unlike the builtin ``hash``.
    """
    digest = hashlib.sha256(f"{seed}:{token.lower()}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    vec = rng.standard_normal(EMBEDDING_DIM)
    return vec / np.linalg.norm(vec)


def fallback_vocabulary(tokens: set[str] | list[str], seed: int) -> Vocabulary:
    """Vocabulary of seeded fallback vectors, one per distinct token."""
    uniq = sorted({t.lower() for t in tokens})
    table = np.stack([fallback_embedding(t, seed) for t in uniq]) if uniq else np.zeros((0, EMBEDDING_DIM))
    return Vocabulary(index={t: i for i, t in enumerate(uniq)}, table=table, source="jointly-seeded")


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()


def encode_description(text: str, vocab: Vocabulary) -> np.ndarray:
    """Mean of per-token vectors; OOV tokens contribute the zero vector.

    Total function: an empty or all-punctuation description encodes to the
    zero vector (the no-conditioning case).
    """
    tokens = tokenize(text)
    if not tokens:
        return np.zeros(EMBEDDING_DIM)
    return np.mean([vocab.vector(t) for t in tokens], axis=0)


def extract_color_sentences(captions: list[str], lexicon: set[str] | frozenset[str]) -> str:
    """Keep the captions that mention a lexicon word, joined in input order.

    Matching is case-insensitive on word boundaries; returns "" when no
    caption qualifies.
    """
    if not lexicon:
        raise ValidationError("color lexicon must not be empty")
    pattern = re.compile(
        r"\b(?:" + "|".join(re.escape(w.lower()) for w in sorted(lexicon)) + r")\b",
        re.IGNORECASE,
    )
    return " ".join(c for c in captions if pattern.search(c))


def _read_resource(name: str) -> list[str]:
    raw = resources.files("textcolorize.resources").joinpath(name).read_text(encoding="utf-8")
    return [ln.strip() for ln in raw.splitlines() if ln.strip() and not ln.startswith("#")]


def default_color_lexicon() -> frozenset[str]:
    """The packaged list of English color words."""
    return frozenset(_read_resource("color_lexicon.txt"))


def load_color_lexicon(path: str | Path) -> frozenset[str]:
    """One color word per line, UTF-8, '#' comments allowed."""
    words = []
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            ln = ln.strip()
            if ln and not ln.startswith("#"):
                words.append(ln.lower())
    return frozenset(words)


def ncd_color_table() -> dict[str, str]:
    """Packaged class-label -> color word table for fruit datasets."""
    table = {}
    for line in _read_resource("ncd_class_colors.txt"):
        cls, color = line.split()
        table[cls.lower()] = color.lower()
    return table
