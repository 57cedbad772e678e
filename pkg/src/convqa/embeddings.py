"""Text embedding providers with a fixed-dimension contract.

Every provider maps non-empty text to a float vector of dimension ``d``.
The file-backed provider is keyed by the sha256 of the exact UTF-8 text and
falls back to the hashing provider on misses (counted, never fatal).
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

import numpy as np

__all__ = [
    "DEFAULT_DIM",
    "tokenize",
    "text_digest",
    "hash_embed",
    "HashEmbeddingProvider",
    "FileEmbeddingProvider",
    "load_embedding_file",
]

DEFAULT_DIM = 768

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


def text_digest(text: str) -> str:
    """sha256 hex of the exact UTF-8 text; the lookup key for keyed files."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def hash_embed(text: str, d: int = DEFAULT_DIM, seed: int = 0) -> np.ndarray:
    """Deterministic bag-of-words embedding.

    Each token lands in a sha256-derived bucket with a +/-1 sign; the bucket
    sums are L2-normalized. Inputs with no tokens map to the first basis
    vector so the unit-norm contract holds for every input.
    """
    if d <= 0:
        raise ValueError(f"embedding dimension must be positive, got {d}")
    vec = np.zeros(d, dtype=np.float64)
    tokens = tokenize(text)
    if not tokens:
        vec[0] = 1.0
        return vec
    for tok in tokens:
        digest = hashlib.sha256(f"{seed}:{tok}".encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:8], "little") % d
        sign = 1.0 if digest[8] % 2 == 0 else -1.0
        vec[bucket] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # opposing signs cancelled every bucket; fall back like the no-token case
        vec[0] = 1.0
        return vec
    return vec / norm


class _CachingProvider:
    """Shared encode() wrapper: validates input, memoizes, freezes results."""

    name: str
    d: int

    def __init__(self) -> None:
        self._cache: dict[str, np.ndarray] = {}

    def encode(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError(f"{self.name}: cannot embed empty input")
        cached = self._cache.get(text)
        if cached is None:
            cached = self._embed(text)
            cached.flags.writeable = False
            self._cache[text] = cached
        return cached

    def _embed(self, text: str) -> np.ndarray:
        raise NotImplementedError


class HashEmbeddingProvider(_CachingProvider):
    """Pure hashing provider; no external data needed."""

    def __init__(self, d: int = DEFAULT_DIM, seed: int = 0) -> None:
        super().__init__()
        if d <= 0:
            raise ValueError(f"embedding dimension must be positive, got {d}")
        self.d = d
        self.seed = seed
        self.name = f"hash-{d}"

    def _embed(self, text: str) -> np.ndarray:
        return hash_embed(text, self.d, self.seed)


class FileEmbeddingProvider(_CachingProvider):
    """Exact-text lookup over a precomputed embedding file.

    Misses fall back to the hashing scheme and increment ``miss_count`` so
    callers can report coverage.
    """

    def __init__(self, d: int, entries: dict[str, np.ndarray], name: str = "file",
                 fallback_seed: int = 0) -> None:
        super().__init__()
        self.d = d
        self.name = name
        self.entries = entries
        self.fallback_seed = fallback_seed
        self.miss_count = 0

    def _embed(self, text: str) -> np.ndarray:
        hit = self.entries.get(text_digest(text))
        if hit is not None:
            return hit.copy()
        self.miss_count += 1
        return hash_embed(text, self.d, self.fallback_seed)


def load_embedding_file(path: str | Path, expected_dim: int | None = None,
                        fallback_seed: int = 0) -> FileEmbeddingProvider:
    """Parse an embedding file: ``dim=<d>`` header, then ``<sha256>\\t<d floats>``.

    Values are stored at float32 precision (the file's own precision) and
    served as float64. Malformed lines and dimension mismatches raise with
    the offending line number.
    """
    path = Path(path)
    entries: dict[str, np.ndarray] = {}
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        m = re.fullmatch(r"dim=(\d+)", header)
        if not m:
            raise ValueError(f"{path}:1: expected 'dim=<d>' header, got {header!r}")
        d = int(m.group(1))
        if d <= 0:
            raise ValueError(f"{path}:1: dimension must be positive, got {d}")
        if expected_dim is not None and d != expected_dim:
            raise ValueError(
                f"{path}: dimension mismatch: file has d={d}, configured d={expected_dim}")
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<digest>\\t<values>'")
            digest, values = parts
            if not re.fullmatch(r"[0-9a-f]{64}", digest):
                raise ValueError(f"{path}:{lineno}: bad sha256 digest {digest!r}")
            fields = values.split()
            if len(fields) != d:
                raise ValueError(
                    f"{path}:{lineno}: expected {d} values, got {len(fields)}")
            try:
                vec = np.array(fields, dtype=np.float32)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad float value ({exc})") from None
            entries[digest] = vec.astype(np.float64)
    return FileEmbeddingProvider(d, entries, name=f"file:{path.name}",
                                 fallback_seed=fallback_seed)
