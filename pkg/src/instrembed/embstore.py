"""Embedding persistence, normalization, and the offline fallback embedder.

Vectors live in a little-endian binary container ("IEBV") so payload bytes
round-trip exactly across platforms. Every matrix held in memory has
unit-norm rows; downstream code may therefore treat dot products as cosine
similarities.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateIdError, VectorFormatError

MAGIC = b"IEBV"
FORMAT_VERSION = 1
NORM_TOL = 1e-6

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


@dataclass
class FallbackEmbedderConfig:
    dim: int = 256
    ngram: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.dim < 8:
            raise ValueError(f"fallback embedder dim must be >= 8, got {self.dim}")
        if self.ngram < 1:
            raise ValueError(f"fallback embedder ngram must be >= 1, got {self.ngram}")


@dataclass
class EmbeddingMatrix:
    """Unit-norm float32 rows aligned to an ordered list of unique ids.

    ``renormalized`` counts rows whose stored norm deviated from 1 by more
    than NORM_TOL and were rescaled at the store boundary.
    """

    ids: list[str]
    rows: np.ndarray
    renormalized: int = 0
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if self.rows.ndim != 2:
            raise ValueError("rows must be a 2-D array")
        if len(self.ids) != self.rows.shape[0]:
            raise ValueError(
                f"id count {len(self.ids)} != row count {self.rows.shape[0]}"
            )
        if self.rows.shape[0] > 0 and self.rows.shape[1] < 1:
            raise ValueError("dim must be positive")
        self._index = {}
        for i, id_ in enumerate(self.ids):
            if id_ in self._index:
                raise DuplicateIdError(f"duplicate id {id_!r} in embedding matrix")
            self._index[id_] = i

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    def row(self, id_: str) -> np.ndarray:
        return self.rows[self._index[id_]]

    def index_of(self, id_: str) -> int:
        return self._index[id_]

    def __contains__(self, id_: str) -> bool:
        return id_ in self._index

    def subset(self, ids) -> "EmbeddingMatrix":
        """New matrix holding the given ids, in the given order."""
        ids = list(ids)
        idx = [self._index[i] for i in ids]
        return EmbeddingMatrix(ids, self.rows[idx].copy())

    @classmethod
    def from_rows(cls, ids, rows, normalize: bool = True) -> "EmbeddingMatrix":
        """Build a matrix, L2-normalizing rows (the store-boundary contract)."""
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError("rows must be a 2-D array")
        if normalize and rows.shape[0] > 0:
            norms = np.linalg.norm(rows, axis=1)
            if np.any(norms == 0.0):
                bad = int(np.flatnonzero(norms == 0.0)[0])
                raise ValueError(f"cannot normalize zero vector at row {bad}")
            rows = rows / norms[:, None]
        return cls(list(ids), rows.astype(np.float32))


def cosine(a, b) -> float:
    """Cosine similarity of two vectors, computed in float64.

    Raises ValueError on dim mismatch or zero-norm input.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero vector")
    return float(np.dot(a, b) / (na * nb))


def write_embeddings(m: EmbeddingMatrix, path) -> None:
    rows = np.ascontiguousarray(m.rows, dtype="<f4")
    parts = [MAGIC, struct.pack("<III", FORMAT_VERSION, len(m), m.dim)]
    parts.append(rows.tobytes())
    for id_ in m.ids:
        raw = id_.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_embeddings(path) -> EmbeddingMatrix:
    """Load an IEBV file, re-normalizing any row whose norm drifts > NORM_TOL.

    Rows already within tolerance are kept bit-for-bit, so write(read(f))
    reproduces well-formed payloads exactly.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16:
        raise VectorFormatError(path, len(data), "truncated header (need 16 bytes)")
    if data[:4] != MAGIC:
        raise VectorFormatError(path, 0, f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, count, dim = struct.unpack_from("<III", data, 4)
    if version != FORMAT_VERSION:
        raise VectorFormatError(path, 4, f"unsupported version {version}")
    if count > 0 and dim < 1:
        raise VectorFormatError(path, 12, "dim must be positive")
    off = 16
    need = count * dim * 4
    if len(data) - off < need:
        raise VectorFormatError(
            path, len(data), f"truncated payload: need {need} bytes at offset {off}"
        )
    rows = np.frombuffer(data, dtype="<f4", count=count * dim, offset=off)
    rows = rows.reshape(count, dim).copy()
    off += need
    ids = []
    for i in range(count):
        if len(data) - off < 4:
            raise VectorFormatError(
                path, off, f"id-count mismatch: {i} of {count} ids present"
            )
        (ln,) = struct.unpack_from("<I", data, off)
        off += 4
        if len(data) - off < ln:
            raise VectorFormatError(path, off, f"truncated id entry {i}")
        ids.append(data[off : off + ln].decode("utf-8"))
        off += ln
    if off != len(data):
        raise VectorFormatError(path, off, f"{len(data) - off} trailing bytes")

    renormalized = 0
    if count > 0:
        norms = np.linalg.norm(rows.astype(np.float64), axis=1)
        if np.any(norms == 0.0):
            bad = int(np.flatnonzero(norms == 0.0)[0])
            raise VectorFormatError(path, 16 + bad * dim * 4, f"zero-norm row {bad}")
        drift = np.abs(norms - 1.0) > NORM_TOL
        if np.any(drift):
            rows[drift] = (rows[drift].astype(np.float64) / norms[drift, None]).astype(
                np.float32
            )
            renormalized = int(drift.sum())
    return EmbeddingMatrix(ids, rows, renormalized=renormalized)


def _fnv1a(data: bytes, h: int) -> int:
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _text_counts(text: str, cfg: FallbackEmbedderConfig, basis: int) -> np.ndarray:
    vec = np.zeros(cfg.dim, dtype=np.float64)
    s = text.lower()
    if len(s) <= cfg.ngram:
        grams = [s]
    else:
        grams = [s[i : i + cfg.ngram] for i in range(len(s) - cfg.ngram + 1)]
    for gram in grams:
        h = _fnv1a(gram.encode("utf-8"), basis)
        coord = (h >> 1) % cfg.dim
        vec[coord] += 1.0 if (h & 1) == 0 else -1.0
    return vec


def fallback_embed(texts, ids=None, cfg: FallbackEmbedderConfig | None = None) -> EmbeddingMatrix:
    """Deterministic character n-gram hashing embedder (no model required).

    Each n-gram maps through seed-mixed 64-bit FNV-1a to a coordinate and a
    +/-1 sign; signed counts are accumulated and L2-normalized. Identical
    (text, cfg) always produces the identical vector, on any platform.
    """
    cfg = cfg or FallbackEmbedderConfig()
    texts = list(texts)
    ids = [str(i) for i in range(len(texts))] if ids is None else list(ids)
    if len(ids) != len(texts):
        raise ValueError(f"{len(ids)} ids for {len(texts)} texts")
    basis = _fnv1a(struct.pack("<Q", cfg.seed & _MASK64), _FNV_OFFSET)
    out = np.zeros((len(texts), cfg.dim), dtype=np.float64)
    for i, text in enumerate(texts):
        if not text:
            raise ValueError(f"empty text at position {i}")
        out[i] = _text_counts(text, cfg, basis)
    return EmbeddingMatrix.from_rows(ids, out)
