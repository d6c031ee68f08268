"""Hashed n-gram embeddings, a binary matrix format, and exact top-k retrieval.

Texts are embedded by signed feature hashing of word n-grams: each n-gram is
hashed with keyed blake2b into a bucket and a sign, accumulated, then L2
normalized. No vocabulary is stored, so any text embeds into the same space
as long as (dim, ngram_range, seed) agree.
"""
from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_TOKEN_RE = re.compile(r"[a-z0-9']+")

EMBX_MAGIC = b"EMBX"
EMBX_VERSION = 1
_HEADER = struct.Struct("<4sHIQ")  # magic, version, dim, rows
_CHECKSUM_BYTES = 8


class EmbxError(ValueError):
    """Base class for embedding-file format errors."""


class EmbxMagicError(EmbxError):
    """Wrong magic bytes or unsupported version."""


class EmbxRowCountError(EmbxError):
    """Row count in header disagrees with the id block or payload size."""


class EmbxChecksumError(EmbxError):
    """Checksum mismatch or truncated file."""


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "hashed_ngram"
    dim: int = 4096
    ngram_range: tuple[int, int] = (1, 2)
    seed: int = 0

    def __post_init__(self):
        if self.kind != "hashed_ngram":
            raise ValueError(f"unknown embedder kind {self.kind!r}")
        if self.dim < 8:
            raise ValueError(f"dim must be >= 8, got {self.dim}")
        lo, hi = self.ngram_range
        if not (1 <= lo <= hi):
            raise ValueError(f"bad ngram_range {self.ngram_range}")


def _hash_key(seed: int) -> bytes:
    return seed.to_bytes(8, "little", signed=False)


def embed_text(text: str, cfg: EmbedderConfig) -> np.ndarray:
    """Embed one text. Unit norm, or the zero vector when no n-grams exist.

    The zero vector is the unnormalizable case; callers can detect it with
    a norm check. Deterministic: same (text, cfg) always gives the same
    vector, and token order only matters through the n-grams themselves.
    """
    vec = np.zeros(cfg.dim, dtype=np.float64)
    tokens = _TOKEN_RE.findall(text.lower())
    key = _hash_key(cfg.seed)
    lo, hi = cfg.ngram_range
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            gram = " ".join(tokens[i:i + n])
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=key).digest()
            h = int.from_bytes(digest, "little")
            sign = 1.0 if (h >> 63) & 1 else -1.0
            vec[h % cfg.dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec.astype(np.float32)


@dataclass
class EmbeddingMatrix:
    """Dense float32 matrix with aligned, unique string ids."""

    ids: list[str]
    data: np.ndarray
    normalized: bool = field(init=False)
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError(f"data must be 2-D, got shape {self.data.shape}")
        if len(self.ids) != self.data.shape[0]:
            raise ValueError(
                f"{len(self.ids)} ids for {self.data.shape[0]} rows")
        self._index = {}
        for i, rid in enumerate(self.ids):
            if rid in self._index:
                raise ValueError(f"duplicate id {rid!r}")
            self._index[rid] = i
        norms = np.linalg.norm(self.data.astype(np.float64), axis=1)
        self.normalized = bool(norms.size == 0 or
                               (np.abs(norms - 1.0) <= 1e-6).all())

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.data.shape[0]

    def __contains__(self, rid: str) -> bool:
        return rid in self._index

    def row(self, rid: str) -> np.ndarray:
        return self.data[self._index[rid]]

    def row_index(self, rid: str) -> int:
        return self._index[rid]

    def zero_row_ids(self) -> list[str]:
        """Ids of unnormalizable (all-zero) rows."""
        mask = ~self.data.any(axis=1)
        return [rid for rid, z in zip(self.ids, mask) if z]


def embed_texts(items, cfg: EmbedderConfig) -> EmbeddingMatrix:
    """Embed an iterable of (id, text) pairs into one matrix."""
    ids, rows = [], []
    for rid, text in items:
        ids.append(str(rid))
        rows.append(embed_text(text, cfg))
    data = np.vstack(rows) if rows else np.zeros((0, cfg.dim), dtype=np.float32)
    return EmbeddingMatrix(ids=ids, data=data)


def export_embeddings(matrix: EmbeddingMatrix, path) -> None:
    """Write the EMBX binary format.

    Layout: magic "EMBX", u16 version, u32 dim, u64 rows (all little
    endian), float32 row-major payload, newline-terminated UTF-8 ids, and
    an 8-byte blake2b checksum of everything before it.
    """
    for rid in matrix.ids:
        if "\n" in rid or "\r" in rid:
            raise ValueError(f"id {rid!r} contains a newline")
    buf = bytearray()
    buf += _HEADER.pack(EMBX_MAGIC, EMBX_VERSION, matrix.dim, len(matrix))
    buf += np.ascontiguousarray(matrix.data, dtype="<f4").tobytes()
    for rid in matrix.ids:
        buf += rid.encode("utf-8") + b"\n"
    checksum = hashlib.blake2b(bytes(buf), digest_size=_CHECKSUM_BYTES).digest()
    Path(path).write_bytes(bytes(buf) + checksum)


def import_embeddings(path) -> EmbeddingMatrix:
    """Read an EMBX file; round-trips export_embeddings bit-exactly."""
    blob = Path(path).read_bytes()
    if len(blob) < 4 or blob[:4] != EMBX_MAGIC:
        raise EmbxMagicError(f"{path}: bad magic")
    if len(blob) < _HEADER.size:
        raise EmbxChecksumError(f"{path}: truncated header")
    _, version, dim, rows = _HEADER.unpack_from(blob)
    if version != EMBX_VERSION:
        raise EmbxMagicError(f"{path}: unsupported version {version}")
    float_bytes = rows * dim * 4
    min_len = _HEADER.size + float_bytes + _CHECKSUM_BYTES
    if len(blob) < min_len:
        raise EmbxChecksumError(f"{path}: truncated file")
    payload, checksum = blob[:-_CHECKSUM_BYTES], blob[-_CHECKSUM_BYTES:]
    expected = hashlib.blake2b(payload, digest_size=_CHECKSUM_BYTES).digest()
    if checksum != expected:
        raise EmbxChecksumError(f"{path}: checksum mismatch")
    data = np.frombuffer(
        payload, dtype="<f4", count=rows * dim, offset=_HEADER.size
    ).reshape(rows, dim).copy()
    id_block = payload[_HEADER.size + float_bytes:]
    if rows == 0:
        ids = []
        if id_block:
            raise EmbxRowCountError(f"{path}: id block present for 0 rows")
    else:
        if not id_block.endswith(b"\n"):
            raise EmbxRowCountError(f"{path}: id block not newline-terminated")
        ids = id_block[:-1].decode("utf-8").split("\n")
    if len(ids) != rows:
        raise EmbxRowCountError(f"{path}: header says {rows} rows, id block has {len(ids)}")
    return EmbeddingMatrix(ids=ids, data=data)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine in [-1, 1]; zero-norm inputs map to 0 by convention."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(min(1.0, max(-1.0, float(u @ v) / (nu * nv))))


def top_k_similar(query: np.ndarray, matrix: EmbeddingMatrix, k: int,
                  exclude: frozenset | set | None = None) -> list[tuple[str, float]]:
    """Exact k nearest rows by cosine, ties broken by ascending id.

    Excluded ids never appear; fewer than k candidates returns all of them,
    sorted. The scan is exhaustive, not approximate.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (matrix.dim,):
        raise ValueError(f"query dim {query.shape} != matrix dim {matrix.dim}")
    exclude = exclude or frozenset()
    data = matrix.data.astype(np.float64)
    qnorm = float(np.linalg.norm(query))
    row_norms = np.linalg.norm(data, axis=1)
    scores = np.zeros(len(matrix), dtype=np.float64)
    if qnorm > 0.0:
        ok = row_norms > 0.0
        scores[ok] = (data[ok] @ query) / (row_norms[ok] * qnorm)
        np.clip(scores, -1.0, 1.0, out=scores)
    ranked = sorted(
        ((rid, float(scores[i])) for i, rid in enumerate(matrix.ids) if rid not in exclude),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return ranked[:k]
