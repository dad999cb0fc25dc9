"""Exact in-memory cosine vector index over document embeddings.

Desk-scale pools do not need approximate search: the index stores one
unit-norm vector per document and ranks by exact dot product (cosine, since
vectors are unit-norm) with a total tie-break on ascending doc id, so
rankings are byte-stable across runs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = ["DimMismatch", "VectorIndex", "build_index", "load_index", "save_index", "topk"]

_MAGIC = b"VIDX1\n"


class DimMismatch(Exception):
    """Query vector dimension differs from the index dimension."""


@dataclass
class VectorIndex:
    doc_ids: list[str]
    vectors: np.ndarray  # shape (n, dim), rows unit-norm
    dim: int

    def __post_init__(self) -> None:
        if len(self.doc_ids) != len(set(self.doc_ids)):
            raise ValueError("duplicate doc_id in index")
        if self.vectors.shape != (len(self.doc_ids), self.dim):
            raise ValueError("vector matrix shape does not match ids/dim")


def build_index(
    docs: Sequence[tuple[str, str]],
    embed: Callable[[str], np.ndarray],
    max_chars: int = 20000,
) -> VectorIndex:
    """Embed one text per document and assemble the index.

    Args:
        docs: (doc_id, embedding_text) pairs; ids must be unique.
        embed: returns a unit-norm vector of fixed dimension.
        max_chars: embedding texts are truncated to this budget.
    """
    if not docs:
        raise ValueError("empty document pool")
    ids = [doc_id for doc_id, _ in docs]
    if len(ids) != len(set(ids)):
        raise ValueError("duplicate doc_id in pool")
    vectors = np.stack([np.asarray(embed(text[:max_chars]), dtype=np.float64) for _, text in docs])
    return VectorIndex(doc_ids=ids, vectors=vectors, dim=vectors.shape[1])


def topk(index: VectorIndex, query_vec: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Top-k documents by cosine score, descending.

    Ties are broken by ascending doc id. Returns ``min(k, |index|)`` entries.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (index.dim,):
        raise DimMismatch(f"query dim {q.shape} != index dim {index.dim}")
    scores = index.vectors @ q
    ranked = sorted(zip(index.doc_ids, scores.tolist()), key=lambda t: (-t[1], t[0]))
    return ranked[:k]


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Write the index as a little-endian binary cache file.

    Layout: magic, uint32 count, uint32 dim, then per row a uint16
    UTF-8-encoded id length, the id bytes, and ``dim`` float64 values.
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", len(index.doc_ids), index.dim))
        for doc_id, row in zip(index.doc_ids, index.vectors):
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack(f"<{index.dim}d", *row.tolist()))


def load_index(path: str | Path) -> VectorIndex:
    """Read an index cache file written by :func:`save_index`."""
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not an index cache file")
        count, dim = struct.unpack("<II", fh.read(8))
        ids = []
        rows = np.empty((count, dim), dtype=np.float64)
        for i in range(count):
            (id_len,) = struct.unpack("<H", fh.read(2))
            ids.append(fh.read(id_len).decode("utf-8"))
            rows[i] = struct.unpack(f"<{dim}d", fh.read(8 * dim))
    return VectorIndex(doc_ids=ids, vectors=rows, dim=dim)
