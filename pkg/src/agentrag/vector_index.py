"""Exact top-k cosine retrieval over embedded chunks, with JSON persistence."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from agentrag.corpus import Chunk
from agentrag.errors import LoadError, ValidationError
from agentrag.gateway import NORM_TOLERANCE, EmbeddingVector
from agentrag.storage import atomic_write_json, read_json

FORMAT_VERSION = 1


class Embedder(Protocol):
    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


@dataclass(frozen=True)
class IndexEntry:
    chunk_id: str
    doc_id: str
    text: str
    vector: EmbeddingVector


@dataclass(frozen=True)
class ScoredChunk:
    chunk_id: str
    doc_id: str
    text: str
    score: float


class VectorIndex:
    """Immutable flat index. Scores are dot products of unit vectors."""

    def __init__(self, entries: Sequence[IndexEntry], dimension: int) -> None:
        if not entries:
            raise ValidationError("a vector index needs at least one entry")
        seen: set[str] = set()
        for e in entries:
            if e.chunk_id in seen:
                raise ValidationError(f"duplicate chunk_id {e.chunk_id!r}")
            seen.add(e.chunk_id)
            if e.vector.dimension != dimension:
                raise ValidationError(
                    f"entry {e.chunk_id!r} has dimension {e.vector.dimension}, index has {dimension}"
                )
        self.entries: tuple[IndexEntry, ...] = tuple(entries)
        self.dimension = dimension
        self._matrix = np.array([e.vector.values for e in self.entries], dtype=np.float64)
        self._matrix.setflags(write=False)
        norms = np.einsum("ij,ij->i", self._matrix, self._matrix)
        bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
        if bad.size:
            raise ValidationError(f"entry {self.entries[bad[0]].chunk_id!r} is not unit-norm")

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorIndex):
            return NotImplemented
        return self.dimension == other.dimension and self.entries == other.entries

    def fingerprint(self) -> str:
        """Content hash; changes iff entries or dimension change."""
        h = hashlib.sha256()
        h.update(str(self.dimension).encode())
        for e in self.entries:
            h.update(json.dumps([e.chunk_id, e.doc_id, e.text]).encode())
        h.update(self._matrix.tobytes())
        return h.hexdigest()

    def search(self, vector: EmbeddingVector, k: int) -> list[ScoredChunk]:
        if k <= 0:
            raise ValidationError("k must be positive")
        if vector.dimension != self.dimension:
            raise ValidationError(
                f"query vector has dimension {vector.dimension}, index has {self.dimension}"
            )
        # row-wise multiply-and-sum rather than BLAS matmul: identical rows must get
        # bit-identical scores so that exact ties fall back to chunk_id order
        scores = (self._matrix * np.asarray(vector.values, dtype=np.float64)).sum(axis=1)
        order = sorted(range(len(self.entries)), key=lambda i: (-scores[i], self.entries[i].chunk_id))
        out = []
        for i in order[:k]:
            e = self.entries[i]
            out.append(ScoredChunk(e.chunk_id, e.doc_id, e.text, float(np.clip(scores[i], -1.0, 1.0))))
        return out


def build_index(chunks: Sequence[Chunk], embedder: Embedder) -> VectorIndex:
    if not chunks:
        raise ValidationError("cannot build an index from zero chunks")
    ids = [c.chunk_id for c in chunks]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise ValidationError(f"duplicate chunk_id {dup!r}")
    vectors = embedder.embed_batch([c.text for c in chunks])
    if len(vectors) != len(chunks):
        raise ValidationError(f"embedder returned {len(vectors)} vectors for {len(chunks)} chunks")
    dimension = vectors[0].dimension
    entries = [IndexEntry(c.chunk_id, c.doc_id, c.text, v) for c, v in zip(chunks, vectors)]
    return VectorIndex(entries, dimension)


def query(index: VectorIndex, query_text: str, k: int, embedder: Embedder) -> list[ScoredChunk]:
    """Top ``min(k, len(index))`` chunks by descending cosine, ties by ascending chunk_id."""
    (qvec,) = embedder.embed_batch([query_text])
    return index.search(qvec, k)


def index_to_dict(index: VectorIndex) -> dict:
    return {
        "version": FORMAT_VERSION,
        "dimension": index.dimension,
        "entries": [
            {"chunk_id": e.chunk_id, "doc_id": e.doc_id, "text": e.text, "vector": list(e.vector.values)}
            for e in index.entries
        ],
    }


def index_from_dict(raw: dict, source: str = "<memory>") -> VectorIndex:
    if not isinstance(raw, dict):
        raise LoadError(f"{source}: top level must be an object")
    if raw.get("version") != FORMAT_VERSION:
        raise LoadError(f"{source}: field 'version' is {raw.get('version')!r}, expected {FORMAT_VERSION}")
    dimension = raw.get("dimension")
    if not isinstance(dimension, int) or dimension <= 0:
        raise LoadError(f"{source}: field 'dimension' must be a positive integer")
    entries_raw = raw.get("entries")
    if not isinstance(entries_raw, list):
        raise LoadError(f"{source}: field 'entries' must be a list")
    entries = []
    for i, e in enumerate(entries_raw):
        try:
            vec = tuple(float(x) for x in e["vector"])
            entries.append(IndexEntry(str(e["chunk_id"]), str(e["doc_id"]), str(e["text"]), EmbeddingVector(vec)))
        except (KeyError, TypeError, ValueError) as exc:
            raise LoadError(f"{source}: entry {i} is malformed ({exc!r})") from None
    return VectorIndex(entries, dimension)


def save_index(index: VectorIndex, path: str | Path) -> None:
    atomic_write_json(path, index_to_dict(index))


def load_index(path: str | Path) -> VectorIndex:
    return index_from_dict(read_json(path), str(path))
