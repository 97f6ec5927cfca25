"""Corpus loading and overlapping token-window chunking.

Tokens are whitespace-delimited words; chunk text is the single-space join of
its tokens. Markdown is kept verbatim and treated as plain text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from agentrag.errors import LoadError, ValidationError


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    description: str
    body: str
    source_path: str = ""

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValidationError("document doc_id must be non-empty")
        if not self.body.strip():
            raise ValidationError(f"document {self.doc_id!r} has an empty body")
        if not self.description.strip():
            raise ValidationError(f"document {self.doc_id!r} has an empty description")


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    ordinal: int
    text: str
    token_span: tuple[int, int]


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size: int = 1024
    overlap: int = 200

    def __post_init__(self) -> None:
        if self.chunk_size <= 0:
            raise ValidationError(f"chunk_size must be positive, got {self.chunk_size}")
        if self.overlap < 0:
            raise ValidationError(f"overlap must be non-negative, got {self.overlap}")
        if self.overlap >= self.chunk_size:
            raise ValidationError(
                f"overlap ({self.overlap}) must be smaller than chunk_size ({self.chunk_size})"
            )

    @property
    def stride(self) -> int:
        return self.chunk_size - self.overlap


def load_corpus(manifest_path: str | Path) -> list[Document]:
    """Read a JSON manifest and the text files it points to.

    The manifest is an array of ``{"doc_id", "title", "description", "path"}``
    objects. Relative paths resolve against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    try:
        raw = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise LoadError(f"manifest not found: {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"manifest {manifest_path} is not valid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise ValidationError(f"manifest {manifest_path} must be a JSON array")

    docs: list[Document] = []
    seen: set[str] = set()
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ValidationError(f"manifest entry {i} is not an object")
        missing = [k for k in ("doc_id", "title", "description", "path") if k not in entry]
        if missing:
            raise ValidationError(f"manifest entry {i} is missing {', '.join(missing)}")
        doc_id = str(entry["doc_id"])
        if doc_id in seen:
            raise ValidationError(f"duplicate doc_id {doc_id!r} in manifest")
        seen.add(doc_id)
        path = Path(entry["path"])
        if not path.is_absolute():
            path = manifest_path.parent / path
        try:
            body = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise LoadError(f"cannot read document {doc_id!r} at {path}: {exc.strerror}") from None
        docs.append(
            Document(
                doc_id=doc_id,
                title=str(entry["title"]),
                description=str(entry["description"]),
                body=body,
                source_path=str(path),
            )
        )
    return docs


def tokenize(text: str) -> list[str]:
    return text.split()


def detokenize(tokens: list[str]) -> str:
    return " ".join(tokens)


def chunk_count(n_tokens: int, cfg: ChunkingConfig) -> int:
    """Number of windows ``chunk_document`` produces for ``n_tokens`` tokens."""
    if n_tokens <= cfg.chunk_size:
        return 1
    return -(-(n_tokens - cfg.overlap) // cfg.stride)


def chunk_spans(n_tokens: int, cfg: ChunkingConfig) -> list[tuple[int, int]]:
    if n_tokens <= cfg.chunk_size:
        return [(0, n_tokens)]
    return [
        (i * cfg.stride, min(i * cfg.stride + cfg.chunk_size, n_tokens))
        for i in range(chunk_count(n_tokens, cfg))
    ]


def chunk_document(doc: Document, cfg: ChunkingConfig) -> list[Chunk]:
    tokens = tokenize(doc.body)
    return [
        Chunk(
            chunk_id=f"{doc.doc_id}:{i:04d}",
            doc_id=doc.doc_id,
            ordinal=i,
            text=detokenize(tokens[start:end]),
            token_span=(start, end),
        )
        for i, (start, end) in enumerate(chunk_spans(len(tokens), cfg))
    ]
