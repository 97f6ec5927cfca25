"""Build and load the on-disk index directory.

Layout::

    {doc_id}.vec.json    per-document vector index
    {doc_id}.tree.json   per-document summary tree
    pooled.vec.json      all chunks of all documents (default RAG)
    tools.vec.json       one entry per document description (top-level agent)
"""

from __future__ import annotations

import logging
import re
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from agentrag.agents import DocumentAgent, DocumentTool, TopLevelAgent, build_tool_index
from agentrag.corpus import ChunkingConfig, Document, chunk_document
from agentrag.errors import AgentRagError, ValidationError
from agentrag.summary_index import Responder, SummaryTree, build_summary_tree, load_tree, save_tree
from agentrag.vector_index import Embedder, VectorIndex, build_index, load_index, save_index

logger = logging.getLogger(__name__)

POOLED = "pooled.vec.json"
TOOLS = "tools.vec.json"
_SAFE_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class IngestError(AgentRagError):
    def __init__(self, doc_id: str, cause: Exception) -> None:
        super().__init__(f"ingest failed for document {doc_id!r}: {cause}")
        self.doc_id = doc_id


class MissingIndexError(AgentRagError):
    pass


@dataclass
class Artifacts:
    doc_indices: dict[str, VectorIndex]
    trees: dict[str, SummaryTree]
    pooled: VectorIndex
    tools: VectorIndex


def build_artifacts(
    docs: Sequence[Document],
    chunking: ChunkingConfig,
    embedder: Embedder,
    summarizer: Responder,
    b: int,
) -> Artifacts:
    """Build every index in memory; nothing touches disk until all builds succeed."""
    if not docs:
        raise ValidationError("the corpus is empty")
    doc_indices: dict[str, VectorIndex] = {}
    trees: dict[str, SummaryTree] = {}
    pooled_chunks = []
    for doc in docs:
        if not _SAFE_ID.match(doc.doc_id) or doc.doc_id in ("pooled", "tools"):
            raise IngestError(doc.doc_id, ValidationError("doc_id must be a safe, non-reserved file name"))
        try:
            chunks = chunk_document(doc, chunking)
            doc_indices[doc.doc_id] = build_index(chunks, embedder)
            trees[doc.doc_id] = build_summary_tree(chunks, summarizer, b)
        except Exception as exc:
            raise IngestError(doc.doc_id, exc) from exc
        pooled_chunks.extend(chunks)
        logger.info("built %s: %d chunks, tree levels %s", doc.doc_id, len(chunks), trees[doc.doc_id].level_sizes())
    pooled = build_index(pooled_chunks, embedder)
    tools = build_tool_index([(d.doc_id, d.description) for d in docs], embedder)
    return Artifacts(doc_indices, trees, pooled, tools)


def write_artifacts(index_dir: str | Path, art: Artifacts) -> list[Path]:
    index_dir = Path(index_dir)
    index_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for doc_id, idx in art.doc_indices.items():
        save_index(idx, index_dir / f"{doc_id}.vec.json")
        save_tree(art.trees[doc_id], index_dir / f"{doc_id}.tree.json")
        written += [index_dir / f"{doc_id}.vec.json", index_dir / f"{doc_id}.tree.json"]
    save_index(art.pooled, index_dir / POOLED)
    save_index(art.tools, index_dir / TOOLS)
    written += [index_dir / POOLED, index_dir / TOOLS]
    keep = {p.name for p in written}
    for stale in list(index_dir.glob("*.vec.json")) + list(index_dir.glob("*.tree.json")):
        if stale.name not in keep:
            stale.unlink()
    return written


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingIndexError(f"missing index file {path}; run `agentrag ingest` first")
    return path


def load_pooled_index(index_dir: str | Path) -> VectorIndex:
    return load_index(_require(Path(index_dir) / POOLED))


def load_top_level_agent(index_dir: str | Path, k_doc: int) -> TopLevelAgent:
    index_dir = Path(index_dir)
    tool_index = load_index(_require(index_dir / TOOLS))
    tools = []
    for entry in tool_index.entries:
        doc_id = entry.chunk_id
        agent = DocumentAgent(
            doc_id=doc_id,
            vector_index=load_index(_require(index_dir / f"{doc_id}.vec.json")),
            summary_tree=load_tree(_require(index_dir / f"{doc_id}.tree.json")),
            k_doc=k_doc,
        )
        tools.append(DocumentTool(doc_id=doc_id, description=entry.text, agent=agent))
    return TopLevelAgent(tuple(tools), tool_index)
