"""Document agents and the top-level agent that fans a query out to them.

Flow for one query:

1. ``select_documents`` ranks document tools by embedding similarity between
   the query and each tool's description and keeps the top three.
2. For each selected document, ``refine`` asks the router which engine to use
   (vector lookup or summary tree), queries that engine, and asks the
   responder for a focused answer fragment. A reply equal to the sentinel
   ``NO_RELEVANT_INFORMATION`` discards that document.
3. ``answer_agentic`` synthesizes the final answer from the surviving
   fragments.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal

from agentrag.corpus import Chunk, Document
from agentrag.errors import AgentRagError, ValidationError
from agentrag.summary_index import (
    DEFAULT_BRANCHING,
    Responder,
    SummaryTree,
    build_summary_tree,
    query_summary,
    render_query_prompt,
)
from agentrag.vector_index import Embedder, VectorIndex, build_index, query

logger = logging.getLogger(__name__)

Engine = Literal["vector", "summary"]

NO_RELEVANT_INFORMATION = "NO_RELEVANT_INFORMATION"
SELECTION_DEPTH = 3
DEFAULT_K_DOC = 2

VECTOR_ENGINE_DESCRIPTION = "answer facts about the document"
SUMMARY_ENGINE_DESCRIPTION = "answer summarization questions about the document"

ROUTING_PROMPT = (
    "You choose which query engine answers a question about the document {doc_id!r}.\n"
    "Engines:\n"
    "- vector: use this engine to {vector_description}.\n"
    "- summary: use this engine to {summary_description}.\n"
    "Reply with exactly one word, either vector or summary.\n"
    "Query:{query}"
)
RELEVANCE_INSTRUCTION = (
    "Answer the query using only the context below. If the context contains no relevant "
    f"information, reply exactly {NO_RELEVANT_INFORMATION}."
)
SYNTHESIS_PROMPT = (
    "Context information from multiple sources is below.\n{context}\n"
    "Given the context information and the task below, produce the output.\n{prompt}"
)
EMPTY_CONTEXT_NOTE = "(No relevant context was found in the document collection.)"


class RefineError(AgentRagError):
    def __init__(self, doc_id: str, cause: Exception) -> None:
        super().__init__(f"refining document {doc_id!r} failed: {cause}")
        self.doc_id = doc_id


@dataclass(frozen=True)
class DocumentAgent:
    doc_id: str
    vector_index: VectorIndex
    summary_tree: SummaryTree
    k_doc: int = DEFAULT_K_DOC
    vector_description: str = VECTOR_ENGINE_DESCRIPTION
    summary_description: str = SUMMARY_ENGINE_DESCRIPTION

    def __post_init__(self) -> None:
        if self.summary_tree.doc_id != self.doc_id:
            raise ValidationError(
                f"summary tree belongs to {self.summary_tree.doc_id!r}, agent to {self.doc_id!r}"
            )
        foreign = {e.doc_id for e in self.vector_index.entries} - {self.doc_id}
        if foreign:
            raise ValidationError(f"vector index for {self.doc_id!r} holds chunks of {sorted(foreign)}")


@dataclass(frozen=True)
class DocumentTool:
    doc_id: str
    description: str
    agent: DocumentAgent

    def __post_init__(self) -> None:
        if not self.description.strip():
            raise ValidationError(f"document tool {self.doc_id!r} needs a description")


@dataclass(frozen=True)
class TopLevelAgent:
    tools: tuple[DocumentTool, ...]
    tool_index: VectorIndex

    def __post_init__(self) -> None:
        ids = [t.doc_id for t in self.tools]
        if not ids:
            raise ValidationError("the top-level agent needs at least one document tool")
        if sorted(e.chunk_id for e in self.tool_index.entries) != sorted(ids):
            raise ValidationError("tool index must hold exactly one entry per tool, keyed by doc_id")

    def tool(self, doc_id: str) -> DocumentTool:
        for t in self.tools:
            if t.doc_id == doc_id:
                return t
        raise KeyError(doc_id)


@dataclass
class RefinedContext:
    doc_id: str
    engine_used: Engine
    text: str
    discarded: bool
    # (stage, prompt, reply) triples, kept for the trace
    exchanges: list[tuple[str, str, str]] = field(default_factory=list, compare=False, repr=False)


@dataclass
class RoutingStats:
    fallbacks: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record_fallback(self) -> None:
        with self._lock:
            self.fallbacks += 1


@dataclass
class AgentTrace:
    query: str
    selected_doc_ids: list[str] = field(default_factory=list)
    selection_scores: list[float] = field(default_factory=list)
    engine_choices: dict[str, str] = field(default_factory=dict)
    discarded: dict[str, bool] = field(default_factory=dict)
    failed: dict[str, str] = field(default_factory=dict)
    routing_fallbacks: list[str] = field(default_factory=list)
    exchanges: list[dict[str, str]] = field(default_factory=list)
    zero_context: bool = False
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def refine_attempts(self) -> int:
        return len(self.engine_choices) + len(self.failed)

    def synthesis_prompt(self) -> str:
        return next(e["prompt"] for e in self.exchanges if e["stage"] == "synthesis")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def build_document_agent(
    doc: Document,
    chunks: Sequence[Chunk],
    embedder: Embedder,
    summarizer: Responder,
    k_doc: int = DEFAULT_K_DOC,
    b: int = DEFAULT_BRANCHING,
) -> DocumentAgent:
    stray = [c.chunk_id for c in chunks if c.doc_id != doc.doc_id]
    if stray:
        raise ValidationError(f"chunks {stray} do not belong to document {doc.doc_id!r}")
    return DocumentAgent(
        doc_id=doc.doc_id,
        vector_index=build_index(chunks, embedder),
        summary_tree=build_summary_tree(chunks, summarizer, b),
        k_doc=k_doc,
    )


def build_tool_index(descriptions: Sequence[tuple[str, str]], embedder: Embedder) -> VectorIndex:
    """Index ``(doc_id, description)`` pairs; each entry's id is the doc_id."""
    pseudo_chunks = [
        Chunk(chunk_id=doc_id, doc_id=doc_id, ordinal=0, text=desc, token_span=(0, len(desc.split())))
        for doc_id, desc in descriptions
    ]
    return build_index(pseudo_chunks, embedder)


def build_top_level_agent(
    tools: Sequence[DocumentTool],
    embedder: Embedder,
    tool_index: VectorIndex | None = None,
) -> TopLevelAgent:
    if tool_index is None:
        tool_index = build_tool_index([(t.doc_id, t.description) for t in tools], embedder)
    return TopLevelAgent(tuple(tools), tool_index)


def render_routing_prompt(agent: DocumentAgent, query_text: str) -> str:
    return ROUTING_PROMPT.format(
        doc_id=agent.doc_id,
        vector_description=agent.vector_description,
        summary_description=agent.summary_description,
        query=query_text,
    )


def parse_engine(reply: str) -> Engine | None:
    """First of ``vector`` / ``summary`` to occur in ``reply`` (case-insensitive)."""
    lowered = reply.lower()
    hits = [(lowered.find(word), word) for word in ("vector", "summary")]
    hits = [(pos, word) for pos, word in hits if pos >= 0]
    return min(hits)[1] if hits else None  # type: ignore[return-value]


def route(
    agent: DocumentAgent,
    query_text: str,
    router: Responder,
    stats: RoutingStats | None = None,
    exchanges: list[tuple[str, str, str]] | None = None,
) -> Engine:
    prompt = render_routing_prompt(agent, query_text)
    reply = router.ask(prompt)
    if exchanges is not None:
        exchanges.append(("route", prompt, reply))
    engine = parse_engine(reply)
    if engine is None:
        logger.warning("routing fallback to vector for %s: unparsable reply %r", agent.doc_id, reply)
        if stats is not None:
            stats.record_fallback()
        return "vector"
    return engine


def is_discard(reply: str) -> bool:
    return reply.strip() == NO_RELEVANT_INFORMATION


def refine(
    agent: DocumentAgent,
    query_text: str,
    responder: Responder,
    router: Responder,
    embedder: Embedder,
    stats: RoutingStats | None = None,
) -> RefinedContext:
    exchanges: list[tuple[str, str, str]] = []
    try:
        engine = route(agent, query_text, router, stats, exchanges)
        if engine == "vector":
            hits = query(agent.vector_index, query_text, agent.k_doc, embedder)
            prompt = render_query_prompt([h.text for h in hits], query_text, RELEVANCE_INSTRUCTION)
            reply = responder.ask(prompt)
        else:
            recorder = _RecordingResponder(responder)
            reply = query_summary(agent.summary_tree, query_text, recorder, RELEVANCE_INSTRUCTION)
            prompt = recorder.last_prompt
    except Exception as exc:
        raise RefineError(agent.doc_id, exc) from exc
    exchanges.append(("refine", prompt, reply))
    discarded = is_discard(reply)
    return RefinedContext(
        doc_id=agent.doc_id,
        engine_used=engine,
        text=reply.strip() if discarded else reply,
        discarded=discarded,
        exchanges=exchanges,
    )


class _RecordingResponder:
    def __init__(self, inner: Responder) -> None:
        self.inner = inner
        self.last_prompt = ""

    def ask(self, prompt: str) -> str:
        self.last_prompt = prompt
        return self.inner.ask(prompt)


def select_documents(
    top: TopLevelAgent,
    query_text: str,
    embedder: Embedder,
) -> list[tuple[DocumentTool, float]]:
    hits = query(top.tool_index, query_text, SELECTION_DEPTH, embedder)
    return [(top.tool(h.chunk_id), h.score) for h in hits]


def render_synthesis_prompt(contexts: Sequence[str], user_prompt: str) -> str:
    context = "\n\n".join(contexts) if contexts else EMPTY_CONTEXT_NOTE
    return SYNTHESIS_PROMPT.format(context=context, prompt=user_prompt)


@dataclass
class AgenticAnswer:
    answer: str
    contexts: list[RefinedContext]
    trace: AgentTrace


def answer_agentic(
    top: TopLevelAgent,
    user_prompt: str,
    generator: Responder,
    embedder: Embedder,
    router: Responder,
    responder: Responder | None = None,
    max_workers: int = SELECTION_DEPTH,
) -> AgenticAnswer:
    """Select, refine in parallel, drop discards, synthesize.

    ``responder`` produces the per-document fragments and defaults to the
    generator. A document whose refinement raises is left out and recorded in
    ``trace.failed``; the remaining documents are still used.
    """
    if not user_prompt.strip():
        raise ValidationError("user prompt must be non-empty")
    responder = responder or generator
    trace = AgentTrace(query=user_prompt)
    stats = RoutingStats()

    t0 = time.perf_counter()
    selected = select_documents(top, user_prompt, embedder)
    trace.selected_doc_ids = [t.doc_id for t, _ in selected]
    trace.selection_scores = [s for _, s in selected]
    trace.timings["select_s"] = time.perf_counter() - t0

    def run(tool: DocumentTool) -> RefinedContext | RefineError:
        try:
            return refine(tool.agent, user_prompt, responder, router, embedder, stats)
        except RefineError as exc:
            return exc

    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, min(max_workers, len(selected)))) as pool:
        outcomes = list(pool.map(run, [t for t, _ in selected]))
    trace.timings["refine_s"] = time.perf_counter() - t0

    kept: list[RefinedContext] = []
    for (tool, _), outcome in zip(selected, outcomes):
        if isinstance(outcome, RefineError):
            logger.error("%s", outcome)
            trace.failed[tool.doc_id] = str(outcome)
            continue
        trace.engine_choices[tool.doc_id] = outcome.engine_used
        trace.discarded[tool.doc_id] = outcome.discarded
        for stage, prompt, reply in outcome.exchanges:
            trace.exchanges.append({"stage": stage, "doc_id": tool.doc_id, "prompt": prompt, "reply": reply})
            if stage == "route" and parse_engine(reply) is None:
                trace.routing_fallbacks.append(tool.doc_id)
        if not outcome.discarded:
            kept.append(outcome)

    trace.zero_context = not kept
    prompt = render_synthesis_prompt([c.text for c in kept], user_prompt)
    t0 = time.perf_counter()
    answer = generator.ask(prompt)
    trace.timings["synthesis_s"] = time.perf_counter() - t0
    trace.exchanges.append({"stage": "synthesis", "doc_id": "", "prompt": prompt, "reply": answer})
    return AgenticAnswer(answer=answer, contexts=kept, trace=trace)
