"""The three answer-generation strategies compared by the evaluator."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal, Protocol

from agentrag.agents import AgentTrace, TopLevelAgent, answer_agentic
from agentrag.errors import ValidationError
from agentrag.summary_index import Responder
from agentrag.vector_index import Embedder, VectorIndex, query

PipelineKind = Literal["no_rag", "default_rag", "agentic"]
PIPELINE_KINDS: tuple[PipelineKind, ...] = ("no_rag", "default_rag", "agentic")

DEFAULT_K = 3

DEFAULT_RAG_PROMPT = (
    "Context information is below.\n{context}\n"
    "Given the context information and the task below, produce the output.\n{prompt}"
)


@dataclass
class PipelineOutput:
    answer: str
    contexts: list[str]
    pipeline_kind: PipelineKind
    # chunk ids (default_rag) or doc ids (agentic), parallel to ``contexts``
    sources: list[str] = field(default_factory=list)
    trace: AgentTrace | None = None

    def __post_init__(self) -> None:
        if self.pipeline_kind == "no_rag" and self.contexts:
            raise ValidationError("no_rag output cannot carry contexts")

    @property
    def zero_context(self) -> bool:
        return self.trace.zero_context if self.trace is not None else not self.contexts


class Pipeline(Protocol):
    kind: PipelineKind

    def run(self, user_prompt: str) -> PipelineOutput: ...


def _require_prompt(user_prompt: str) -> None:
    if not user_prompt.strip():
        raise ValidationError("user prompt must be non-empty")


def run_no_rag(user_prompt: str, generator: Responder) -> PipelineOutput:
    _require_prompt(user_prompt)
    return PipelineOutput(answer=generator.ask(user_prompt), contexts=[], pipeline_kind="no_rag")


def render_default_rag_prompt(contexts: Sequence[str], user_prompt: str) -> str:
    return DEFAULT_RAG_PROMPT.format(context="\n\n".join(contexts), prompt=user_prompt)


def run_default_rag(
    user_prompt: str,
    global_index: VectorIndex,
    generator: Responder,
    embedder: Embedder,
    k: int = DEFAULT_K,
) -> PipelineOutput:
    _require_prompt(user_prompt)
    hits = query(global_index, user_prompt, k, embedder)
    contexts = [h.text for h in hits]
    answer = generator.ask(render_default_rag_prompt(contexts, user_prompt))
    return PipelineOutput(
        answer=answer,
        contexts=contexts,
        pipeline_kind="default_rag",
        sources=[h.chunk_id for h in hits],
    )


def run_agentic(
    user_prompt: str,
    top: TopLevelAgent,
    generator: Responder,
    embedder: Embedder,
    router: Responder,
    responder: Responder | None = None,
) -> PipelineOutput:
    result = answer_agentic(top, user_prompt, generator, embedder, router, responder)
    return PipelineOutput(
        answer=result.answer,
        contexts=[c.text for c in result.contexts],
        pipeline_kind="agentic",
        sources=[c.doc_id for c in result.contexts],
        trace=result.trace,
    )


@dataclass
class NoRagPipeline:
    generator: Responder
    kind: PipelineKind = "no_rag"

    def run(self, user_prompt: str) -> PipelineOutput:
        return run_no_rag(user_prompt, self.generator)


@dataclass
class DefaultRagPipeline:
    global_index: VectorIndex
    generator: Responder
    embedder: Embedder
    k: int = DEFAULT_K
    kind: PipelineKind = "default_rag"

    def run(self, user_prompt: str) -> PipelineOutput:
        return run_default_rag(user_prompt, self.global_index, self.generator, self.embedder, self.k)


@dataclass
class AgenticPipeline:
    top: TopLevelAgent
    generator: Responder
    embedder: Embedder
    router: Responder
    responder: Responder | None = None
    kind: PipelineKind = "agentic"

    def run(self, user_prompt: str) -> PipelineOutput:
        return run_agentic(user_prompt, self.top, self.generator, self.embedder, self.router, self.responder)
