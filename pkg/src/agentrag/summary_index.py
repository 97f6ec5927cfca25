"""Bottom-up tree of LLM summaries over one document's chunks.

Level 0 holds the chunk texts. Each higher level groups consecutive runs of
at most ``b`` nodes and asks the summarizer for one summary per group, until a
single root remains. Summarization questions are answered from the root and
the level-1 summaries.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from agentrag.corpus import Chunk
from agentrag.errors import AgentRagError, LoadError, ValidationError
from agentrag.storage import atomic_write_json, read_json

FORMAT_VERSION = 1
DEFAULT_BRANCHING = 10

SUMMARIZE_PROMPT = "Summarize the following text faithfully and concisely:\n{text}"
SUMMARY_QUERY_INSTRUCTION = "Answer the summarization query using only the document summaries below."
QUERY_PROMPT = "{instruction}\nContext:{context}\nQuery:{query}"


class Responder(Protocol):
    def ask(self, prompt: str) -> str: ...


class SummaryBuildError(AgentRagError):
    def __init__(self, doc_id: str, level: int, group: int, cause: Exception) -> None:
        super().__init__(f"summarizing {doc_id!r} failed at level {level}, group {group}: {cause}")
        self.doc_id = doc_id
        self.level = level
        self.group = group


@dataclass(frozen=True)
class SummaryNode:
    summary_text: str
    child_indices: tuple[int, ...] = ()


@dataclass(frozen=True)
class SummaryTree:
    doc_id: str
    levels: tuple[tuple[SummaryNode, ...], ...]
    branching: int = DEFAULT_BRANCHING

    def __post_init__(self) -> None:
        if self.branching < 2:
            raise ValidationError("branching factor must be >= 2")
        if len(self.levels) < 2 or not self.levels[0]:
            raise ValidationError("a summary tree needs leaves and at least one summary level")
        if len(self.levels[-1]) != 1:
            raise ValidationError("the top level must hold exactly one node")
        for depth in range(1, len(self.levels)):
            below, here = self.levels[depth - 1], self.levels[depth]
            if len(here) != -(-len(below) // self.branching):
                raise ValidationError(f"level {depth} has {len(here)} nodes, expected ceil({len(below)}/b)")
            expected = 0
            for node in here:
                kids = node.child_indices
                if not 1 <= len(kids) <= self.branching:
                    raise ValidationError(f"level {depth} node has {len(kids)} children")
                if list(kids) != list(range(expected, expected + len(kids))):
                    raise ValidationError(f"level {depth} children are not consecutive")
                expected += len(kids)
            if expected != len(below):
                raise ValidationError(f"level {depth} does not cover level {depth - 1}")

    @property
    def leaves(self) -> list[str]:
        return [n.summary_text for n in self.levels[0]]

    @property
    def root(self) -> SummaryNode:
        return self.levels[-1][0]

    def level_sizes(self) -> list[int]:
        return [len(level) for level in self.levels]

    def leaf_range(self, level: int, index: int) -> tuple[int, int]:
        """Half-open range of leaf indices covered by node ``index`` at ``level``."""
        lo = hi = index
        for depth in range(level, 0, -1):
            lo = self.levels[depth][lo].child_indices[0]
            hi = self.levels[depth][hi].child_indices[-1]
        return lo, hi + 1


def summary_call_count(n_leaves: int, b: int) -> int:
    """Summarizer calls needed for ``n_leaves`` leaves: the node count above level 0."""
    total, n = 0, n_leaves
    while True:
        n = -(-n // b)
        total += n
        if n == 1:
            return total


def build_summary_tree(
    chunks: Sequence[Chunk],
    summarizer: Responder,
    b: int = DEFAULT_BRANCHING,
    max_workers: int = 4,
) -> SummaryTree:
    if not chunks:
        raise ValidationError("cannot summarize zero chunks")
    if b < 2:
        raise ValidationError("branching factor must be >= 2")
    doc_id = chunks[0].doc_id
    levels: list[tuple[SummaryNode, ...]] = [tuple(SummaryNode(c.text) for c in chunks)]

    # at least one summary level even for a single leaf
    while len(levels) == 1 or len(levels[-1]) > 1:
        below = levels[-1]
        groups = [tuple(range(i, min(i + b, len(below)))) for i in range(0, len(below), b)]
        prompts = [
            SUMMARIZE_PROMPT.format(text="\n\n".join(below[j].summary_text for j in g)) for g in groups
        ]
        depth = len(levels)

        def summarize(i: int) -> str:
            try:
                return summarizer.ask(prompts[i])
            except Exception as exc:
                raise SummaryBuildError(doc_id, depth, i, exc) from exc

        with ThreadPoolExecutor(max_workers=max(1, min(max_workers, len(groups)))) as pool:
            texts = list(pool.map(summarize, range(len(groups))))
        levels.append(tuple(SummaryNode(t, g) for t, g in zip(texts, groups)))

    return SummaryTree(doc_id, tuple(levels), b)


def summary_context(tree: SummaryTree) -> list[str]:
    """Root summary followed by the level-1 summaries; raw leaves are never included."""
    parts = [tree.root.summary_text]
    if len(tree.levels) > 2:
        parts.extend(n.summary_text for n in tree.levels[1])
    return parts


def render_query_prompt(context_parts: Sequence[str], query: str, instruction: str) -> str:
    return QUERY_PROMPT.format(instruction=instruction, context="\n\n".join(context_parts), query=query)


def query_summary(
    tree: SummaryTree,
    query: str,
    responder: Responder,
    instruction: str = SUMMARY_QUERY_INSTRUCTION,
) -> str:
    return responder.ask(render_query_prompt(summary_context(tree), query, instruction))


def tree_to_dict(tree: SummaryTree) -> dict:
    return {
        "version": FORMAT_VERSION,
        "doc_id": tree.doc_id,
        "b": tree.branching,
        "levels": [
            [{"summary_text": n.summary_text, "child_indices": list(n.child_indices)} for n in level]
            for level in tree.levels
        ],
    }


def tree_from_dict(raw: dict, source: str = "<memory>") -> SummaryTree:
    if not isinstance(raw, dict) or raw.get("version") != FORMAT_VERSION:
        raise LoadError(f"{source}: field 'version' must be {FORMAT_VERSION}")
    try:
        levels = tuple(
            tuple(SummaryNode(str(n["summary_text"]), tuple(int(c) for c in n["child_indices"])) for n in level)
            for level in raw["levels"]
        )
        return SummaryTree(str(raw["doc_id"]), levels, int(raw["b"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise LoadError(f"{source}: malformed summary tree ({exc!r})") from None


def save_tree(tree: SummaryTree, path: str | Path) -> None:
    atomic_write_json(path, tree_to_dict(tree))


def load_tree(path: str | Path) -> SummaryTree:
    return tree_from_dict(read_json(path), str(path))
