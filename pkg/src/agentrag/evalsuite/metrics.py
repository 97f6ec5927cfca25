"""LLM-judged answer and context metrics, all normalized to [0, 1].

NASS  similarity of answer to reference (judge score 0-5, divided by 5)
RP    fraction of retrieved contexts the judge calls relevant to the question
AA    fraction of retrieved contexts the judge says the answer uses
AP    among relevant contexts, the fraction used (derived from the RP/AA flags)
AC    fraction of the answer's main points the judge finds in the context

A metric that cannot be computed for a record (empty contexts, an undefined
denominator, a judge reply that stays unparsable after one re-ask) is
returned as ``None`` and excluded from aggregation.
"""

from __future__ import annotations

import re
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from agentrag.gateway import ChatMessage, ChatModel

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

METRICS = ("NASS", "RP", "AA", "AP", "AC")
CONTEXT_METRICS = ("RP", "AA", "AP", "AC")
NASS_SCALE = 5.0

_NUMBER = re.compile(r"\d+(?:\.\d+)?")
_VERDICT = re.compile(r"\b(yes|no|true|false)\b", re.IGNORECASE)
_LIST_ITEM = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s+(.+?)\s*$")


@lru_cache(maxsize=None)
def load_judge_prompts() -> dict[str, str | int]:
    text = resources.files("agentrag.evalsuite").joinpath("judge_prompts.toml").read_text(encoding="utf-8")
    return tomllib.loads(text)


def parse_score(reply: str) -> float | None:
    """First number in ``reply`` if it is a multiple of 0.5 within [0, 5]."""
    m = _NUMBER.search(reply)
    if m is None:
        return None
    value = float(m.group())
    if not 0.0 <= value <= NASS_SCALE or (value * 2) != int(value * 2):
        return None
    return value


def parse_verdict(reply: str) -> bool | None:
    m = _VERDICT.search(reply)
    if m is None:
        return None
    return m.group(1).lower() in ("yes", "true")


def parse_points(reply: str) -> list[str]:
    return [m.group(1) for line in reply.splitlines() if (m := _LIST_ITEM.match(line))]


def flag_ratio(flags: Sequence[bool] | None) -> float | None:
    if not flags:
        return None
    return sum(flags) / len(flags)


class Judge:
    """Asks constrained questions of a judge model, re-asking once on an unparsable reply."""

    def __init__(self, model: ChatModel, prompts: dict | None = None) -> None:
        self.model = model
        self.prompts = prompts if prompts is not None else load_judge_prompts()

    @property
    def prompt_version(self) -> int:
        return int(self.prompts.get("version", 0))

    def _ask(self, prompt: str, parse, reask_key: str):
        messages = [ChatMessage("user", prompt)]
        reply = self.model.chat(messages)
        parsed = parse(reply)
        if parsed is None or parsed == []:
            messages += [ChatMessage("assistant", reply), ChatMessage("user", str(self.prompts[reask_key]))]
            parsed = parse(self.model.chat(messages))
        return None if parsed == [] else parsed

    def score(self, template: str, **slots: str) -> float | None:
        return self._ask(str(self.prompts[template]).format(**slots), parse_score, "reask_number")

    def verdict(self, template: str, **slots: str) -> bool | None:
        return self._ask(str(self.prompts[template]).format(**slots), parse_verdict, "reask_yes_no")

    def points(self, template: str, **slots: str) -> list[str] | None:
        return self._ask(str(self.prompts[template]).format(**slots), parse_points, "reask_points")


def nass(judge: Judge, question: str, reference: str, answer: str) -> float | None:
    s = judge.score("answer_similarity", question=question, reference=reference, answer=answer)
    return None if s is None else s / NASS_SCALE


def _verdicts(judge: Judge, template: str, items: Sequence[dict[str, str]]) -> list[bool] | None:
    flags = []
    for slots in items:
        v = judge.verdict(template, **slots)
        if v is None:
            return None
        flags.append(v)
    return flags


def relevance_flags(judge: Judge, question: str, contexts: Sequence[str]) -> list[bool] | None:
    if not contexts:
        return None
    return _verdicts(judge, "context_relevance", [{"question": question, "context": c} for c in contexts])


def usage_flags(judge: Judge, contexts: Sequence[str], answer: str) -> list[bool] | None:
    if not contexts:
        return None
    return _verdicts(judge, "context_usage", [{"context": c, "answer": answer} for c in contexts])


def retrieval_precision(judge: Judge, question: str, contexts: Sequence[str]) -> float | None:
    return flag_ratio(relevance_flags(judge, question, contexts))


def augmentation_accuracy(judge: Judge, contexts: Sequence[str], answer: str) -> float | None:
    return flag_ratio(usage_flags(judge, contexts, answer))


def augmentation_precision(
    relevance: Sequence[bool] | None, usage: Sequence[bool] | None
) -> float | None:
    """Share of relevant contexts that were also used; ``None`` if nothing is relevant."""
    if relevance is None or usage is None:
        return None
    if len(relevance) != len(usage):
        raise ValueError(f"flag lists differ in length: {len(relevance)} vs {len(usage)}")
    relevant = sum(relevance)
    if relevant == 0:
        return None
    return sum(r and u for r, u in zip(relevance, usage)) / relevant


@dataclass
class ConsistencyResult:
    points: list[str] = field(default_factory=list)
    supported: list[bool] = field(default_factory=list)
    value: float | None = None


def answer_consistency_detail(judge: Judge, answer: str, contexts: Sequence[str]) -> ConsistencyResult:
    if not contexts:
        return ConsistencyResult()
    points = judge.points("main_points", answer=answer)
    if not points:
        return ConsistencyResult()
    joined = "\n\n".join(contexts)
    flags = _verdicts(judge, "point_support", [{"point": p, "context": joined} for p in points])
    if flags is None:
        return ConsistencyResult(points=points)
    return ConsistencyResult(points=points, supported=flags, value=flag_ratio(flags))


def answer_consistency(judge: Judge, answer: str, contexts: Sequence[str]) -> float | None:
    return answer_consistency_detail(judge, answer, contexts).value


@dataclass
class RecordScores:
    values: dict[str, float | None]
    relevance: list[bool] | None = None
    usage: list[bool] | None = None
    main_points: list[str] = field(default_factory=list)
    points_supported: list[bool] = field(default_factory=list)


def score_record(
    judge: Judge,
    question: str,
    reference: str,
    answer: str,
    contexts: Sequence[str],
) -> RecordScores:
    """All five metrics for one record. Context metrics are left out when ``contexts`` is empty.

    AP reuses the RP and AA flags; it never triggers judge calls of its own.
    """
    values: dict[str, float | None] = {"NASS": nass(judge, question, reference, answer)}
    if not contexts:
        return RecordScores(values)
    rel = relevance_flags(judge, question, contexts)
    use = usage_flags(judge, contexts, answer)
    ac = answer_consistency_detail(judge, answer, contexts)
    values["RP"] = flag_ratio(rel)
    values["AA"] = flag_ratio(use)
    values["AP"] = augmentation_precision(rel, use)
    values["AC"] = ac.value
    return RecordScores(values, rel, use, ac.points, ac.supported)
