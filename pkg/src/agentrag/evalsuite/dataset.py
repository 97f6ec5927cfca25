"""Question/reference-answer dataset and the safety-engineer prompt template."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

from agentrag.errors import LoadError, ValidationError

logger = logging.getLogger(__name__)

CATEGORIES = ("safety_tactic", "ml_design")

SAFETY_ENGINEER_PREAMBLE = (
    "Act as a safety engineer, who has the task to derive safety requirements for a given component pipeline.\n"
    "As input, you are given the pipeline, a known potential functional insufficiency, and possibly a trigger condition.\n"
    "Output a safety requirement, i.e. a description how the function of the component pipeline shall not "
    "perform in case the known insufficiency occurs.\n"
    "Consider the function of the component pipeline and possible further downstream system functions to "
    "state what shall not happen in case of the functional insufficiency.\n"
    "Keep your answer as brief as a single sentence, but make sure a system-specific requirement is given.\n"
    "Begin your statement with 'If...'\n"
)


@dataclass(frozen=True)
class QAExample:
    example_id: str
    category: str
    pipeline_text: str
    insufficiency: str
    reference_answer: str
    trigger_condition: str | None = None

    def __post_init__(self) -> None:
        for name in ("pipeline_text", "insufficiency", "reference_answer"):
            if not getattr(self, name).strip():
                raise ValidationError(f"example {self.example_id!r}: {name} must be non-empty")
        if self.category not in CATEGORIES:
            raise ValidationError(f"example {self.example_id!r}: unknown category {self.category!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["trigger_condition"] is None:
            del d["trigger_condition"]
        return d


@dataclass(frozen=True)
class PromptTemplate:
    system_preamble: str = SAFETY_ENGINEER_PREAMBLE

    def render(self, question: str) -> str:
        return f"{self.system_preamble}\nINPUT: ///{question}///\n\nOUTPUT:"


DEFAULT_TEMPLATE = PromptTemplate()


def load_dataset(path: str | Path) -> list[QAExample]:
    """Parse a JSONL dataset; schema problems are reported with their line number."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise LoadError(f"dataset not found: {path}") from None

    examples: list[QAExample] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(raw, dict):
            raise ValidationError(f"{path}:{lineno}: expected a JSON object")
        missing = [
            k
            for k in ("example_id", "category", "pipeline_text", "insufficiency", "reference_answer")
            if k not in raw
        ]
        if missing:
            raise ValidationError(f"{path}:{lineno}: missing field(s) {', '.join(missing)}")
        trigger = raw.get("trigger_condition")
        try:
            examples.append(
                QAExample(
                    example_id=str(raw["example_id"]),
                    category=str(raw["category"]),
                    pipeline_text=str(raw["pipeline_text"]),
                    insufficiency=str(raw["insufficiency"]),
                    reference_answer=str(raw["reference_answer"]),
                    trigger_condition=str(trigger) if trigger not in (None, "") else None,
                )
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None

    ids = [e.example_id for e in examples]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: duplicate example_id values")
    if not examples:
        logger.warning("dataset %s is empty", path)
    else:
        counts = category_counts(examples)
        logger.info("loaded %d examples from %s (%s)", len(examples), path,
                    ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return examples


def category_counts(examples: list[QAExample]) -> dict[str, int]:
    return dict(Counter(e.category for e in examples))


def build_question(ex: QAExample) -> str:
    question = f"Pipeline: {ex.pipeline_text}, Known potential function insufficiency: {ex.insufficiency}"
    if ex.trigger_condition:
        question += f", Trigger condition: {ex.trigger_condition}"
    return question


def build_prompt(ex: QAExample, template: PromptTemplate = DEFAULT_TEMPLATE) -> str:
    return template.render(build_question(ex))
