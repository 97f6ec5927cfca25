"""Repeated evaluation runs and their aggregation into mean and standard error."""

from __future__ import annotations

import logging
import math
import statistics
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from agentrag.errors import AgentRagError, ValidationError
from agentrag.evalsuite.dataset import DEFAULT_TEMPLATE, PromptTemplate, QAExample, build_question
from agentrag.evalsuite.metrics import METRICS, Judge, score_record
from agentrag.pipelines import PIPELINE_KINDS, Pipeline

logger = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.2


class EvaluationAborted(AgentRagError):
    def __init__(self, pipeline_kind: str, run: int, failed: int, total: int) -> None:
        super().__init__(
            f"{pipeline_kind} run {run}: {failed}/{total} records failed "
            f"(limit {MAX_FAILURE_RATE:.0%}); run aborted"
        )
        self.run = run
        self.failed = failed
        self.total = total


@dataclass
class EvalRecord:
    example_id: str
    pipeline_kind: str
    run: int
    question: str
    prompt: str
    contexts: list[str]
    answer: str
    reference: str
    scores: dict[str, float | None] = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    error: str | None = None
    trace: dict | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class MetricStats:
    mean: float
    stderr: float
    run_means: list[float]
    n_runs: int


def summarize_runs(run_means: Sequence[float]) -> MetricStats:
    """Mean of per-run means; stderr is the sample std of run means over sqrt(n)."""
    if not run_means:
        raise ValidationError("need at least one run mean")
    n = len(run_means)
    mean = statistics.fmean(run_means)
    stderr = statistics.stdev(run_means) / math.sqrt(n) if n > 1 else 0.0
    return MetricStats(mean=mean, stderr=stderr, run_means=list(run_means), n_runs=n)


@dataclass
class MetricReport:
    results: dict[str, dict[str, MetricStats]]
    n_examples: int
    skipped_counts: dict[str, dict[str, int]] = field(default_factory=dict)
    failed_counts: dict[str, int] = field(default_factory=dict)
    judge_prompt_version: int = 0

    def pipelines(self) -> list[str]:
        return [k for k in PIPELINE_KINDS if k in self.results] + sorted(
            k for k in self.results if k not in PIPELINE_KINDS
        )

    def to_dict(self) -> dict:
        return {
            "results": {
                kind: {m: asdict(s) for m, s in metrics.items()} for kind, metrics in self.results.items()
            },
            "metadata": {
                "n_examples": self.n_examples,
                "skipped_counts": self.skipped_counts,
                "failed_counts": self.failed_counts,
                "judge_prompt_version": self.judge_prompt_version,
            },
        }

    @classmethod
    def from_dict(cls, raw: dict) -> MetricReport:
        meta = raw["metadata"]
        return cls(
            results={
                kind: {m: MetricStats(**s) for m, s in metrics.items()}
                for kind, metrics in raw["results"].items()
            },
            n_examples=meta["n_examples"],
            skipped_counts=meta.get("skipped_counts", {}),
            failed_counts=meta.get("failed_counts", {}),
            judge_prompt_version=meta.get("judge_prompt_version", 0),
        )


def merge_reports(reports: Sequence[MetricReport]) -> MetricReport:
    if not reports:
        raise ValidationError("nothing to merge")
    merged = MetricReport(results={}, n_examples=reports[0].n_examples,
                          judge_prompt_version=reports[0].judge_prompt_version)
    for r in reports:
        overlap = set(merged.results) & set(r.results)
        if overlap:
            raise ValidationError(f"pipelines reported twice: {sorted(overlap)}")
        merged.results.update(r.results)
        merged.skipped_counts.update(r.skipped_counts)
        merged.failed_counts.update(r.failed_counts)
    return merged


def applicable_metrics(pipeline_kind: str) -> tuple[str, ...]:
    return ("NASS",) if pipeline_kind == "no_rag" else METRICS


def evaluate_example(
    ex: QAExample,
    pipeline: Pipeline,
    judge: Judge,
    run: int,
    template: PromptTemplate = DEFAULT_TEMPLATE,
) -> EvalRecord:
    """Run one example through the pipeline and the judge. Exceptions become a failed record."""
    question = build_question(ex)
    prompt = template.render(question)
    record = EvalRecord(
        example_id=ex.example_id,
        pipeline_kind=pipeline.kind,
        run=run,
        question=question,
        prompt=prompt,
        contexts=[],
        answer="",
        reference=ex.reference_answer,
    )
    try:
        out = pipeline.run(prompt)
        record.contexts = list(out.contexts)
        record.answer = out.answer
        if out.trace is not None:
            record.trace = out.trace.to_dict()
        scores = score_record(judge, question, ex.reference_answer, out.answer, out.contexts)
    except Exception as exc:  # noqa: BLE001 - a failed record is counted, not fatal
        logger.error("record %s (%s, run %d) failed: %s", ex.example_id, pipeline.kind, run, exc)
        record.error = f"{type(exc).__name__}: {exc}"
        return record
    record.scores = scores.values
    record.artifacts = {
        "relevance_flags": scores.relevance,
        "usage_flags": scores.usage,
        "main_points": scores.main_points,
        "points_supported": scores.points_supported,
    }
    return record


def run_evaluation(
    dataset: Sequence[QAExample],
    pipeline: Pipeline,
    judge: Judge,
    n_runs: int = 10,
    template: PromptTemplate = DEFAULT_TEMPLATE,
    max_workers: int = 4,
    on_record: Callable[[EvalRecord], None] | None = None,
) -> MetricReport:
    """Evaluate every example ``n_runs`` times and aggregate per metric.

    Within a run, records may be processed concurrently; runs are sequential.
    A run in which more than 20% of records fail raises ``EvaluationAborted``.
    """
    if n_runs < 1:
        raise ValidationError("n_runs must be >= 1")
    kind = pipeline.kind
    metrics = applicable_metrics(kind)
    run_means: dict[str, list[float]] = {m: [] for m in metrics}
    skipped = {m: 0 for m in metrics}
    failed_total = 0

    for run in range(n_runs):
        with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
            records = list(pool.map(lambda ex: evaluate_example(ex, pipeline, judge, run, template), dataset))
        failed = sum(r.failed for r in records)
        failed_total += failed
        if dataset and failed / len(dataset) > MAX_FAILURE_RATE:
            raise EvaluationAborted(kind, run, failed, len(dataset))
        for r in records:
            if on_record is not None:
                on_record(r)
        ok = [r for r in records if not r.failed]
        for m in metrics:
            values = [r.scores[m] for r in ok if r.scores.get(m) is not None]
            skipped[m] += len(ok) - len(values)
            if values:
                run_means[m].append(statistics.fmean(values))

    results = {m: summarize_runs(v) for m, v in run_means.items() if v}
    return MetricReport(
        results={kind: results},
        n_examples=len(dataset),
        skipped_counts={kind: skipped},
        failed_counts={kind: failed_total},
        judge_prompt_version=judge.prompt_version,
    )
