"""Dataset model, judge metrics, multi-run aggregation and reports."""

from agentrag.evalsuite.dataset import (
    DEFAULT_TEMPLATE,
    PromptTemplate,
    QAExample,
    build_prompt,
    build_question,
    category_counts,
    load_dataset,
)
from agentrag.evalsuite.metrics import (
    METRICS,
    Judge,
    answer_consistency,
    augmentation_accuracy,
    augmentation_precision,
    nass,
    retrieval_precision,
    score_record,
)
from agentrag.evalsuite.report import emit_report, load_report
from agentrag.evalsuite.runner import (
    EvalRecord,
    EvaluationAborted,
    MetricReport,
    MetricStats,
    merge_reports,
    run_evaluation,
    summarize_runs,
)

__all__ = [
    "DEFAULT_TEMPLATE",
    "EvalRecord",
    "EvaluationAborted",
    "Judge",
    "METRICS",
    "MetricReport",
    "MetricStats",
    "PromptTemplate",
    "QAExample",
    "answer_consistency",
    "augmentation_accuracy",
    "augmentation_precision",
    "build_prompt",
    "build_question",
    "category_counts",
    "emit_report",
    "load_dataset",
    "load_report",
    "merge_reports",
    "nass",
    "retrieval_precision",
    "run_evaluation",
    "score_record",
    "summarize_runs",
]
