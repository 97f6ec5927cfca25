"""Report emission in JSON (canonical), CSV and Markdown."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from agentrag.evalsuite.metrics import METRICS
from agentrag.evalsuite.runner import MetricReport
from agentrag.storage import atomic_write_text, dumps, read_json

FORMATS = ("json", "csv", "md")

_PIPELINE_LABELS = {"no_rag": "No RAG", "default_rag": "Default RAG", "agentic": "Agent-based RAG"}


def render_json(report: MetricReport) -> str:
    return dumps(report.to_dict())


def render_csv(report: MetricReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pipeline", "metric", "mean", "stderr", "n_runs", "skipped"])
    for kind in report.pipelines():
        for metric in METRICS:
            stats = report.results[kind].get(metric)
            if stats is None:
                continue
            skipped = report.skipped_counts.get(kind, {}).get(metric, 0)
            writer.writerow([kind, metric, repr(stats.mean), repr(stats.stderr), stats.n_runs, skipped])
    return buf.getvalue()


def render_markdown(report: MetricReport) -> str:
    kinds = report.pipelines()
    header = "| Metric | " + " | ".join(_PIPELINE_LABELS.get(k, k) for k in kinds) + " |"
    lines = [header, "|" + "---|" * (len(kinds) + 1)]
    for metric in METRICS:
        cells = []
        for kind in kinds:
            stats = report.results[kind].get(metric)
            cells.append("n/a" if stats is None else f"{stats.mean:.3f} ± {stats.stderr:.3f}")
        lines.append(f"| {metric} | " + " | ".join(cells) + " |")
    n_runs = max((s.n_runs for m in report.results.values() for s in m.values()), default=0)
    lines.append("")
    lines.append(f"Mean ± standard error over {n_runs} run(s), {report.n_examples} example(s).")
    return "\n".join(lines) + "\n"


def emit_report(report: MetricReport, fmt: str, path: str | Path) -> Path:
    renderers = {"json": render_json, "csv": render_csv, "md": render_markdown}
    if fmt not in renderers:
        raise ValueError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
    path = Path(path)
    atomic_write_text(path, renderers[fmt](report))
    return path


def load_report(path: str | Path) -> MetricReport:
    return MetricReport.from_dict(read_json(path))
