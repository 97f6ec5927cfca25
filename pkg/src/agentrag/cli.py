"""Command-line interface: ``agentrag ingest | ask | eval``.

Exit codes: 0 success, 1 usage error, 2 runtime error. Errors are printed to
stderr as a single ``agentrag: error[<kind>]: <message>`` line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from agentrag.config import AppConfig, Models, load_config, make_models, override
from agentrag.corpus import load_corpus
from agentrag.errors import AgentRagError
from agentrag.evalsuite.dataset import (
    DEFAULT_TEMPLATE,
    QAExample,
    build_question,
    category_counts,
    load_dataset,
)
from agentrag.evalsuite.metrics import Judge
from agentrag.evalsuite.report import emit_report
from agentrag.evalsuite.runner import EvalRecord, merge_reports, run_evaluation
from agentrag.indexdir import build_artifacts, load_pooled_index, load_top_level_agent, write_artifacts
from agentrag.pipelines import AgenticPipeline, DefaultRagPipeline, NoRagPipeline, Pipeline
from agentrag.storage import atomic_write_text

logger = logging.getLogger("agentrag")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

PIPELINE_FLAGS = {"no-rag": "no_rag", "default": "default_rag", "agentic": "agentic"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _common_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="TOML config file")
    p.add_argument("--backend", choices=["live", "scripted"])
    p.add_argument("--transcript", type=Path, help="scripted backend transcript (JSON)")
    p.add_argument("--index-dir", type=Path)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(prog="agentrag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ingest = sub.add_parser("ingest", parents=[common], help="chunk, embed and summarize a corpus")
    ingest.add_argument("--manifest", type=Path)

    ask = sub.add_parser("ask", parents=[common], help="answer one question through a pipeline")
    ask.add_argument("--pipeline", required=True, choices=sorted(PIPELINE_FLAGS))
    ask.add_argument("--prompt-file", type=Path, help="file holding the complete prompt")
    ask.add_argument("--pipeline-text", help="component pipeline (builds the prompt from the template)")
    ask.add_argument("--insufficiency")
    ask.add_argument("--trigger")
    ask.add_argument("--trace", type=Path, help="write contexts and the agent trace to this JSON file")

    ev = sub.add_parser("eval", parents=[common], help="run the multi-run metric evaluation")
    ev.add_argument("--dataset", type=Path, required=True)
    ev.add_argument("--pipelines", default="no-rag,default,agentic",
                    help="comma-separated subset of no-rag,default,agentic")
    ev.add_argument("--runs", type=int)
    ev.add_argument("--out", type=Path, required=True)
    ev.add_argument("--trace", action="store_true", help="also write every record to records.jsonl")
    return parser


def _config(args: argparse.Namespace) -> AppConfig:
    cfg = load_config(args.config)
    cfg = override(
        cfg,
        backend=args.backend,
        transcript=args.transcript,
        index_dir=args.index_dir,
        manifest=getattr(args, "manifest", None),
        n_runs=getattr(args, "runs", None),
    )
    return cfg.validate()


def _pipeline(kind: str, cfg: AppConfig, models: Models) -> Pipeline:
    if kind == "no_rag":
        return NoRagPipeline(models.generator)
    if kind == "default_rag":
        return DefaultRagPipeline(load_pooled_index(cfg.index_dir), models.generator, models.backend, cfg.k)
    return AgenticPipeline(
        load_top_level_agent(cfg.index_dir, cfg.k_doc), models.generator, models.backend, models.router
    )


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if cfg.manifest is None:
        raise UsageError("no corpus manifest given (--manifest or `manifest` in the config)")
    docs = load_corpus(cfg.manifest)
    models = make_models(cfg)
    art = build_artifacts(docs, cfg.chunking, models.backend, models.summarizer, cfg.branching)
    written = write_artifacts(cfg.index_dir, art)
    print(f"ingested {len(docs)} documents into {cfg.index_dir} ({len(written)} files)")
    return EXIT_OK


def _ask_prompt(args: argparse.Namespace) -> str:
    if args.prompt_file is not None:
        if args.pipeline_text or args.insufficiency:
            raise UsageError("use either --prompt-file or --pipeline-text/--insufficiency, not both")
        try:
            return args.prompt_file.read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read prompt file {args.prompt_file}: {exc.strerror}") from None
    if not (args.pipeline_text and args.insufficiency):
        raise UsageError("give --prompt-file, or both --pipeline-text and --insufficiency")
    ex = QAExample(
        example_id="cli",
        category="safety_tactic",
        pipeline_text=args.pipeline_text,
        insufficiency=args.insufficiency,
        reference_answer="(none)",
        trigger_condition=args.trigger,
    )
    return DEFAULT_TEMPLATE.render(build_question(ex))


def cmd_ask(args: argparse.Namespace) -> int:
    prompt = _ask_prompt(args)
    cfg = _config(args)
    models = make_models(cfg)
    out = _pipeline(PIPELINE_FLAGS[args.pipeline], cfg, models).run(prompt)
    print(out.answer)
    if args.trace is not None:
        payload = {
            "pipeline_kind": out.pipeline_kind,
            "prompt": prompt,
            "answer": out.answer,
            "contexts": out.contexts,
            "sources": out.sources,
            "trace": out.trace.to_dict() if out.trace is not None else None,
        }
        atomic_write_text(args.trace, json.dumps(payload, indent=1) + "\n")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    kinds = []
    for flag in (s.strip() for s in args.pipelines.split(",") if s.strip()):
        if flag not in PIPELINE_FLAGS:
            raise UsageError(f"unknown pipeline {flag!r}; choose from {', '.join(PIPELINE_FLAGS)}")
        kinds.append(PIPELINE_FLAGS[flag])
    if not kinds:
        raise UsageError("--pipelines is empty")
    if not args.dataset.exists():
        raise UsageError(f"dataset not found: {args.dataset}")
    if args.runs is not None and args.runs < 1:
        raise UsageError("--runs must be >= 1")
    cfg = _config(args)
    dataset = load_dataset(args.dataset)
    logger.info("dataset categories: %s", category_counts(dataset))
    models = make_models(cfg)
    judge = Judge(models.judge)
    pipelines = [_pipeline(kind, cfg, models) for kind in kinds]

    records: list[EvalRecord] = []
    reports = []
    for pipeline in pipelines:
        report = run_evaluation(
            dataset, pipeline, judge, n_runs=cfg.n_runs, max_workers=cfg.concurrency, on_record=records.append
        )
        emit_report(report, "json", args.out / f"report_{pipeline.kind}.json")
        reports.append(report)
    combined = merge_reports(reports)
    for fmt in ("json", "csv", "md"):
        emit_report(combined, fmt, args.out / f"comparison.{fmt}")
    if args.trace:
        lines = [json.dumps(r.__dict__, sort_keys=True) for r in records]
        atomic_write_text(args.out / "records.jsonl", "\n".join(lines) + "\n")
    print((args.out / "comparison.md").read_text(encoding="utf-8"), end="")
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "ask": cmd_ask, "eval": cmd_eval}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"agentrag: error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"agentrag: error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AgentRagError as exc:
        print(f"agentrag: error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
