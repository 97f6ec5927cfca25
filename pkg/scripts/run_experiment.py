"""Run the three-way pipeline comparison end to end and check its direction.

Ingests the corpus named in the config, evaluates no-RAG, default RAG and
agentic RAG over the dataset, writes the reports, and prints whether agentic
retrieval precision beats default RAG and whether the three NASS means lie
within ``--nass-band`` of each other.

Scripted, offline::

    python scripts/run_experiment.py --config tests/fixtures/crafted/config.toml \
        --dataset tests/fixtures/crafted/dataset.jsonl --out results/crafted

Live (needs RAG_BASE_URL and RAG_API_KEY)::

    python scripts/run_experiment.py --config live.toml --dataset data.jsonl \
        --out results/live --runs 3 --backend live
"""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
from pathlib import Path

from agentrag.config import load_config, make_models, override
from agentrag.corpus import load_corpus
from agentrag.evalsuite import Judge, emit_report, load_dataset, merge_reports, run_evaluation
from agentrag.indexdir import build_artifacts, load_pooled_index, load_top_level_agent, write_artifacts
from agentrag.pipelines import AgenticPipeline, DefaultRagPipeline, NoRagPipeline

logger = logging.getLogger("run_experiment")


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--runs", type=int, help="overrides n_runs from the config")
    p.add_argument("--backend", choices=["live", "scripted"])
    p.add_argument("--nass-band", type=float, default=0.15)
    return p.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    with tempfile.TemporaryDirectory() as index_dir:
        cfg = override(load_config(args.config), backend=args.backend, n_runs=args.runs,
                       index_dir=Path(index_dir)).validate()
        models = make_models(cfg)
        docs = load_corpus(cfg.manifest)
        logger.info("ingesting %d documents", len(docs))
        write_artifacts(cfg.index_dir,
                        build_artifacts(docs, cfg.chunking, models.backend, models.summarizer, cfg.branching))

        dataset = load_dataset(args.dataset)
        judge = Judge(models.judge)
        pipelines = [
            NoRagPipeline(models.generator),
            DefaultRagPipeline(load_pooled_index(cfg.index_dir), models.generator, models.backend, cfg.k),
            AgenticPipeline(load_top_level_agent(cfg.index_dir, cfg.k_doc), models.generator,
                            models.backend, models.router),
        ]
        reports = []
        for pipeline in pipelines:
            logger.info("evaluating %s over %d runs", pipeline.kind, cfg.n_runs)
            reports.append(run_evaluation(dataset, pipeline, judge, n_runs=cfg.n_runs,
                                          max_workers=cfg.concurrency))

    combined = merge_reports(reports)
    for fmt in ("json", "csv", "md"):
        emit_report(combined, fmt, args.out / f"comparison.{fmt}")
    print((args.out / "comparison.md").read_text(encoding="utf-8"))

    res = combined.results
    rp_agentic = res["agentic"].get("RP")
    rp_default = res["default_rag"].get("RP")
    rp_ok = rp_agentic is not None and rp_default is not None and rp_agentic.mean > rp_default.mean
    nass = [res[k]["NASS"].mean for k in ("no_rag", "default_rag", "agentic") if "NASS" in res[k]]
    nass_ok = len(nass) == 3 and max(nass) - min(nass) <= args.nass_band
    print(f"RP(agentic) > RP(default): {'yes' if rp_ok else 'no'}")
    print(f"NASS spread {max(nass) - min(nass):.3f} <= {args.nass_band}: {'yes' if nass_ok else 'no'}")
    return 0 if rp_ok and nass_ok else 1


if __name__ == "__main__":
    sys.exit(main())
