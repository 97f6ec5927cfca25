from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from agentrag.config import load_config, make_models  # noqa: E402
from agentrag.corpus import load_corpus  # noqa: E402
from agentrag.indexdir import build_artifacts  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
CRAFTED = FIXTURES / "crafted"

WORKED_EXAMPLE_QUESTION = (
    "Pipeline: Camera obstacle detection, classification, and tracking pipeline, "
    "Known potential function insufficiency: deteriorated performance of camera based object "
    "detection and tracking due to adverse weather conditions, "
    "Trigger condition: moderate inclement levels of rain"
)


@pytest.fixture
def crafted_config():
    return load_config(CRAFTED / "config.toml", env={}).validate()


@pytest.fixture
def crafted_models(crafted_config):
    return make_models(crafted_config)


@pytest.fixture
def crafted_artifacts(crafted_config, crafted_models):
    docs = load_corpus(crafted_config.manifest)
    return build_artifacts(
        docs, crafted_config.chunking, crafted_models.backend, crafted_models.summarizer, crafted_config.branching
    )


@pytest.fixture
def crafted_index_dir(tmp_path, crafted_artifacts):
    from agentrag.indexdir import write_artifacts

    out = tmp_path / "index"
    write_artifacts(out, crafted_artifacts)
    return out


_CRITERIA: list[tuple[int, str, str, float]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA.append((marker.args[0], marker.args[1], rep.outcome, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    labels = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for number, title, outcome, duration in sorted(_CRITERIA):
        terminalreporter.write_line(
            f"criterion {number} [{title}]: {labels.get(outcome, outcome)} ({duration:.2f}s)"
        )
