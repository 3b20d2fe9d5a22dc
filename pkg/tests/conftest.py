from __future__ import annotations

from pathlib import Path

import pytest

from topicsel.collection import Qrels, RunSet, SystemRun, parse_qrels, parse_runs, run_paths
from topicsel.synthetic import synthetic_collection

FIXTURE = Path(__file__).resolve().parents[1] / "src" / "topicsel" / "data" / "fixture"


def make_runs(layout: dict[str, dict[str, list[str]]]) -> RunSet:
    """RunSet from {system: {topic: [doc, ...]}} with descending integer scores."""
    runs = []
    for sid, lists in layout.items():
        runs.append(SystemRun(sid, {t: tuple((d, float(len(docs) - k)) for k, d in enumerate(docs))
                                    for t, docs in lists.items()}))
    return RunSet(runs)


@pytest.fixture(scope="session")
def fixture_collection() -> tuple[RunSet, Qrels]:
    return parse_runs(run_paths(FIXTURE / "runs")), parse_qrels(FIXTURE / "qrels.txt")


@pytest.fixture(scope="session")
def small_collection() -> tuple[RunSet, Qrels]:
    return synthetic_collection(12, 8, seed=11)
