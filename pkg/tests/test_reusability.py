from __future__ import annotations

import numpy as np
import pytest

from topicsel.collection import Qrels
from topicsel.metrics import TopicSampler, make_rng
from topicsel.reusability import held_out_scores, loo_reusability
from topicsel.synthetic import synthetic_collection

from conftest import make_runs


def _unique_group_collection():
    shared = [f"s{k}" for k in range(20)]
    layout, judg = {}, {}
    for t in ("1", "2", "3"):
        for d in shared:
            judg[(t, d)] = int(d in ("s0", "s5", "s9"))
        for k in range(5):
            judg[(t, f"u{k}")] = 1
    for g in range(4):
        for j in range(2):
            sid = f"g{g}r{j}"
            if g == 0:
                lists = [f"u{k}" for k in range(5)] + shared[j: j + 10]
            else:
                lists = shared[g + j: g + j + 15]
            layout[sid] = {t: lists for t in ("1", "2", "3")}
    runs = make_runs(layout)
    groups = {s: s[:2] for s in runs.system_ids}
    return runs, Qrels(judg), groups


def test_unique_contributions_lose_credit_when_held_out():
    runs, qrels, groups = _unique_group_collection()
    P = list(runs.topics)
    held = held_out_scores(runs, qrels, P, groups, quota_per_topic=1000, rng_seed=0)
    pooled = np.mean([TopicSampler(runs, qrels, t).draw(1000, make_rng(0)) for t in P], axis=0)
    g0 = [k for k, s in enumerate(runs.system_ids) if groups[s] == "g0"]
    assert (held[g0] < pooled[g0] - 0.1).all()
    others = [k for k in range(runs.n_systems) if k not in g0]
    assert held[others].mean() >= pooled[others].mean() - 1e-9


def test_one_group_per_system_default():
    runs, qrels = synthetic_collection(6, 6, seed=2)
    mean, std = loo_reusability(runs, qrels, list(runs.topics), None, 200, repeats=3, seed=1)
    assert -1 <= mean <= 1 and std >= 0
    again = loo_reusability(runs, qrels, list(runs.topics), None, 200, repeats=3, seed=1)
    assert again == (mean, std)


def test_requires_two_groups_and_topics():
    runs, qrels = synthetic_collection(3, 4, seed=2)
    with pytest.raises(ValueError):
        loo_reusability(runs, qrels, list(runs.topics), {s: "g" for s in runs.system_ids}, 10)
    with pytest.raises(ValueError):
        loo_reusability(runs, qrels, [], None, 10)


def test_empty_pool_topic_skipped(caplog):
    runs = make_runs({"a": {"1": ["x", "y"], "2": ["p"]}, "b": {"1": ["y", "z"]}})
    qrels = Qrels({("1", "x"): 1, ("1", "y"): 1, ("2", "p"): 1})
    import logging
    with caplog.at_level(logging.INFO):
        scores = held_out_scores(runs, qrels, ["1", "2"], {"a": "a", "b": "b"}, 10, 0)
    assert "skipped" in caplog.text
    assert scores.shape == (2,) and np.isfinite(scores).all()
