from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from topicsel.features import FeatureTable
from topicsel.l2r import generate_training_data, train_mart
from topicsel.metrics import average_precision
from topicsel.selection import (Evaluator, SelectionTrace, greedy_oracle_select, l2r_order, l2r_select,
                                random_select, random_taus)
from topicsel.synthetic import synthetic_collection


def _tau(a, b):
    pos = {x: i for i, x in enumerate(b)}
    s = sum(1 if pos[a[i]] < pos[a[j]] else -1 for i, j in itertools.combinations(range(len(a)), 2))
    return s / math.comb(len(a), 2)


def oracle_steps(runs, qrels, M):
    topics = list(runs.topics)
    ap = {(r.system_id, t): average_precision(r.lists[t], qrels, t) for r in runs.runs for t in topics}

    def ranking(ts):
        tot = {s: sum(ap[(s, t)] for t in ts) for s in runs.system_ids}
        return sorted(tot, key=lambda s: (-round(tot[s], 9), s))

    truth = ranking(topics)
    chosen, taus = [], []
    for _ in range(M):
        scored = [(_tau(ranking(chosen + [t]), truth), t) for t in topics if t not in chosen]
        best_tau = max(x[0] for x in scored)
        t = min(x[1] for x in scored if x[0] == best_tau)
        chosen.append(t)
        taus.append(best_tau)
    return chosen, taus


def test_greedy_matches_exhaustive_steps():
    runs, qrels = synthetic_collection(6, 7, seed=13)
    trace = greedy_oracle_select(runs, qrels, 3)
    chosen, taus = oracle_steps(runs, qrels, 3)
    assert list(trace.selected) == chosen
    assert np.allclose(trace.tau_after_step, taus, atol=1e-12)


def test_full_selection_reaches_one(fixture_collection):
    runs, qrels = fixture_collection
    n = len(runs.topics)
    assert greedy_oracle_select(runs, qrels, n).tau_after_step[-1] == 1.0
    ev = Evaluator(runs, qrels)
    assert ev.tau(list(reversed(runs.topics))) == 1.0


def test_l2r_ignores_qrels(small_collection):
    runs, qrels = small_collection
    train_runs, train_qrels = synthetic_collection(6, 5, seed=1)
    model = train_mart(generate_training_data(train_runs, train_qrels, 2, 5, 0), num_trees=5, num_leaves=4)
    table = FeatureTable.build(runs)
    a = l2r_order(runs, model, 5, table=table)
    trace = l2r_select(runs, model, 5, qrels, table=table)
    assert list(trace.selected) == a and len(trace.tau_after_step) == 5
    assert len(set(a)) == 5
    full = l2r_select(runs, model, len(runs.topics), qrels, table=table)
    assert full.tau_after_step[-1] == 1.0


def test_random_mean_matches_enumeration():
    runs, qrels = synthetic_collection(10, 8, seed=3)
    ev = Evaluator(runs, qrels)
    exact = np.mean([ev.tau(c) for c in itertools.combinations(runs.topics, 5)])
    mean, _ = random_select(runs, qrels, 5, 252 * 40, seed=1, evaluator=ev)
    assert abs(mean - exact) <= 0.01


def test_random_seeded():
    runs, qrels = synthetic_collection(8, 5, seed=3)
    a = random_taus(runs, qrels, 3, 50, seed=9)
    assert np.array_equal(a, random_taus(runs, qrels, 3, 50, seed=9))
    with pytest.raises(ValueError):
        random_taus(runs, qrels, 9, 5, seed=1)


def test_trace_csv_roundtrip(tmp_path):
    tr = SelectionTrace(("b", "a"), (0.5, 1.0), "oracle")
    tr.to_csv(tmp_path / "t.csv", ["x=1"])
    assert SelectionTrace.from_csv(tmp_path / "t.csv", "oracle") == tr
    with pytest.raises(ValueError):
        SelectionTrace(("a", "a"), (), "x")
