from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topicsel.budget import (BudgetScenario, accuracy_for_tdc, flip_judgments, judging_time_per_doc,
                             judgments_per_topic, read_key_values, simulate_curve, write_curve)
from topicsel.collection import Qrels
from topicsel.selection import greedy_oracle_select
from topicsel.synthetic import synthetic_collection

HOUR = 3600


def test_judging_time_points():
    assert judging_time_per_doc(10) == 15
    assert judging_time_per_doc(32) == 15
    assert judging_time_per_doc(64) == pytest.approx(10.99, abs=0.005)
    assert judging_time_per_doc(128) == 9
    assert judging_time_per_doc(200) == 9


@given(st.integers(1, 2000))
def test_judging_time_bounded(x):
    assert 9 <= judging_time_per_doc(x) <= 15


def test_worked_example_quotas():
    assert judgments_per_topic(100 * HOUR, 100, 0, "constant") == 240
    assert judgments_per_topic(100 * HOUR, 100, 0, "variable") == 400


def test_variable_quota_is_largest_affordable():
    for seconds in (100, 480, 1000, 1500, 3600, 7000):
        q = judgments_per_topic(seconds, 1, 0, "variable")
        assert q * judging_time_per_doc(q) <= seconds
        assert all(j * judging_time_per_doc(j) > seconds for j in range(q + 1, q + 200))


def test_constant_vs_variable_ratio():
    # at >= 127 judgments the variable speed is 9 s against 15 s
    c = judgments_per_topic(100 * HOUR, 10, 0, "constant")
    v = judgments_per_topic(100 * HOUR, 10, 0, "variable")
    assert (c, v) == (2400, 4000)


def test_insufficient_budget():
    assert judgments_per_topic(40 * HOUR, 118, 1216) == 0
    assert judgments_per_topic(40 * HOUR, 119, 1216, "variable") == 0
    assert judgments_per_topic(40 * HOUR, 100, 1216) > 0
    assert BudgetScenario(40 * HOUR, 1216).quota(120) == 0


def test_accuracy_model():
    assert accuracy_for_tdc(76) == 0.92
    assert accuracy_for_tdc(152) == 0.94
    assert accuracy_for_tdc(608) == 0.98
    assert accuracy_for_tdc(1216) == 1.0
    assert accuracy_for_tdc(5000) == 1.0
    with pytest.raises(ValueError):
        accuracy_for_tdc(10)


def test_flip_rate():
    q = Qrels({("t", f"d{k}"): k % 2 for k in range(10_000)})
    rates = []
    for seed in range(50):
        flipped = flip_judgments(q, 0.92, seed)
        rates.append(np.mean([a != b for (_, a), (_, b) in zip(q.items(), flipped.items())]))
    assert abs(np.mean(rates) - 0.08) <= 0.01
    assert flip_judgments(q, 1.0, 3) == q


def test_scenario_validation_and_mapping(tmp_path):
    with pytest.raises(ValueError):
        BudgetScenario(0)
    with pytest.raises(ValueError):
        BudgetScenario(10, speed_model="fast")
    p = tmp_path / "b.cfg"
    p.write_text("budget_hours = 2  # comment\nspeed_model=variable\n")
    s = BudgetScenario.from_mapping(read_key_values(p))
    assert s.total_budget_seconds == 7200 and s.speed_model == "variable"


@pytest.fixture(scope="module")
def coll():
    runs, qrels = synthetic_collection(10, 8, seed=4)
    return runs, qrels, greedy_oracle_select(runs, qrels, 10)


def test_error_free_path_equals_accuracy_one(coll):
    runs, qrels, trace = coll
    counts = [2, 5, 10]
    budget = 10 * 1216 + 5 * HOUR
    plain = simulate_curve(runs, qrels, BudgetScenario(budget, 1216, judgments_repeats=5), trace, counts, 7)
    linked = simulate_curve(runs, qrels, BudgetScenario(budget, 1216, error_model="tdc_linked",
                                                        judgments_repeats=5), trace, counts, 7)
    assert linked == plain
    assert all(r.quota > 0 for r in plain)


def test_judging_error_changes_curve(coll):
    runs, qrels, trace = coll
    s = dict(total_budget_seconds=10 * 76 + 5 * HOUR, tdc_seconds=76, judgments_repeats=3, flip_repeats=3)
    plain = simulate_curve(runs, qrels, BudgetScenario(**s), trace, [10], 7)
    noisy = simulate_curve(runs, qrels, BudgetScenario(**s, error_model="tdc_linked"), trace, [10], 7)
    assert noisy[0].quota == plain[0].quota
    assert noisy[0].mean_tau != plain[0].mean_tau


def test_insufficient_rows_marked(coll, tmp_path):
    runs, qrels, trace = coll
    rows = simulate_curve(runs, qrels, BudgetScenario(100, 30), trace, [1, 3, 5], 1)
    assert [r.insufficient for r in rows] == [False, True, True]
    assert math.isnan(rows[1].mean_tau)
    write_curve(rows, tmp_path / "c.csv", ["seed=1"])
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[1] == "n_topics,mean_tau,std_tau,quota,insufficient"
    assert lines[3].endswith(",0,true")


def test_more_budget_not_worse(coll):
    runs, qrels, trace = coll
    counts = list(range(1, 11))
    lo = simulate_curve(runs, qrels, BudgetScenario(2 * HOUR, judgments_repeats=20), None, counts, 3,
                        random_trials=20)
    hi = simulate_curve(runs, qrels, BudgetScenario(4 * HOUR, judgments_repeats=20), None, counts, 3,
                        random_trials=20)
    for a, b in zip(lo, hi):
        assert b.mean_tau >= a.mean_tau - 0.02


def test_full_judgment_quota_reaches_truth(coll):
    runs, qrels, trace = coll
    rows = simulate_curve(runs, qrels, BudgetScenario(10_000 * HOUR, judgments_repeats=2), trace, [10], 0)
    assert rows[0].mean_tau == 1.0


def test_topic_count_checks(coll):
    runs, qrels, trace = coll
    with pytest.raises(ValueError):
        simulate_curve(runs, qrels, BudgetScenario(HOUR), trace, [11], 0)
