"""Fixed-budget judging simulation.

A total assessor budget (seconds) is spread evenly over the selected topics
after paying a per-topic development cost. Each topic then gets as many
judgments as its share affords, under either a constant 15 s/judgment speed
or a depth-dependent speed where assessors get faster as they judge more of
the same topic. Optional judging error flips qrels at a rate tied to the
topic development cost.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from . import kernels
from .collection import Qrels, RunSet
from .metrics import TopicSampler, make_rng, quantize
from .selection import Evaluator, SelectionTrace

logger = logging.getLogger(__name__)

CONSTANT = "constant"
VARIABLE = "variable"
SPEED_MODELS = (CONSTANT, VARIABLE)
NO_ERROR = "none"
TDC_LINKED = "tdc_linked"
ERROR_MODELS = (NO_ERROR, TDC_LINKED)

CONSTANT_SECONDS = 15.0
BASE_TDC = 76.0


def judging_time_per_doc(x: float) -> float:
    """Seconds per judgment when a topic gets ``x`` judgments in total."""
    if x < 1:
        raise ValueError("x must be >= 1")
    if x <= 32:
        return 15.0
    if x < 127:
        return 8.761 + 16.856 * math.exp(-0.0316 * x)
    return 9.0


def _max_variable_judgments(seconds: float) -> int:
    # largest j with j * f(j) <= seconds; j * f(j) dips slightly at j = 127
    j = math.floor(seconds / 9.0)
    if j >= 127:
        return j
    for j in range(126, 0, -1):
        if j * judging_time_per_doc(j) <= seconds:
            return j
    return 0


def judgments_per_topic(budget_seconds: float, n_topics: int, tdc_seconds: float = 0.0,
                        speed_model: str = CONSTANT) -> int:
    """Judgments each topic receives; 0 means the budget cannot fund any."""
    if n_topics < 1:
        raise ValueError("n_topics must be >= 1")
    if speed_model not in SPEED_MODELS:
        raise ValueError(f"unknown speed model {speed_model!r}")
    per_topic = (budget_seconds - n_topics * tdc_seconds) / n_topics
    if per_topic <= 0:
        return 0
    if speed_model == CONSTANT:
        return math.floor(per_topic / CONSTANT_SECONDS)
    return _max_variable_judgments(per_topic)


def accuracy_for_tdc(tdc_seconds: float) -> float:
    """Judging accuracy: 0.92 at 76 s, +0.02 per doubling, capped at 1."""
    if tdc_seconds < BASE_TDC:
        raise ValueError(f"no accuracy model below {BASE_TDC:g} s of topic development")
    return min(1.0, round(0.92 + 0.02 * math.log2(tdc_seconds / BASE_TDC), 12))


def flip_judgments(qrels: Qrels, accuracy: float, seed) -> Qrels:
    """Copy of ``qrels`` with each judgment flipped with probability 1 - accuracy."""
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError("accuracy must be in [0, 1]")
    items = list(qrels.items())
    flips = make_rng(seed).random(len(items)) < (1.0 - accuracy)
    return Qrels({key: rel ^ int(f) for (key, rel), f in zip(items, flips)})


@dataclass(frozen=True)
class BudgetScenario:
    total_budget_seconds: int
    tdc_seconds: int = 0
    speed_model: str = CONSTANT
    error_model: str = NO_ERROR
    judgments_repeats: int = 20
    flip_repeats: int = 50

    def __post_init__(self):
        if self.total_budget_seconds <= 0:
            raise ValueError("total_budget_seconds must be > 0")
        if self.tdc_seconds < 0:
            raise ValueError("tdc_seconds must be >= 0")
        if self.speed_model not in SPEED_MODELS:
            raise ValueError(f"unknown speed model {self.speed_model!r}")
        if self.error_model not in ERROR_MODELS:
            raise ValueError(f"unknown error model {self.error_model!r}")
        if self.judgments_repeats < 1 or self.flip_repeats < 1:
            raise ValueError("repeat counts must be >= 1")

    @property
    def accuracy(self) -> float:
        return 1.0 if self.error_model == NO_ERROR else accuracy_for_tdc(self.tdc_seconds)

    def quota(self, n_topics: int) -> int:
        return judgments_per_topic(self.total_budget_seconds, n_topics, self.tdc_seconds, self.speed_model)

    @classmethod
    def from_mapping(cls, values: dict) -> "BudgetScenario":
        kinds = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in values.items():
            if key == "budget_hours":
                kw["total_budget_seconds"] = int(round(float(raw) * 3600))
            elif key in kinds:
                kw[key] = raw if kinds[key] == "str" else int(raw)
            else:
                raise ValueError(f"unknown budget key {key!r}")
        return cls(**kw)


def read_key_values(path: str | os.PathLike) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


@dataclass(frozen=True)
class CurveRow:
    n_topics: int
    mean_tau: float
    std_tau: float
    quota: int
    insufficient: bool


def simulate_curve(runs: RunSet, qrels: Qrels, scenario: BudgetScenario, trace: SelectionTrace | None,
                   topic_counts: Sequence[int], seed, *, depth: int = 100,
                   random_trials: int | None = None) -> list[CurveRow]:
    """tau against the full-judgment ranking as the topic count grows.

    For each n the first n topics of ``trace`` (or, with ``trace=None``, a
    fresh random n-subset per trial) are judged with a statAP sample of the
    per-topic quota. Sampling streams are keyed by (seed, n, repeat) and do
    not depend on the flip round, so a judging error that flips nothing
    reproduces the error-free curve exactly.
    """
    ev = Evaluator(runs, qrels, depth)
    n_all = len(ev.topics)
    for n in topic_counts:
        if not 1 <= n <= n_all:
            raise ValueError(f"topic count {n} outside [1, {n_all}]")
    if trace is not None and len(trace.selected) < max(topic_counts, default=0):
        raise ValueError("trace is shorter than the largest topic count")
    samplers = {t: TopicSampler(runs, qrels, t, depth) for t in ev.topics}
    accuracy = scenario.accuracy
    if accuracy < 1.0:
        rounds = []
        for f in range(scenario.flip_repeats):
            flipped = flip_judgments(qrels, accuracy, (seed, 1, f))
            rounds.append({t: flipped.relevance(t, runs.topic_index(t, depth).docs) for t in ev.topics})
    else:
        rounds = [None]
    repeats = scenario.judgments_repeats if trace is not None else (random_trials or scenario.judgments_repeats)
    rows = []
    for n in topic_counts:
        quota = scenario.quota(n)
        if quota < 1:
            logger.warning("budget funds no judgments for %d topics", n)
            rows.append(CurveRow(n, float("nan"), float("nan"), quota, True))
            continue
        taus = []
        for rels in rounds:
            for rep in range(repeats):
                if trace is not None:
                    chosen = list(trace.selected[:n])
                else:
                    pick = make_rng((seed, 2, n, rep)).choice(n_all, size=n, replace=False)
                    chosen = [ev.topics[k] for k in np.sort(pick)]
                rng = make_rng((seed, 0, n, rep))
                cols = np.column_stack([samplers[t].draw(quota, rng, None if rels is None else rels[t])
                                        for t in chosen])
                sums = quantize(cols).sum(axis=1)
                taus.append(float(kernels.tau_columns(sums[:, None].astype(np.float64), ev.truth_pos)[0]))
        rows.append(CurveRow(n, float(np.mean(taus)), float(np.std(taus)), quota, False))
    return rows


def write_curve(rows: Sequence[CurveRow], path: str | os.PathLike, header: Sequence[str] = ()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("n_topics", "mean_tau", "std_tau", "quota", "insufficient"))
        for r in rows:
            w.writerow((r.n_topics, repr(r.mean_tau), repr(r.std_tau), r.quota, str(r.insufficient).lower()))
