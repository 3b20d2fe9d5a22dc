"""Topic selection strategies and their tau trajectories.

All strategies break ties toward the lexicographically smallest topic id.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .collection import Qrels, RunSet
from .features import FeatureTable, apply_mask
from .mart import MartModel
from .metrics import ap_matrix, make_rng, order_from_sums, positions, quantize


@dataclass(frozen=True)
class SelectionTrace:
    selected: tuple[str, ...]
    tau_after_step: tuple[float, ...]
    strategy: str
    seed: int | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("selected topics must be distinct")
        if self.tau_after_step and len(self.tau_after_step) != len(self.selected):
            raise ValueError("one tau per selected topic")

    def to_csv(self, path: str | os.PathLike, header: Sequence[str] = ()) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("step", "topic", "tau"))
            for k, t in enumerate(self.selected, start=1):
                tau = repr(self.tau_after_step[k - 1]) if self.tau_after_step else ""
                w.writerow((k, t, tau))

    @classmethod
    def from_csv(cls, path: str | os.PathLike, strategy: str = "file") -> "SelectionTrace":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
        rows.sort(key=lambda r: int(r["step"]))
        taus = tuple(float(r["tau"]) for r in rows) if rows and all(r["tau"] for r in rows) else ()
        return cls(tuple(r["topic"] for r in rows), taus, strategy)

    def to_json(self) -> str:
        return json.dumps({"strategy": self.strategy, "seed": self.seed, "selected": list(self.selected),
                           "tau_after_step": list(self.tau_after_step)}, indent=1)


class Evaluator:
    """Fixed-point per-topic MAP@cutoff and the ground-truth ranking over all topics."""

    def __init__(self, runs: RunSet, qrels: Qrels, cutoff: int = 100):
        self.topics = list(runs.topics)
        self.col = {t: i for i, t in enumerate(self.topics)}
        self.qmat = quantize(ap_matrix(runs, qrels, self.topics, cutoff))
        self.truth_pos = positions(order_from_sums(self.qmat.sum(axis=1)))

    def tau(self, topics: Sequence[str]) -> float:
        cols = [self.col[t] for t in topics]
        sums = self.qmat[:, cols].sum(axis=1)
        return float(kernels.tau_columns(sums[:, None].astype(np.float64), self.truth_pos)[0])

    def trajectory(self, selected: Sequence[str]) -> tuple[float, ...]:
        """tau after each prefix of ``selected``."""
        cols = [self.col[t] for t in selected]
        prefix = np.cumsum(self.qmat[:, cols], axis=1)
        return tuple(kernels.tau_columns(prefix.astype(np.float64), self.truth_pos).tolist())


def _check_m(M: int, n: int) -> None:
    if not 1 <= M <= n:
        raise ValueError(f"M={M} outside [1, {n}]")


def greedy_oracle_select(runs: RunSet, qrels: Qrels, M: int, evaluator: Evaluator | None = None) -> SelectionTrace:
    """Add, at each step, the topic whose inclusion maximizes tau against the full-topic ranking."""
    ev = evaluator if evaluator is not None else Evaluator(runs, qrels)
    _check_m(M, len(ev.topics))
    remaining = list(range(len(ev.topics)))  # topics are sorted, so index order is id order
    base = np.zeros(ev.qmat.shape[0], dtype=np.int64)
    selected, taus = [], []
    for _ in range(M):
        cand = np.array(remaining)
        scores = (base[:, None] + ev.qmat[:, cand]).astype(np.float64)
        col_taus = kernels.tau_columns(scores, ev.truth_pos)
        k = int(np.argmax(col_taus))
        best = remaining.pop(k)
        base = base + ev.qmat[:, best]
        selected.append(ev.topics[best])
        taus.append(float(col_taus[k]))
    return SelectionTrace(tuple(selected), tuple(taus), "oracle")


def l2r_order(runs: RunSet, model: MartModel, M: int, *, table: FeatureTable | None = None, depth: int = 100,
              mask: Sequence[str] | None = None) -> list[str]:
    """Greedy selection driven by model scores. Uses no relevance judgments."""
    topics = list(runs.topics)
    _check_m(M, len(topics))
    table = table if table is not None else FeatureTable.build(runs, depth)
    P: list[str] = []
    P_bar = list(topics)
    for _ in range(M):
        X = apply_mask(table.assemble_batch(P_bar, P, P_bar), mask)
        scores = model.predict(X)
        k = int(np.argmax(scores))  # first max = smallest id, P_bar stays sorted
        P.append(P_bar.pop(k))
    return P


def l2r_select(runs: RunSet, model: MartModel, M: int, qrels: Qrels | None = None, *,
               table: FeatureTable | None = None, depth: int = 100, mask: Sequence[str] | None = None,
               evaluator: Evaluator | None = None) -> SelectionTrace:
    selected = l2r_order(runs, model, M, table=table, depth=depth, mask=mask)
    taus: tuple[float, ...] = ()
    if qrels is not None or evaluator is not None:
        ev = evaluator if evaluator is not None else Evaluator(runs, qrels, depth)
        taus = ev.trajectory(selected)
    return SelectionTrace(tuple(selected), taus, "l2r")


def random_taus(runs: RunSet, qrels: Qrels, M: int, trials: int, seed, *,
                evaluator: Evaluator | None = None) -> np.ndarray:
    """tau of ``trials`` uniformly random M-subsets."""
    ev = evaluator if evaluator is not None else Evaluator(runs, qrels)
    n = len(ev.topics)
    _check_m(M, n)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = make_rng((seed, M))
    out = np.empty(trials)
    chunk = 512
    for start in range(0, trials, chunk):
        stop = min(trials, start + chunk)
        sums = np.empty((ev.qmat.shape[0], stop - start), dtype=np.int64)
        for c in range(stop - start):
            sums[:, c] = ev.qmat[:, rng.choice(n, size=M, replace=False)].sum(axis=1)
        out[start:stop] = kernels.tau_columns(sums.astype(np.float64), ev.truth_pos)
    return out


def random_select(runs: RunSet, qrels: Qrels, M: int, trials: int, seed, *,
                  evaluator: Evaluator | None = None) -> tuple[float, float]:
    """(mean, std) tau of random M-topic subsets."""
    taus = random_taus(runs, qrels, M, trials, seed, evaluator=evaluator)
    return float(taus.mean()), float(taus.std())
