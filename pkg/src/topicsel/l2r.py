"""Training data for the topic ranker and MART training/tuning.

Training records come from collections with full judgments: for each size i
of an already-selected set and each of W random draws of P, every candidate
t outside P is labelled by how well ranking systems over P + {t} agrees with
the ranking over all topics, binned into K equal-width levels per scenario.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from . import kernels
from .collection import DataError, Qrels, RunSet
from .features import N_FEATURES, SLOT_NAMES, FeatureTable, apply_mask
from .mart import MartModel, fit_gbrt
from .metrics import ap_matrix, make_rng, order_from_sums, positions, quantize

logger = logging.getLogger(__name__)


def label_bin(tau: float, tau_min: float, tau_max: float, K: int) -> int:
    """Equal-width bin of ``tau`` in [tau_min, tau_max]; tau_max lands in K-1."""
    if tau_max == tau_min:
        return 0
    return min(K - 1, max(0, math.floor(K * (tau - tau_min) / (tau_max - tau_min))))


@dataclass(frozen=True)
class TrainingRecord:
    label: int
    features: np.ndarray
    collection_id: str
    scenario: int
    subset_size: int


class TrainingData:
    """Column store of training records (labels, 63-wide features, provenance)."""

    def __init__(self, labels, X, collection_ids, scenarios, subset_sizes):
        self.labels = np.asarray(labels, dtype=np.int64)
        self.X = np.asarray(X, dtype=np.float64).reshape(-1, N_FEATURES)
        self.collection_ids = np.asarray(collection_ids, dtype=object)
        self.scenarios = np.asarray(scenarios, dtype=np.int64)
        self.subset_sizes = np.asarray(subset_sizes, dtype=np.int64)
        n = self.labels.shape[0]
        if not (self.X.shape[0] == self.collection_ids.shape[0] == self.scenarios.shape[0]
                == self.subset_sizes.shape[0] == n):
            raise ValueError("training columns differ in length")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __iter__(self) -> Iterator[TrainingRecord]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> TrainingRecord:
        return TrainingRecord(int(self.labels[i]), self.X[i], str(self.collection_ids[i]),
                              int(self.scenarios[i]), int(self.subset_sizes[i]))

    def take(self, idx) -> "TrainingData":
        return TrainingData(self.labels[idx], self.X[idx], self.collection_ids[idx], self.scenarios[idx],
                            self.subset_sizes[idx])

    @classmethod
    def concat(cls, parts: Sequence["TrainingData"]) -> "TrainingData":
        if not parts:
            return cls([], np.zeros((0, N_FEATURES)), [], [], [])
        return cls(np.concatenate([p.labels for p in parts]), np.concatenate([p.X for p in parts]),
                   np.concatenate([p.collection_ids for p in parts]), np.concatenate([p.scenarios for p in parts]),
                   np.concatenate([p.subset_sizes for p in parts]))

    def deduplicated(self) -> "TrainingData":
        """Drop exact repeats of (label, features rounded to 1e-12); first one wins."""
        if len(self) == 0:
            return self
        key = np.column_stack([self.labels.astype(np.float64), np.round(self.X, 12) + 0.0])
        key = np.ascontiguousarray(key)
        rows = key.view(np.dtype((np.void, key.dtype.itemsize * key.shape[1]))).ravel()
        _, first = np.unique(rows, return_index=True)
        return self.take(np.sort(first))

    def to_csv(self, path: str | os.PathLike, header: Sequence[str] = ()) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("label",) + SLOT_NAMES + ("collection_id", "scenario", "subset_size"))
            for i in range(len(self)):
                w.writerow([int(self.labels[i])] + [repr(float(v)) for v in self.X[i]]
                           + [self.collection_ids[i], int(self.scenarios[i]), int(self.subset_sizes[i])])

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "TrainingData":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
        if not rows or tuple(rows[0][: 1 + N_FEATURES]) != ("label",) + SLOT_NAMES:
            raise DataError("unexpected training data header", path)
        body = rows[1:]
        return cls([int(r[0]) for r in body], np.array([[float(v) for v in r[1: 1 + N_FEATURES]] for r in body]),
                   [r[1 + N_FEATURES] for r in body], [int(r[2 + N_FEATURES]) for r in body],
                   [int(r[3 + N_FEATURES]) for r in body])


def _scenario(runs_topics, qmat, truth_pos, table, collection_id, i, trial, K, seed):
    n = len(runs_topics)
    rng = make_rng((seed, i, trial))
    p_idx = np.sort(rng.choice(n, size=i, replace=False)) if i else np.zeros(0, dtype=np.int64)
    in_p = np.zeros(n, dtype=bool)
    in_p[p_idx] = True
    cand = np.flatnonzero(~in_p)
    base = qmat[:, p_idx].sum(axis=1)
    taus = kernels.tau_columns((base[:, None] + qmat[:, cand]).astype(np.float64), truth_pos)
    t_min, t_max = float(taus.min()), float(taus.max())
    if t_max == t_min:
        logger.info("degenerate scenario (i=%d, trial=%d): all candidates tie at tau=%.4f", i, trial, t_max)
    labels = [label_bin(float(t), t_min, t_max, K) for t in taus]
    P = [runs_topics[k] for k in p_idx]
    P_bar = [runs_topics[k] for k in cand]
    X = table.assemble_batch(P_bar, P, P_bar)
    m = cand.size
    return TrainingData(labels, X, [collection_id] * m, [trial] * m, [i] * m)


def generate_training_data(runs: RunSet, qrels: Qrels, W: int, K: int, rng_seed, *,
                           collection_id: str = "collection", depth: int = 100,
                           table: FeatureTable | None = None, threads: int | None = None,
                           dedup: bool = True) -> TrainingData:
    """Labelled feature vectors from one fully judged collection.

    Scenario (i, trial) draws its P from a stream keyed by (seed, i, trial),
    so output does not depend on ``threads``.
    """
    n = len(runs.topics)
    if W < 1 or K < 2 or n < 3:
        raise ValueError("need W >= 1, K >= 2 and at least 3 topics")
    topics = list(runs.topics)
    qmat = quantize(ap_matrix(runs, qrels, topics, depth))
    truth_pos = positions(order_from_sums(qmat.sum(axis=1)))
    table = table if table is not None else FeatureTable.build(runs, depth, threads)
    jobs = [(i, trial) for i in range(n - 1) for trial in range(W)]
    with ThreadPoolExecutor(max_workers=threads or 1) as ex:
        parts = list(ex.map(lambda job: _scenario(topics, qmat, truth_pos, table, collection_id, job[0], job[1],
                                                  K, rng_seed), jobs))
    data = TrainingData.concat(parts)
    return data.deduplicated() if dedup else data


def merge_training_data(parts: Sequence[TrainingData]) -> TrainingData:
    """Concatenate per-collection data, then drop duplicates across collections."""
    return TrainingData.concat(list(parts)).deduplicated()


def train_mart(data: TrainingData, num_trees: int = 50, num_leaves: int = 10, shrinkage: float = 0.1,
               min_leaf: int = 1, mask: Sequence[str] | None = None) -> MartModel:
    if len(data) == 0:
        raise ValueError("no training records")
    return fit_gbrt(apply_mask(data.X, mask), data.labels, num_trees=num_trees, num_leaves=num_leaves,
                    shrinkage=shrinkage, min_leaf=min_leaf)


DEFAULT_LEAF_GRID = tuple(range(2, 51, 2))


def tune_leaves(train_data: TrainingData, tuning_runs: RunSet, tuning_qrels: Qrels,
                leaf_grid: Sequence[int] = DEFAULT_LEAF_GRID, *, num_trees: int = 50, shrinkage: float = 0.1,
                steps: int = 50, depth: int = 100, mask: Sequence[str] | None = None,
                fit: Callable[..., MartModel] | None = None) -> tuple[int, list[dict]]:
    """Pick the leaf count whose model gives the best mean tau over the first selections.

    Returns (best_num_leaves, report rows). Ties go to the smaller leaf count.
    ``fit(data, num_leaves=...)`` overrides model training.
    """
    from .selection import l2r_select

    fit = fit if fit is not None else (lambda d, num_leaves: train_mart(d, num_trees, num_leaves, shrinkage,
                                                                        mask=mask))
    table = FeatureTable.build(tuning_runs, depth)
    m = min(steps, len(tuning_runs.topics))
    report = []
    for leaves in sorted(leaf_grid):
        model = fit(train_data, num_leaves=leaves)
        trace = l2r_select(tuning_runs, model, m, qrels=tuning_qrels, table=table, depth=depth, mask=mask)
        report.append({"num_leaves": leaves, "mean_tau": float(np.mean(trace.tau_after_step))})
    best = max(report, key=lambda row: (row["mean_tau"], -row["num_leaves"]))
    return best["num_leaves"], report
