"""Judgment-free topic features for L2R topic selection.

Each topic gets seven core features. A candidate topic ``t`` in selection
state (P, P_bar) is described by 63 values::

    [7 core of t]
    ++ [mean, std of each core] over P
    ++ ... over P_bar
    ++ ... over P + {t}
    ++ ... over P_bar - {t}

Aggregates of an empty set are all zero. Every std is a population std.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .collection import RunSet
from .metrics import statap_weight_vector

CORE_NAMES = ("avg_weight", "std_weight", "avg_tau", "std_tau", "cost", "std_cost", "std_qpp")
GROUPS = ("P", "Pbar", "P_plus", "Pbar_minus")
N_CORE = len(CORE_NAMES)
N_FEATURES = N_CORE + 2 * N_CORE * len(GROUPS)


def _slots() -> tuple[tuple[str, str, str], ...]:
    slots = [(f"t_{c}", "t", c) for c in CORE_NAMES]
    for g in GROUPS:
        for c in CORE_NAMES:
            slots += [(f"{g}_mean_{c}", g, c), (f"{g}_std_{c}", g, c)]
    return tuple(slots)


_SLOTS = _slots()
SLOT_NAMES = tuple(name for name, _, _ in _SLOTS)


@dataclass(frozen=True)
class CoreFeatures:
    avg_weight: float
    std_weight: float
    avg_tau: float
    std_tau: float
    cost: float
    std_cost: float
    std_qpp: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


def qpp(run_list: Sequence, k: int = 100) -> float:
    """Score-deviation predictor: std of the top-k min-max normalized scores.

    ``run_list`` holds (doc, score) pairs or bare scores, best first.
    """
    scores = np.array([s if np.isscalar(s) else s[1] for s in run_list], dtype=np.float64)
    if scores.size == 0:
        raise ValueError("qpp needs a non-empty list")
    lo, hi = scores.min(), scores.max()
    if hi == lo:
        return 0.0
    norm = (scores - lo) / (hi - lo)
    return float(np.std(norm[:k]))


def core_features(runs: RunSet, topic: str, depth: int = 100) -> CoreFeatures:
    n_sys = runs.n_systems
    if n_sys < 2:
        raise ValueError("core features need at least two systems")
    idx = runs.topic_index(topic, depth)
    w = statap_weight_vector(idx)
    taus, unions = kernels.pairwise_list_stats(idx.lists, idx.lengths, idx.pool_size)
    qpps = np.array([qpp(r.lists[topic], depth) if r.lists.get(topic) else 0.0 for r in runs.runs])
    return CoreFeatures(
        avg_weight=float(w.mean()),
        std_weight=float(w.std()),
        avg_tau=float(taus.mean()),
        std_tau=float(taus.std()),
        cost=idx.pool_size / (n_sys * depth),
        std_cost=float(unions.astype(np.float64).std()),
        std_qpp=float(qpps.std()),
    )


def aggregate(features: Iterable[CoreFeatures] | np.ndarray) -> np.ndarray:
    """(mean, std) of each core feature, interleaved; zeros for an empty set."""
    arr = features if isinstance(features, np.ndarray) else np.array([f.as_array() for f in features])
    out = np.zeros(2 * N_CORE)
    if arr.size == 0:
        return out
    arr = arr.reshape(-1, N_CORE)
    out[0::2] = arr.mean(axis=0)
    out[1::2] = arr.std(axis=0)
    return out


class FeatureTable:
    """Core features of every topic in a collection, computed once."""

    def __init__(self, topics: Sequence[str], values: np.ndarray):
        self.topics = tuple(topics)
        self.values = np.asarray(values, dtype=np.float64).reshape(len(self.topics), N_CORE)
        self.row = {t: i for i, t in enumerate(self.topics)}

    @classmethod
    def build(cls, runs: RunSet, depth: int = 100, threads: int | None = None) -> "FeatureTable":
        with ThreadPoolExecutor(max_workers=threads or 1) as ex:
            feats = list(ex.map(lambda t: core_features(runs, t, depth), runs.topics))
        return cls(runs.topics, np.array([f.as_array() for f in feats]))

    def core(self, topic: str) -> CoreFeatures:
        return CoreFeatures(*self.values[self.row[topic]].tolist())

    def assemble(self, t_c: str, P: Iterable[str], P_bar: Iterable[str]) -> np.ndarray:
        return self.assemble_batch([t_c], P, P_bar)[0]

    def assemble_batch(self, candidates: Sequence[str], P: Iterable[str], P_bar: Iterable[str]) -> np.ndarray:
        """63-wide vectors for each candidate; all share the same (P, P_bar)."""
        P = sorted(set(P))
        P_bar = sorted(set(P_bar))
        if set(P) & set(P_bar):
            raise ValueError("P and P_bar overlap")
        if len(P) + len(P_bar) != len(self.topics) or set(P) | set(P_bar) != set(self.topics):
            raise ValueError("P and P_bar must partition the topic set")
        pbar_rows = np.array([self.row[t] for t in P_bar], dtype=np.int64)
        p_rows = np.array([self.row[t] for t in P], dtype=np.int64)
        cand = np.array([self.row[t] for t in candidates], dtype=np.int64)
        if not np.isin(cand, pbar_rows).all():
            raise ValueError("every candidate must be in P_bar")
        V = self.values
        n_c = cand.size
        out = np.empty((n_c, N_FEATURES))
        out[:, :N_CORE] = V[cand]
        base = N_CORE
        out[:, base: base + 2 * N_CORE] = aggregate(V[p_rows])
        base += 2 * N_CORE
        out[:, base: base + 2 * N_CORE] = aggregate(V[pbar_rows])
        base += 2 * N_CORE
        out[:, base: base + 2 * N_CORE] = _with_each(V[p_rows], V[cand])
        base += 2 * N_CORE
        where = {r: i for i, r in enumerate(pbar_rows.tolist())}
        out[:, base: base + 2 * N_CORE] = _without_each(V[pbar_rows], np.array([where[c] for c in cand.tolist()]))
        return out

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("topic",) + CORE_NAMES)
            for t, row in zip(self.topics, self.values):
                w.writerow([t] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "FeatureTable":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if tuple(rows[0]) != ("topic",) + CORE_NAMES:
            raise ValueError(f"unexpected feature table header {rows[0]}")
        return cls([r[0] for r in rows[1:]], np.array([[float(v) for v in r[1:]] for r in rows[1:]]))


def _with_each(base: np.ndarray, extra: np.ndarray) -> np.ndarray:
    """aggregate(base + [x]) for every row x of ``extra`` (two-pass, per row)."""
    n_c = extra.shape[0]
    stacked = np.concatenate([np.broadcast_to(base, (n_c,) + base.shape), extra[:, None, :]], axis=1)
    out = np.empty((n_c, 2 * N_CORE))
    mean = stacked.mean(axis=1)
    out[:, 0::2] = mean
    out[:, 1::2] = stacked.std(axis=1)
    return out


def _without_each(base: np.ndarray, drop: np.ndarray) -> np.ndarray:
    """aggregate(base minus row i) for every i in ``drop``."""
    n = base.shape[0]
    out = np.zeros((drop.size, 2 * N_CORE))
    if n <= 1:
        return out
    keep = np.ones((drop.size, n), dtype=bool)
    keep[np.arange(drop.size), drop] = False
    rest = base[np.nonzero(keep)[1]].reshape(drop.size, n - 1, N_CORE)
    out[:, 0::2] = rest.mean(axis=1)
    out[:, 1::2] = rest.std(axis=1)
    return out


def assemble(runs: RunSet, t_c: str, P: Iterable[str], P_bar: Iterable[str], depth: int = 100,
             table: FeatureTable | None = None) -> np.ndarray:
    """63-wide feature vector of candidate ``t_c`` given selected set ``P``."""
    table = table if table is not None else FeatureTable.build(runs, depth)
    return table.assemble(t_c, P, P_bar)


def apply_mask(X: np.ndarray, mask: Sequence[str] | None) -> np.ndarray:
    """Zero out feature slots for ablation.

    ``mask`` entries are core names (drops every slot derived from it) or
    group names ``t``/``P``/``Pbar``/``P_plus``/``Pbar_minus``.
    """
    if not mask:
        return X
    X = np.array(X, dtype=np.float64, copy=True)
    drop = np.zeros(N_FEATURES, dtype=bool)
    for key in mask:
        if key not in CORE_NAMES and key not in ("t",) + GROUPS:
            raise ValueError(f"unknown feature mask entry {key!r}")
        drop |= np.array([key in (g, c) for _, g, c in _SLOTS])
    X[..., drop] = 0.0
    return X
