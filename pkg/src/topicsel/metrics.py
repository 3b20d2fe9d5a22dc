"""Evaluation measures, system rankings, Kendall's tau and statAP.

System rankings are built from fixed-point per-topic scores (``SCALE`` units)
so that subset sums are exact: the ranking of a topic subset never depends
on summation order, and exact ties are real ties broken by system id.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .collection import Qrels, RunSet, TopicIndex

logger = logging.getLogger(__name__)

MAP = "MAP@100"
STATAP = "statAP"
MEASURES = (MAP, STATAP)

# 2**32 keeps N * SCALE below 2**53 for any realistic topic count, so sums are
# exact in both int64 and float64.
SCALE = float(2**32)


def _flatten(seed) -> list[int]:
    out: list[int] = []
    for s in seed:
        out.extend(_flatten(s) if isinstance(s, (tuple, list)) else [int(s)])
    return out


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (tuple, list)):
        return np.random.SeedSequence(_flatten(seed))
    return np.random.SeedSequence(int(seed))


def make_rng(seed) -> np.random.Generator:
    """Generator from an int or a (possibly nested) tuple of ints, the derived-stream key."""
    return np.random.default_rng(_seed_sequence(seed))


def _docs_of(run_list) -> list[str]:
    return [d if isinstance(d, str) else d[0] for d in run_list]


def _ap_rows(relmat: np.ndarray, n_relevant) -> np.ndarray:
    k = np.arange(1, relmat.shape[1] + 1, dtype=np.float64)
    prec = np.cumsum(relmat, axis=1) / k
    total = (relmat * prec).sum(axis=1)
    n_relevant = np.asarray(n_relevant, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        ap = np.where(n_relevant > 0, total / np.where(n_relevant > 0, n_relevant, 1.0), 0.0)
    return ap


def average_precision(run_list: Sequence, qrels: Qrels, topic: str, cutoff: int = 100) -> float:
    """AP@cutoff with R taken from the qrels; 0 when the topic has no relevant docs.

    ``run_list`` holds doc ids or (doc, score) pairs, best first.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    docs = _docs_of(run_list)[:cutoff]
    if not docs:
        return 0.0
    rel = qrels.relevance(topic, docs)[None, :]
    return float(_ap_rows(rel, [qrels.relevant_count(topic)])[0])


def kendall_tau(a: Sequence, b: Sequence) -> float:
    """Kendall tau-a between two strict orderings of the same items."""
    if len(a) != len(b) or set(a) != set(b) or len(set(a)) != len(a):
        raise ValueError("kendall_tau needs two permutations of the same id set")
    n = len(a)
    if n < 2:
        raise ValueError("kendall_tau needs at least two items")
    pos_b = {x: i for i, x in enumerate(b)}
    inv = kernels.count_discordant(np.fromiter((pos_b[x] for x in a), dtype=np.int64, count=n))
    pairs = n * (n - 1) // 2
    return (pairs - 2.0 * inv) / pairs


@dataclass(frozen=True)
class SystemRanking:
    entries: tuple[tuple[str, float], ...]
    measure: str
    flagged_topics: tuple[str, ...] = ()

    @property
    def order(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.entries)

    def scores(self) -> dict[str, float]:
        return dict(self.entries)


def ap_matrix(runs: RunSet, qrels: Qrels, topics: Sequence[str], cutoff: int = 100) -> np.ndarray:
    """(systems x topics) AP@cutoff with full judgments."""
    out = np.zeros((runs.n_systems, len(topics)), dtype=np.float64)
    for j, t in enumerate(topics):
        idx = runs.topic_index(t, cutoff)
        rel = np.append(qrels.relevance(t, idx.docs), 0.0)
        out[:, j] = _ap_rows(rel[idx.lists], np.full(runs.n_systems, qrels.relevant_count(t)))
    return out


def quantize(values: np.ndarray) -> np.ndarray:
    """Fixed-point per-topic scores used for exact subset sums."""
    return np.rint(np.asarray(values, dtype=np.float64) * SCALE).astype(np.int64)


def order_from_sums(sums: np.ndarray) -> np.ndarray:
    """System indices by descending sum; ties by ascending index (= system id)."""
    return np.lexsort((np.arange(sums.shape[0]), -np.asarray(sums)))


def positions(order: np.ndarray) -> np.ndarray:
    pos = np.empty(order.shape[0], dtype=np.int64)
    pos[order] = np.arange(order.shape[0])
    return pos


def ranking_from_matrix(system_ids: Sequence[str], qmat: np.ndarray, cols: Iterable[int],
                        measure: str) -> SystemRanking:
    cols = sorted(cols)
    if not cols:
        raise ValueError("need at least one topic")
    sums = qmat[:, cols].sum(axis=1)
    order = order_from_sums(sums)
    denom = len(cols) * SCALE
    return SystemRanking(tuple((system_ids[i], float(sums[i]) / denom) for i in order), measure)


def rank_systems(runs: RunSet, qrels: Qrels, topics: Iterable[str], measure: str = MAP, *,
                 cutoff: int = 100, designs: Mapping[str, "SampleDesign"] | None = None) -> SystemRanking:
    """Rank systems by their mean per-topic measure over ``topics``.

    ``measure=STATAP`` needs one SampleDesign per topic in ``designs``.
    """
    topics = sorted(set(topics))
    if not topics:
        raise ValueError("topics must be non-empty")
    if measure == MAP:
        mat = ap_matrix(runs, qrels, topics, cutoff)
        flagged: tuple[str, ...] = ()
    elif measure == STATAP:
        if designs is None:
            raise ValueError("statAP ranking needs sample designs")
        mat, flagged = statap_matrix(runs, qrels, {t: designs[t] for t in topics}, cutoff)
    else:
        raise ValueError(f"unknown measure {measure!r}")
    r = ranking_from_matrix(runs.system_ids, quantize(mat), range(len(topics)), measure)
    return SystemRanking(r.entries, measure, flagged)


def ranking_tau(a: SystemRanking, b: SystemRanking) -> float:
    return kendall_tau(list(a.order), list(b.order))


# statAP


def statap_weight_vector(index: TopicIndex, depth: int | None = None) -> np.ndarray:
    """Normalized AP-prior weights over ``index.docs`` (pool order)."""
    depth = index.depth if depth is None else depth
    if index.pool_size == 0:
        raise ValueError(f"empty pool for topic {index.topic}")
    # prior mass of rank k: (1/depth) * sum_{j=k}^{depth} 1/j
    inv = 1.0 / np.arange(1, depth + 1, dtype=np.float64)
    prior = np.cumsum(inv[::-1])[::-1] / depth
    acc = np.zeros(index.pool_size + 1, dtype=np.float64)
    width = min(depth, index.lists.shape[1])
    lists = index.lists[:, :width]
    np.add.at(acc, lists.ravel(), np.broadcast_to(prior[:width], lists.shape).ravel())
    w = acc[:-1] / index.lists.shape[0]
    return w / w.sum()


def statap_weights(runs: RunSet, topic: str, depth: int = 100) -> dict[str, float]:
    """Sampling weight of each pooled document; sums to 1 over the pool."""
    idx = runs.topic_index(topic, depth)
    return dict(zip(idx.docs, statap_weight_vector(idx).tolist()))


def inclusion_probabilities(weights: np.ndarray, m: int) -> np.ndarray:
    """pi_d = min(1, c * w_d) with c chosen so that sum(pi) = m.

    Equals min(1, m * w_d) whenever no document is a certainty pick.
    """
    w = np.asarray(weights, dtype=np.float64)
    n = w.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"sample size {m} outside [1, {n}]")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    if m == n:
        return np.ones(n)
    certain = np.zeros(n, dtype=bool)
    while True:
        rest = ~certain
        c = (m - certain.sum()) / w[rest].sum()
        new = rest & (c * w >= 1.0)
        if not new.any():
            break
        certain |= new
    pi = np.where(certain, 1.0, c * w)
    return pi


def systematic_pps(pi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Boolean sample mask whose inclusion probabilities are ``pi``.

    Certainty units (pi = 1) are always taken; the rest are drawn by
    systematic sampling over a random permutation.
    """
    n = pi.shape[0]
    order = rng.permutation(n)
    u = rng.random()
    chosen = pi >= 1.0
    rest = order[~chosen[order]]
    m_rest = int(round(pi[rest].sum()))
    if m_rest > 0:
        cum = np.cumsum(pi[rest])
        cum *= m_rest / cum[-1]
        hits = np.searchsorted(cum, u + np.arange(m_rest), side="right")
        chosen[rest[np.minimum(hits, rest.shape[0] - 1)]] = True
    return chosen


@dataclass(frozen=True)
class SampleDesign:
    topic: str | None
    docs: tuple[str, ...]
    weight_vec: np.ndarray = field(repr=False)
    pi_vec: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)

    @property
    def weights(self) -> dict[str, float]:
        return dict(zip(self.docs, self.weight_vec.tolist()))

    @property
    def sample(self) -> frozenset[str]:
        return frozenset(d for d, s in zip(self.docs, self.mask) if s)

    @property
    def inclusion_prob(self) -> dict[str, float]:
        return {d: float(p) for d, p, s in zip(self.docs, self.pi_vec, self.mask) if s}

    @property
    def size(self) -> int:
        return int(self.mask.sum())


def statap_sample(weights: Mapping[str, float], m: int, rng_seed, topic: str | None = None) -> SampleDesign:
    """Draw ``m`` pooled documents without replacement, proportional to weight."""
    docs = tuple(weights)
    w = np.fromiter(weights.values(), dtype=np.float64, count=len(docs))
    if m > len(docs):
        raise ValueError(f"sample size {m} exceeds pool size {len(docs)}")
    pi = inclusion_probabilities(w, m)
    mask = systematic_pps(pi, make_rng(rng_seed))
    return SampleDesign(topic, docs, w, pi, mask)


def _statap_rows(contrib: np.ndarray, r_hat: float) -> np.ndarray:
    if r_hat <= 0:
        return np.zeros(contrib.shape[0])
    k = np.arange(1, contrib.shape[1] + 1, dtype=np.float64)
    p_hat = np.cumsum(contrib, axis=1) / k
    return (contrib * p_hat).sum(axis=1) / r_hat


def _contributions(design: SampleDesign, qrels: Qrels, topic: str) -> tuple[dict[str, float], float]:
    contrib: dict[str, float] = {}
    for d, p, s in zip(design.docs, design.pi_vec, design.mask):
        if s and qrels.get(topic, d):
            contrib[d] = 1.0 / p
    return contrib, sum(contrib.values())


def statap_score(run_list: Sequence, qrels: Qrels, design: SampleDesign, cutoff: int = 100,
                 topic: str | None = None) -> float:
    """Horvitz-Thompson statAP of one ranked list; 0 if no sampled doc is relevant."""
    topic = design.topic if topic is None else topic
    if topic is None:
        raise ValueError("topic unknown: pass it or set design.topic")
    docs = _docs_of(run_list)[:cutoff]
    contrib, r_hat = _contributions(design, qrels, topic)
    if not docs:
        return 0.0
    row = np.fromiter((contrib.get(d, 0.0) for d in docs), dtype=np.float64, count=len(docs))
    return float(_statap_rows(row[None, :], r_hat)[0])


def statap_matrix(runs: RunSet, qrels: Qrels, designs: Mapping[str, SampleDesign],
                  cutoff: int = 100) -> tuple[np.ndarray, tuple[str, ...]]:
    """(systems x topics) statAP; also the topics whose sample held no relevant doc."""
    topics = list(designs)
    out = np.zeros((runs.n_systems, len(topics)))
    flagged = []
    for j, t in enumerate(topics):
        idx = runs.topic_index(t, cutoff)
        contrib, r_hat = _contributions(designs[t], qrels, t)
        if r_hat <= 0:
            flagged.append(t)
            continue
        vec = np.array([contrib.get(d, 0.0) for d in idx.docs] + [0.0])
        out[:, j] = _statap_rows(vec[idx.lists], r_hat)
    return out, tuple(flagged)


class TopicSampler:
    """Repeated statAP evaluation of one topic at a fixed sample size.

    Precomputes weights, inclusion probabilities and the relevance vector so
    that each draw costs one systematic sample plus a vectorized estimate.
    """

    def __init__(self, runs: RunSet, qrels: Qrels, topic: str, depth: int = 100,
                 systems: Sequence[int] | None = None, pool_from: Sequence[int] | None = None):
        self.topic = topic
        idx = runs.topic_index(topic, depth)
        scored = np.arange(runs.n_systems) if systems is None else np.asarray(systems)
        self.lists = idx.lists[scored]
        if pool_from is None:
            self.members = np.arange(idx.pool_size)
            self.weights = statap_weight_vector(idx)
        else:
            sub = idx.lists[np.asarray(pool_from)]
            self.members = np.unique(sub[sub >= 0])
            if self.members.size == 0:
                self.weights = np.zeros(0)
            else:
                remap = np.full(idx.pool_size + 1, -1, dtype=np.int64)
                remap[self.members] = np.arange(self.members.size)
                sub_idx = TopicIndex(topic, depth, tuple(idx.docs[i] for i in self.members),
                                     np.where(sub >= 0, remap[sub], -1), idx.lengths[np.asarray(pool_from)])
                self.weights = statap_weight_vector(sub_idx)
        self.pool_size = idx.pool_size
        self.rel = qrels.relevance(topic, idx.docs)

    @property
    def sample_space(self) -> int:
        return int(self.members.size)

    def draw(self, m: int, rng: np.random.Generator, qrels_rel: np.ndarray | None = None) -> np.ndarray:
        """statAP of every scored system on one fresh sample of size ``m``."""
        rel = self.rel if qrels_rel is None else qrels_rel
        n_rows = self.lists.shape[0]
        if self.members.size == 0:
            return np.zeros(n_rows)
        m = min(m, self.members.size)
        if m < 1:
            return np.zeros(n_rows)
        pi = inclusion_probabilities(self.weights, m)
        mask = systematic_pps(pi, rng)
        contrib = np.zeros(self.pool_size + 1)
        sel = self.members[mask]
        contrib[sel] = rel[sel] / pi[mask]
        return _statap_rows(contrib[self.lists], float(contrib.sum()))
