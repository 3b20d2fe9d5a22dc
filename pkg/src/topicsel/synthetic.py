"""Deterministic synthetic TREC-style collections.

Systems have a latent quality. Topics have a latent clarity: on clear topics
systems retrieve from a focused candidate set and their effectiveness tracks
their quality; on vague topics they scatter over many documents and their
effectiveness is mostly noise. Relevant-set sizes are heavy-tailed. Only
pooled documents are judged, as in a pooled TREC collection.
"""

from __future__ import annotations

import numpy as np

from .collection import Qrels, RunSet, SystemRun
from .metrics import make_rng


def synthetic_collection(n_topics: int, n_systems: int, seed: int, *, depth: int = 100,
                         n_nonrel: int = 600, topic_offset: int = 1) -> tuple[RunSet, Qrels]:
    if n_topics < 1 or n_systems < 1:
        raise ValueError("need at least one topic and one system")
    rng = make_rng((seed, 0))
    quality = rng.uniform(0.05, 0.95, size=n_systems)
    width = max(3, len(str(n_topics + topic_offset - 1)))
    topics = [f"{k + topic_offset:0{width}d}" for k in range(n_topics)]
    system_ids = [f"sys{j:03d}" for j in range(n_systems)]
    lists: list[dict[str, tuple]] = [{} for _ in range(n_systems)]
    judgments: dict[tuple[str, str], int] = {}
    for t_i, topic in enumerate(topics):
        trng = make_rng((seed, 1, t_i))
        clarity = trng.beta(2.0, 2.0)
        n_rel = int(np.clip(4 + 6 * trng.pareto(1.1), 4, 150))
        rel_docs = [f"{topic}-R{k:04d}" for k in range(n_rel)]
        non_docs = [f"{topic}-N{k:04d}" for k in range(n_nonrel)]
        # clear topics concentrate attention on few non-relevant documents
        pop = 1.0 / np.arange(1, n_nonrel + 1) ** (0.3 + 1.7 * clarity)
        pop /= pop.sum()
        rel_pop = 1.0 / np.arange(1, n_rel + 1) ** 0.7
        pooled = set()
        for s in range(n_systems):
            srng = make_rng((seed, 2, t_i, s))
            eff = clarity * quality[s] + (1.0 - clarity) * srng.uniform()
            keep_rel = srng.random(n_rel) < 0.25 + 0.7 * eff
            n_cand = min(n_nonrel, depth + 60)
            non_idx = srng.choice(n_nonrel, size=n_cand, replace=False, p=pop)
            scores_rel = srng.normal(2.8 * eff, 1.0, size=n_rel) + 0.4 * rel_pop
            scores_non = srng.normal(0.0, 1.0, size=n_cand) + 0.4 * pop[non_idx] / pop[0]
            docs = [rel_docs[k] for k in np.flatnonzero(keep_rel)] + [non_docs[k] for k in non_idx]
            scores = np.concatenate([scores_rel[keep_rel], scores_non])
            order = np.argsort(-scores, kind="stable")[:depth]
            ranked = tuple((docs[k], round(float(scores[k]) + 10.0, 6)) for k in order)
            lists[s][topic] = ranked
            pooled.update(d for d, _ in ranked)
        rel_set = set(rel_docs)
        for d in sorted(pooled):
            judgments[(topic, d)] = int(d in rel_set)
    runs = RunSet([SystemRun(sid, lst) for sid, lst in zip(system_ids, lists)], topics)
    return runs, Qrels(judgments)
