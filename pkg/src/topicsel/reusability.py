"""Leave-one-group-out reusability of a selected topic subset.

Each group's runs are scored with statAP on samples drawn from a pool built
without that group, i.e. as if the group had not contributed to judging.
"""

from __future__ import annotations

import logging
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .collection import Qrels, RunSet
from .metrics import SCALE, TopicSampler, make_rng, quantize
from .selection import Evaluator

logger = logging.getLogger(__name__)


def held_out_scores(runs: RunSet, qrels: Qrels, P: Sequence[str], groups: Mapping[str, str],
                    quota_per_topic: int, rng_seed, *, depth: int = 100,
                    samplers: dict | None = None) -> np.ndarray:
    """Mean held-out statAP per system (system order of ``runs``).

    Topics whose pool empties when a group is removed are left out of that
    group's mean; a system with no usable topic scores 0.
    """
    ids = runs.system_ids
    group_names = sorted(set(groups[s] for s in ids))
    sums = np.zeros(len(ids), dtype=np.int64)
    counts = np.zeros(len(ids), dtype=np.int64)
    for gi, g in enumerate(group_names):
        held = [k for k, s in enumerate(ids) if groups[s] == g]
        rest = [k for k, s in enumerate(ids) if groups[s] != g]
        for ti, t in enumerate(sorted(P)):
            key = (g, t)
            sampler = None if samplers is None else samplers.get(key)
            if sampler is None:
                sampler = TopicSampler(runs, qrels, t, depth, systems=held, pool_from=rest)
                if samplers is not None:
                    samplers[key] = sampler
            if sampler.sample_space == 0:
                logger.info("group %s: topic %s has no documents left in the pool, skipped", g, t)
                continue
            vals = sampler.draw(quota_per_topic, make_rng((*_as_tuple(rng_seed), gi, ti)))
            sums[held] += quantize(vals)
            counts[held] += 1
    return np.where(counts > 0, sums / np.maximum(counts, 1) / SCALE, 0.0)


def _as_tuple(seed) -> tuple:
    return tuple(seed) if isinstance(seed, (tuple, list)) else (seed,)


def loo_reusability(runs: RunSet, qrels: Qrels, P: Sequence[str], groups: Mapping[str, str] | None,
                    quota_per_topic: int, repeats: int = 20, seed=0, *, depth: int = 100) -> tuple[float, float]:
    """(mean, std) tau of held-out statAP rankings against the full-judgment ranking."""
    groups = dict(groups) if groups is not None else {s: s for s in runs.system_ids}
    if len(set(groups[s] for s in runs.system_ids)) < 2:
        raise ValueError("need at least two groups")
    if not P:
        raise ValueError("P must be non-empty")
    ev = Evaluator(runs, qrels, depth)
    samplers: dict = {}
    taus = []
    for rep in range(repeats):
        scores = held_out_scores(runs, qrels, P, groups, quota_per_topic, (seed, rep), depth=depth,
                                 samplers=samplers)
        # ties resolve by system order, as in order_from_sums
        taus.append(float(kernels.tau_columns(scores[:, None], ev.truth_pos)[0]))
    return float(np.mean(taus)), float(np.std(taus))
