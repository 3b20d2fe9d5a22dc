"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and the same arithmetic order, so both backends agree bit-for-bit on the
integer outputs and to the last ulp on the float ones.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def count_discordant(perm):
    """Number of inversions in ``perm`` (pairs i < j with perm[i] > perm[j])."""
    perm = np.asarray(perm, dtype=np.int64)
    n = perm.shape[0]
    if n < 2:
        return 0
    upper = np.triu(perm[:, None] > perm[None, :], k=1)
    return int(upper.sum())


def tau_columns(scores, truth_pos):
    """Kendall tau-a of each score column against a reference ranking.

    ``scores`` is (S, C). Column c ranks the S systems by descending score,
    ties broken by ascending row index. ``truth_pos[s]`` is the position of
    system s in the reference ranking.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth_pos = np.asarray(truth_pos, dtype=np.int64)
    n = scores.shape[0]
    if n < 2:
        raise ValueError("need at least two systems")
    iu, ju = np.triu_indices(n, k=1)
    # i < j: candidate puts i first iff s_i >= s_j
    cand_first = scores[iu, :] >= scores[ju, :]
    truth_first = (truth_pos[iu] < truth_pos[ju])[:, None]
    concordant = np.count_nonzero(cand_first == truth_first, axis=0)
    pairs = n * (n - 1) // 2
    return (2.0 * concordant - pairs) / pairs


def _pair_tau_union(a, b, pool_size):
    pos_a = np.full(pool_size, -1, dtype=np.int64)
    pos_a[a] = np.arange(a.shape[0])
    b_only = b[pos_a[b] < 0]
    a_full = np.concatenate([a, b_only])
    pos_b = np.full(pool_size, -1, dtype=np.int64)
    pos_b[b] = np.arange(b.shape[0])
    a_only = a[pos_b[a] < 0]
    pos_b[a_only] = b.shape[0] + np.arange(a_only.shape[0])
    u = a_full.shape[0]
    if u < 2:
        return 1.0, u
    inv = count_discordant(pos_b[a_full])
    pairs = u * (u - 1) // 2
    return (pairs - 2.0 * inv) / pairs, u


def pairwise_list_stats(lists, lengths, pool_size):
    """Concatenation-completed tau and union size for every pair of lists.

    ``lists`` is (S, D) of pool indices, row s valid up to ``lengths[s]``.
    Returns (taus, unions) in (0,1), (0,2), ..., (S-2,S-1) order.
    """
    lists = np.asarray(lists, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    n = lists.shape[0]
    m = n * (n - 1) // 2
    taus = np.empty(m, dtype=np.float64)
    unions = np.empty(m, dtype=np.int64)
    k = 0
    for i in range(n - 1):
        a = lists[i, : lengths[i]]
        for j in range(i + 1, n):
            taus[k], unions[k] = _pair_tau_union(a, lists[j, : lengths[j]], pool_size)
            k += 1
    return taus, unions


def best_split(X, r, order, min_leaf):
    """Exact best variance-reduction split of one node.

    ``order[f]`` lists the node's sample indices sorted (stably) by column f.
    Returns (feature, threshold, gain); feature is -1 when nothing splits.
    Ties go to the lowest feature index, then the lowest threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    n_feat, n_node = order.shape
    if n_node < 2 * min_leaf or n_node < 2:
        return -1, 0.0, 0.0
    xs = X[order, np.arange(n_feat)[:, None]]
    cs = np.cumsum(r[order], axis=1)
    tot = cs[:, -1:]
    sl = cs[:, :-1]
    nl = np.arange(1, n_node, dtype=np.float64)
    nr = n_node - nl
    sr = tot - sl
    gain = sl * sl / nl + sr * sr / nr - tot * tot / n_node
    valid = xs[:, :-1] < xs[:, 1:]
    valid[:, : min_leaf - 1] = False
    if min_leaf > 1:
        valid[:, n_node - min_leaf :] = False
    valid &= gain > 0.0
    if not valid.any():
        return -1, 0.0, 0.0
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))
    f, k = divmod(flat, n_node - 1)
    lo, hi = xs[f, k], xs[f, k + 1]
    thr = lo + (hi - lo) / 2.0
    if thr >= hi:
        thr = lo
    return f, float(thr), float(gain[f, k])
