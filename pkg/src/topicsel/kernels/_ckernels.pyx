# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_fallback.py``."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"


cdef long long _inversions(const long long* perm, Py_ssize_t n, long long* tree) noexcept nogil:
    # Fenwick tree over values 0..n-1; values must be a permutation of that range
    cdef Py_ssize_t i, v
    cdef long long seen_le, inv = 0
    for i in range(n + 1):
        tree[i] = 0
    for i in range(n):
        v = perm[i] + 1
        seen_le = 0
        while v > 0:
            seen_le += tree[v]
            v -= v & (-v)
        inv += i - seen_le
        v = perm[i] + 1
        while v <= n:
            tree[v] += 1
            v += v & (-v)
    return inv


def count_discordant(perm):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] p = np.ascontiguousarray(perm, dtype=np.int64)
    cdef Py_ssize_t n = p.shape[0], i, j
    cdef long long inv = 0
    if n < 2:
        return 0
    # arbitrary integer values: plain pair scan
    for i in range(n - 1):
        for j in range(i + 1, n):
            if p[i] > p[j]:
                inv += 1
    return int(inv)


def tau_columns(scores, truth_pos):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sc = np.ascontiguousarray(scores, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tp = np.ascontiguousarray(truth_pos, dtype=np.int64)
    cdef Py_ssize_t n = sc.shape[0], ncol = sc.shape[1], i, j, c
    if n < 2:
        raise ValueError("need at least two systems")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(ncol, dtype=np.float64)
    cdef long long pairs = n * (n - 1) // 2, conc
    cdef bint cand_first, truth_first
    with nogil:
        for c in range(ncol):
            conc = 0
            for i in range(n - 1):
                for j in range(i + 1, n):
                    cand_first = sc[i, c] >= sc[j, c]
                    truth_first = tp[i] < tp[j]
                    if cand_first == truth_first:
                        conc += 1
            out[c] = (2.0 * conc - pairs) / pairs
    return out


def pairwise_list_stats(lists, lengths, Py_ssize_t pool_size):
    cdef cnp.ndarray[cnp.int64_t, ndim=2] ls = np.ascontiguousarray(lists, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ln = np.ascontiguousarray(lengths, dtype=np.int64)
    cdef Py_ssize_t n = ls.shape[0], i, j, k = 0, t, la, lb, u, d
    cdef Py_ssize_t m = n * (n - 1) // 2
    cdef cnp.ndarray[cnp.float64_t, ndim=1] taus = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] unions = np.empty(m, dtype=np.int64)
    cdef long long* pos_a = <long long*> malloc(pool_size * sizeof(long long))
    cdef long long* pos_b = <long long*> malloc(pool_size * sizeof(long long))
    cdef Py_ssize_t cap = 2 * ls.shape[1] + 1
    cdef long long* a_full = <long long*> malloc(cap * sizeof(long long))
    cdef long long* perm = <long long*> malloc(cap * sizeof(long long))
    cdef long long* tree = <long long*> malloc((cap + 1) * sizeof(long long))
    cdef long long inv, pairs
    if not pos_a or not pos_b or not a_full or not perm or not tree:
        free(pos_a); free(pos_b); free(a_full); free(perm); free(tree)
        raise MemoryError()
    try:
        with nogil:
            for t in range(pool_size):
                pos_a[t] = -1
                pos_b[t] = -1
            for i in range(n - 1):
                la = ln[i]
                for t in range(la):
                    pos_a[ls[i, t]] = t
                for j in range(i + 1, n):
                    lb = ln[j]
                    u = 0
                    for t in range(la):
                        a_full[u] = ls[i, t]
                        u += 1
                    for t in range(lb):
                        d = ls[j, t]
                        pos_b[d] = t
                        if pos_a[d] < 0:
                            a_full[u] = d
                            u += 1
                    d = lb
                    for t in range(la):
                        if pos_b[ls[i, t]] < 0:
                            pos_b[ls[i, t]] = d
                            d += 1
                    unions[k] = u
                    if u < 2:
                        taus[k] = 1.0
                    else:
                        for t in range(u):
                            perm[t] = pos_b[a_full[t]]
                        inv = _inversions(perm, u, tree)
                        pairs = u * (u - 1) // 2
                        taus[k] = (pairs - 2.0 * inv) / pairs
                    for t in range(u):
                        pos_b[a_full[t]] = -1
                    k += 1
                for t in range(la):
                    pos_a[ls[i, t]] = -1
    finally:
        free(pos_a); free(pos_b); free(a_full); free(perm); free(tree)
    return taus, unions


def best_split(X, r, order, Py_ssize_t min_leaf):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rr = np.ascontiguousarray(r, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n_feat = od.shape[0], n_node = od.shape[1], f, k, s
    cdef Py_ssize_t best_f = -1
    cdef double best_gain = 0.0, best_thr = 0.0, tot, sl, sr, nl, nr, gain, prev_x, cur_x, thr
    cdef bint have = False
    if n_node < 2 * min_leaf or n_node < 2:
        return -1, 0.0, 0.0
    with nogil:
        for f in range(n_feat):
            tot = 0.0
            for k in range(n_node):
                tot += rr[od[f, k]]
            sl = 0.0
            prev_x = 0.0
            for k in range(n_node):
                s = od[f, k]
                cur_x = x[s, f]
                # candidate split between positions k-1 and k
                if k > 0 and prev_x < cur_x and k >= min_leaf and n_node - k >= min_leaf:
                    nl = k
                    nr = n_node - nl
                    sr = tot - sl
                    gain = sl * sl / nl + sr * sr / nr - tot * tot / n_node
                    if gain > 0.0 and (not have or gain > best_gain):
                        have = True
                        best_gain = gain
                        best_f = f
                        thr = prev_x + (cur_x - prev_x) / 2.0
                        if thr >= cur_x:
                            thr = prev_x
                        best_thr = thr
                sl += rr[s]
                prev_x = cur_x
    if not have:
        return -1, 0.0, 0.0
    return best_f, best_thr, best_gain
