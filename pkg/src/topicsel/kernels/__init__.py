"""Hot numerical kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imports; set ``TOPICSEL_BACKEND=python``
to force the fallback. Both expose the same four functions:

count_discordant
    Inversion count of an integer sequence.
tau_columns
    Kendall tau-a of many candidate score vectors against one ranking.
pairwise_list_stats
    Concatenation-completed tau and union size for all pairs of ranked lists.
best_split
    Exact greedy variance-reduction split search for regression trees.
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("TOPICSEL_BACKEND", "").lower() == "python":
    _impl = _fallback
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _fallback

BACKEND: str = _impl.BACKEND
count_discordant = _impl.count_discordant
tau_columns = _impl.tau_columns
pairwise_list_stats = _impl.pairwise_list_stats
best_split = _impl.best_split

__all__ = [
    "BACKEND",
    "best_split",
    "count_discordant",
    "pairwise_list_stats",
    "tau_columns",
]
