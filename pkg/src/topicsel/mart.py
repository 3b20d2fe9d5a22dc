"""MART: least-squares gradient boosting over leaf-limited regression trees.

Trees grow best-first: the leaf whose best split removes the most squared
error is split next, until ``num_leaves`` leaves exist or nothing splits.
Split search is exact over midpoints of consecutive distinct values; ties go
to the lowest feature index, then the lowest threshold, then the oldest leaf.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels

logger = logging.getLogger(__name__)

FORMAT = "topicsel.mart"
FORMAT_VERSION = 1


@dataclass
class RegressionTree:
    """Flat array tree. ``feature[n] == -1`` marks a leaf holding ``value[n]``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature < 0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node id reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return node
            go_left = X[rows[internal], feat[internal]] <= self.threshold[node[internal]]
            node[internal] = np.where(go_left, self.left[node[internal]], self.right[node[internal]])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"value": float(self.value[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        feature, threshold, left, right, value = [], [], [], [], []

        def visit(n: dict) -> int:
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if "value" in n:
                value[i] = float(n["value"])
            else:
                feature[i] = int(n["feature"])
                threshold[i] = float(n["threshold"])
                left[i] = visit(n["left"])
                right[i] = visit(n["right"])
            return i

        visit(d)
        return cls(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                   np.array(right, dtype=np.int64), np.array(value))


@dataclass
class MartModel:
    trees: list[RegressionTree]
    shrinkage: float
    base_score: float
    num_leaves: int
    n_features: int
    train_mse: list[float] = field(default_factory=list)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite feature value")
        return X

    def predict(self, X) -> np.ndarray:
        """base_score + shrinkage * sum of tree outputs, one value per row."""
        X = self._check(X)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return self.base_score + self.shrinkage * total

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "base_score": self.base_score,
            "shrinkage": self.shrinkage,
            "num_leaves": self.num_leaves,
            "n_features": self.n_features,
            "train_mse": list(self.train_mse),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MartModel":
        if d.get("format") != FORMAT:
            raise ValueError(f"not a {FORMAT} model")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        return cls([RegressionTree.from_dict(t) for t in d["trees"]], float(d["shrinkage"]),
                   float(d["base_score"]), int(d["num_leaves"]), int(d["n_features"]),
                   [float(x) for x in d.get("train_mse", [])])

    def save(self, path: str | os.PathLike, provenance: dict | None = None) -> None:
        d = self.to_dict()
        if provenance is not None:
            d["provenance"] = provenance
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(d, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "MartModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def predict(model: MartModel, v) -> float | np.ndarray:
    """Score one 1-D feature vector (returns float) or a 2-D batch."""
    out = model.predict(v)
    return float(out[0]) if np.ndim(v) == 1 else out


def _grow_tree(X, r, order, num_leaves, min_leaf) -> tuple[RegressionTree, np.ndarray]:
    n, n_feat = X.shape
    feature, threshold, left, right, value = [-1], [0.0], [-1], [-1], [0.0]
    leaf_of = np.zeros(n, dtype=np.int64)
    orders = {0: order}
    splits = {0: kernels.best_split(X, r, order, min_leaf)}
    n_leaves = 1
    while n_leaves < num_leaves:
        best = None
        for node in sorted(splits):
            f, thr, gain = splits[node]
            if f >= 0 and (best is None or gain > splits[best][2]):
                best = node
        if best is None:
            break
        f, thr, _ = splits.pop(best)
        node_order = orders.pop(best)
        goes_left = np.zeros(n, dtype=bool)
        members = node_order[0]
        goes_left[members] = X[members, f] <= thr
        n_left = int(goes_left[members].sum())
        ids = []
        for side, size in ((True, n_left), (False, members.size - n_left)):
            cid = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            child = np.ascontiguousarray(node_order[goes_left[node_order] == side].reshape(n_feat, size))
            leaf_of[child[0]] = cid
            orders[cid] = child
            splits[cid] = kernels.best_split(X, r, child, min_leaf)
            ids.append(cid)
        feature[best], threshold[best] = int(f), float(thr)
        left[best], right[best] = ids
        n_leaves += 1
    for leaf, node_order in orders.items():
        value[leaf] = float(r[np.sort(node_order[0])].mean())
    tree = RegressionTree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                          np.array(right, dtype=np.int64), np.array(value))
    return tree, tree.value[leaf_of]


def fit_gbrt(X, y, num_trees: int = 50, num_leaves: int = 10, shrinkage: float = 0.1,
             min_leaf: int = 1) -> MartModel:
    """Pointwise least-squares boosting; ``train_mse[i]`` is the MSE after i trees."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ValueError("need a non-empty 2-D X with one label per row")
    if num_leaves < 2:
        raise ValueError("num_leaves must be >= 2")
    if not 0.0 < shrinkage <= 1.0:
        raise ValueError("shrinkage must be in (0, 1]")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature value")
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T, dtype=np.int64)
    base = float(y.mean())
    F = np.full(y.shape[0], base)
    mse = [float(np.mean((y - F) ** 2))]
    trees = []
    for it in range(num_trees):
        r = y - F
        tree, step = _grow_tree(X, r, order, num_leaves, min_leaf)
        if it == 0 and tree.n_leaves == 1 and mse[0] > 0:
            logger.warning("no split separates the training data; model predicts the mean label")
        trees.append(tree)
        F = F + shrinkage * step
        mse.append(float(np.mean((y - F) ** 2)))
        if mse[-1] > mse[-2] * (1 + 1e-12):
            raise RuntimeError(f"training MSE increased at iteration {it + 1}: {mse[-2]} -> {mse[-1]}")
    return MartModel(trees, shrinkage, base, num_leaves, X.shape[1], mse)
