"""CART regression trees, random forests and squared-error gradient boosting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ModelError


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        return kernels.tree_predict(self.feature, self.threshold, self.left, self.right, self.value,
                                    np.ascontiguousarray(X, dtype=np.float64))

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(*(np.asarray(d[k], dtype=np.int64 if k in ("feature", "left", "right") else np.float64)
                     for k in ("feature", "threshold", "left", "right", "value")))


def fit_tree(X: np.ndarray, y: np.ndarray, samples: np.ndarray | None = None, max_depth: int | None = None,
             min_leaf: int = 1, max_features: int | None = None, seed: int = 0) -> Tree:
    """Variance-reduction CART tree; ``samples`` may repeat rows (bootstrap)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if samples is None:
        samples = np.arange(len(y), dtype=np.int64)
    if len(samples) == 0:
        raise ModelError("cannot grow a tree on an empty training set")
    if min_leaf < 1:
        raise ModelError("min_leaf must be >= 1")
    out = kernels.build_tree(X, y, np.ascontiguousarray(samples, dtype=np.int64),
                             -1 if max_depth is None else int(max_depth), int(min_leaf),
                             0 if max_features is None else int(max_features), int(seed) & (2**64 - 1))
    return Tree(*out)


def _sqrt_features(d: int) -> int:
    return max(1, int(math.sqrt(d)))


@dataclass
class Forest:
    trees: list[Tree]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.mean([t.predict(X) for t in self.trees], axis=0)


def forest_fit(X: np.ndarray, y: np.ndarray, n_trees: int = 100, max_depth: int | None = None,
               min_leaf: int = 1, seed: int = 0, bootstrap: bool = True,
               max_features: int | None = None) -> Forest:
    """Bagged trees with sqrt(d) candidate features per split."""
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise ModelError("empty training set")
    if len(X) < min_leaf:
        raise ModelError(f"{len(X)} rows is fewer than min_leaf={min_leaf}")
    rng = np.random.default_rng(seed)
    mtry = max_features if max_features is not None else _sqrt_features(X.shape[1])
    trees = []
    for _ in range(n_trees):
        samples = rng.integers(0, len(X), len(X)) if bootstrap else np.arange(len(X))
        trees.append(fit_tree(X, y, samples, max_depth, min_leaf, mtry, int(rng.integers(2**63))))
    return Forest(trees)


@dataclass
class Booster:
    base: float
    shrinkage: float
    trees: list[Tree]

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.full(len(X), self.base)
        for t in self.trees:
            out += self.shrinkage * t.predict(X)
        return out


def boosted_fit(X: np.ndarray, y: np.ndarray, rounds: int = 100, shrinkage: float = 0.1, max_depth: int = 3,
                min_leaf: int = 1, loss_history: list[float] | None = None) -> Booster:
    """Least-squares gradient boosting: each round fits a tree to the residuals."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise ModelError("empty training set")
    if not 0 < shrinkage <= 1:
        raise ModelError("shrinkage must lie in (0, 1]")
    base = float(y.mean())
    pred = np.full(len(y), base)
    trees = []
    for _ in range(rounds):
        tree = fit_tree(X, y - pred, None, max_depth, min_leaf)
        pred += shrinkage * tree.predict(X)
        trees.append(tree)
        if loss_history is not None:
            loss_history.append(float(np.mean((y - pred) ** 2)))
    return Booster(base, shrinkage, trees)
