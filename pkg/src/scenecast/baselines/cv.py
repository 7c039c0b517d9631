from __future__ import annotations

import csv
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..errors import ModelError
from .models import BaselineModel


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    if folds < 2 or n < folds:
        raise ModelError(f"cannot split {n} rows into {folds} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def grid_search_cv(
    kind: str,
    grid: Sequence[dict[str, Any]],
    X: np.ndarray,
    Y: np.ndarray,
    folds: int = 5,
    seed: int = 0,
) -> tuple[dict[str, Any], list[tuple[dict[str, Any], float]]]:
    """Exhaustive search; score is the mean over folds of the all-output RMSE.

    Returns the best point (first in grid order on ties) and the full table.
    """
    if not grid:
        raise ModelError("empty hyperparameter grid")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    parts = kfold_indices(len(X), folds, seed)
    table = []
    best, best_score = None, np.inf
    for point in grid:
        scores = []
        for k, test in enumerate(parts):
            train = np.concatenate([p for i, p in enumerate(parts) if i != k])
            model = BaselineModel(kind, dict(point), seed).fit(X[train], Y[train])
            err = model.predict(X[test]) - Y[test]
            scores.append(float(np.sqrt(np.mean(err * err))))
        score = float(np.mean(scores))
        table.append((dict(point), score))
        if score < best_score:
            best, best_score = dict(point), score
    return best, table


def write_cv_table(table: list[tuple[dict[str, Any], float]], path: str | Path) -> None:
    keys = sorted({k for point, _ in table for k in point})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*keys, "mean_rmse"])
        for point, score in table:
            w.writerow([*("" if point.get(k) is None else point[k] for k in keys), repr(score)])
