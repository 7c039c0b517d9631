from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from ..errors import PipelineError


def rmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Root mean squared error over every cell."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise PipelineError(f"rmse: prediction {pred.shape} vs truth {truth.shape}")
    if pred.size == 0:
        raise PipelineError("rmse of empty arrays")
    d = pred - truth
    return float(np.sqrt(np.mean(d * d)))


def row_rmse(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-row RMSE across the dimensions (one value per FSA)."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise PipelineError(f"row_rmse: prediction {pred.shape} vs truth {truth.shape}")
    d = pred - truth
    return np.sqrt(np.mean(d * d, axis=1))


def ci95(samples: Sequence[float]) -> tuple[float, float]:
    """Mean and Student-t 95% half-width."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise PipelineError(f"ci95 needs at least 2 samples, got {x.size}")
    mean = float(x.mean())
    s = float(x.std(ddof=1))
    return mean, float(stats.t.ppf(0.975, x.size - 1) * s / np.sqrt(x.size))


def east_west_split(fsas: Sequence[str], centroids: Mapping[str, tuple[float, float]]) -> dict[str, str]:
    """West = longitude strictly below the median; the rest (median included) is east."""
    missing = [f for f in fsas if f not in centroids]
    if missing:
        raise PipelineError(f"no centroid for FSAs {', '.join(missing)}")
    lons = np.array([centroids[f][1] for f in fsas], dtype=float)
    if lons.size == 0:
        return {}
    med = float(np.median(lons))
    return {f: ("west" if lon < med else "east") for f, lon in zip(fsas, lons)}
