"""k-means with k-means++ seeding and silhouette-based choice of k."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ProfilingError

MAX_ITER = 300
N_INIT = 10
SILHOUETTE_SAMPLE = 5000


@dataclass
class GroupModel:
    k: int
    centroids: np.ndarray
    assignment: dict[str, int]
    silhouette: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "silhouette": self.silhouette,
            "centroids": self.centroids.tolist(),
            "assignment": dict(sorted(self.assignment.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroupModel":
        return cls(d["k"], np.asarray(d["centroids"], dtype=float),
                   {k: int(v) for k, v in d["assignment"].items()}, d.get("silhouette", float("nan")))


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    closest = _sq_dists(X, centers[0][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            i = rng.integers(n)
        else:
            i = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            i = min(i, n - 1)
        centers.append(X[i])
        closest = np.minimum(closest, _sq_dists(X, X[i][None, :])[:, 0])
    return np.array(centers)


def kmeans(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = MAX_ITER) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
    """One Lloyd run from k-means++ seeds.

    Returns (centroids, labels, inertia, inertia history). Empty clusters keep
    their previous centroid.
    """
    C = _kmeanspp(X, k, rng)
    labels = None
    history = []
    for _ in range(max_iter):
        d = _sq_dists(X, C)
        new = d.argmin(axis=1)
        history.append(float(d[np.arange(len(X)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = X[labels == j]
            if len(members):
                C[j] = members.mean(axis=0)
    d = _sq_dists(X, C)
    inertia = float(d[np.arange(len(X)), labels].sum())
    return C, labels, inertia, history


def silhouette(X: np.ndarray, labels: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Per-point silhouette with Euclidean distance; singletons score 0."""
    n = X.shape[0]
    ks, own = np.unique(labels, return_inverse=True)
    out = np.zeros(n)
    if len(ks) < 2:
        return out
    onehot = np.zeros((n, len(ks)))
    onehot[np.arange(n), own] = 1.0
    sizes = onehot.sum(axis=0)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        D = np.sqrt(_sq_dists(X[lo:hi], X))
        D[np.arange(hi - lo), np.arange(lo, hi)] = 0.0
        sums = D @ onehot
        rows = np.arange(hi - lo)
        o = own[lo:hi]
        own_size = sizes[o]
        a = np.where(own_size > 1, sums[rows, o] / np.maximum(own_size - 1, 1), 0.0)
        other = sums / sizes[None, :]
        other[rows, o] = np.inf
        b = other.min(axis=1)
        denom = np.maximum(a, b)
        s = np.divide(b - a, denom, out=np.zeros_like(a), where=denom > 0)
        s[own_size == 1] = 0.0
        out[lo:hi] = s
    return out


def cluster_users(
    embedding: np.ndarray,
    user_ids: list[str],
    k_min: int = 2,
    k_max: int = 15,
    seed: int = 0,
    n_init: int = N_INIT,
) -> tuple[GroupModel, dict[int, float]]:
    """k-means for every k in range; keep the k with the best mean silhouette.

    ``k_max`` is clamped to ``n_users - 1``. Silhouettes on more than 5000
    users are computed on a fixed seeded subsample.
    """
    X = np.asarray(embedding, dtype=float)
    n = X.shape[0]
    if n == 0:
        raise ProfilingError("embedding is empty")
    if n < k_min:
        raise ProfilingError(f"{n} users is fewer than k_min={k_min}")
    k_max = min(k_max, n - 1)
    if k_max < k_min:
        raise ProfilingError(f"need more than {k_min} users to compare cluster counts")
    rng = np.random.default_rng(seed)
    sample = np.arange(n) if n <= SILHOUETTE_SAMPLE else np.sort(rng.choice(n, SILHOUETTE_SAMPLE, replace=False))
    table: dict[int, float] = {}
    fits = {}
    for k in range(k_min, k_max + 1):
        krng = np.random.default_rng([seed, k])
        best = None
        for _ in range(n_init):
            C, labels, inertia, _ = kmeans(X, k, krng)
            if best is None or inertia < best[2]:
                best = (C, labels, inertia)
        fits[k] = best
        table[k] = float(silhouette(X[sample], best[1][sample]).mean())
    k_best = max(table, key=lambda k: (table[k], -k))
    C, labels, _ = fits[k_best]
    assignment = {uid: int(g) for uid, g in zip(user_ids, labels)}
    return GroupModel(k_best, C, assignment, table[k_best]), table
