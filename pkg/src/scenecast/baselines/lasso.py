"""Lasso by cyclic coordinate descent on standardized features."""
from __future__ import annotations

import logging

import numpy as np

from .. import kernels
from ..errors import ModelError

log = logging.getLogger(__name__)


def soft_threshold(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    scale = np.where(sd > 0, sd, 1.0)
    Z = (X - mu) / scale
    Z[:, sd == 0] = 0.0
    return Z, mu, scale


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which every standardized weight is zero."""
    Z, _, _ = _standardize(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    return float(np.max(np.abs(Z.T @ (y - y.mean()))) / len(y)) if Z.shape[1] else 0.0


def lasso_objective(Z: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, lam: float) -> float:
    r = y - Z @ w - b
    return float(r @ r / (2 * len(y)) + lam * np.abs(w).sum())


def lasso_fit(X: np.ndarray, y: np.ndarray, lam: float, tol: float = 1e-8, max_iter: int = 100_000,
              history: list[float] | None = None) -> tuple[np.ndarray, float]:
    """Minimize ``(1/2n)||y - Zw - b||^2 + lam ||w||_1`` over standardized ``Z``.

    Sweeps (in covariance form, on the Gram matrix of ``Z``) until the
    largest coordinate change falls below ``tol``. Returns
    weights and intercept on the original feature scale. If ``history`` is
    given, the objective after each sweep is appended to it.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ModelError(f"lasso: X {X.shape} and y {y.shape} do not align")
    if X.shape[0] < 2:
        raise ModelError("lasso needs at least two rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ModelError("lasso inputs contain non-finite values")
    if lam < 0:
        raise ModelError("lasso penalty must be >= 0")
    n, d = X.shape
    Z, mu, scale = _standardize(X)
    b = float(y.mean())
    G = np.ascontiguousarray(Z.T @ Z / n)
    c = np.ascontiguousarray(Z.T @ (y - b) / n)
    w = np.zeros(d)
    if history is None:
        sweeps, delta = kernels.lasso_cd(G, c, w, float(lam), float(tol), int(max_iter), 0)
        if delta >= tol:
            log.debug("lasso stopped after %d sweeps with max change %.3g", sweeps, delta)
    else:
        done = 0
        while done < max_iter:
            it, delta = kernels.lasso_cd(G, c, w, float(lam), float(tol), int(max_iter - done), 1)
            done += it
            history.append(lasso_objective(Z, y, w, b, lam))
            if delta < tol:
                break
    coef = w / scale
    return coef, float(b - mu @ coef)
