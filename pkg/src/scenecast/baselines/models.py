"""Multi-output wrappers: one independent regressor per scene dimension."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ModelError
from .lasso import lasso_fit
from .trees import Booster, Forest, Tree, boosted_fit, forest_fit

# sweep cap for lasso fits inside baselines; near-collinear scene columns converge slowly at small penalties
LASSO_SWEEPS = 1000
KINDS = ("naive", "lasso", "forest", "boosted")
LABELS = {"naive": "Naive", "lasso": "Lasso", "forest": "Random forest", "boosted": "Boosted trees"}

# exhaustive tuning grids; depth None means unlimited
DEFAULT_GRIDS: dict[str, list[dict[str, Any]]] = {
    "lasso": [{"lam": float(v)} for v in np.logspace(-4, 0, 7)],
    "forest": [{"n_trees": t, "max_depth": d} for t in (100, 300) for d in (3, 6, None)],
    "boosted": [{"rounds": r, "shrinkage": s} for r in (100, 300) for s in (0.05, 0.1)],
}


@dataclass
class BaselineModel:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    models: list[Any] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("lasso", "forest", "boosted"):
            raise ModelError(f"unknown fitted baseline {self.kind!r}")

    def fit(self, X: np.ndarray, Y: np.ndarray) -> "BaselineModel":
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or len(X) != len(Y):
            raise ModelError(f"X {X.shape} and Y {Y.shape} do not align")
        self.models = []
        for j in range(Y.shape[1]):
            if self.kind == "lasso":
                self.models.append(lasso_fit(X, Y[:, j], self.params["lam"],
                                             max_iter=self.params.get("max_iter", LASSO_SWEEPS)))
            elif self.kind == "forest":
                self.models.append(forest_fit(X, Y[:, j], self.params.get("n_trees", 100),
                                              self.params.get("max_depth"), self.params.get("min_leaf", 1),
                                              seed=self.seed * 1000 + j))
            else:
                self.models.append(boosted_fit(X, Y[:, j], self.params.get("rounds", 100),
                                               self.params.get("shrinkage", 0.1), self.params.get("max_depth", 3)))
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if not self.models:
            raise ModelError("baseline model is not fitted")
        X = np.asarray(X, dtype=float)
        cols = []
        for m in self.models:
            if self.kind == "lasso":
                w, b = m
                cols.append(X @ w + b)
            else:
                cols.append(m.predict(X))
        return np.column_stack(cols)

    def to_dict(self) -> dict:
        if self.kind == "lasso":
            subs = [{"weights": w.tolist(), "intercept": b} for w, b in self.models]
        elif self.kind == "forest":
            subs = [{"trees": [t.to_dict() for t in f.trees]} for f in self.models]
        else:
            subs = [{"base": m.base, "shrinkage": m.shrinkage, "trees": [t.to_dict() for t in m.trees]}
                    for m in self.models]
        return {"kind": self.kind, "params": self.params, "seed": self.seed, "models": subs}

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineModel":
        m = cls(d["kind"], dict(d["params"]), d["seed"])
        for s in d["models"]:
            if m.kind == "lasso":
                m.models.append((np.asarray(s["weights"], dtype=float), float(s["intercept"])))
            elif m.kind == "forest":
                m.models.append(Forest([Tree.from_dict(t) for t in s["trees"]]))
            else:
                m.models.append(Booster(s["base"], s["shrinkage"], [Tree.from_dict(t) for t in s["trees"]]))
        return m

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BaselineModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
