"""Experiment grid: cities x models/scenarios x test years x repetitions."""
from __future__ import annotations

import csv
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .. import gnn
from ..baselines import DEFAULT_GRIDS, LABELS, BaselineModel, build_feature_tables, grid_search_cv, naive_fit_predict, supervised_pairs
from ..config import derive_seed
from ..errors import PipelineError
from ..graph import SCENARIOS
from .metrics import ci95, east_west_split, rmse, row_rmse
from .pipeline import CityArtifacts

WORKERS_ENV = "SCENECAST_WORKERS"


@dataclass
class ExperimentPlan:
    cities: list[str]
    scenarios: list[str] = field(default_factory=lambda: list(SCENARIOS))
    test_years: list[int] = field(default_factory=lambda: [2016, 2017, 2018])
    repetitions: int = 25
    base_seed: int = 0
    models: list[str] = field(default_factory=lambda: ["gnn", "naive", "lasso", "forest", "boosted"])
    epochs: int = 10000
    lr: float = 1e-3
    dropout: float = 0.1
    hidden: int = 64
    folds: int = 5
    grids: dict[str, list[dict]] = field(default_factory=lambda: dict(DEFAULT_GRIDS))

    def labels(self) -> list[str]:
        out = list(self.scenarios) if "gnn" in self.models else []
        return out + [LABELS[m] for m in ("naive", "lasso", "forest", "boosted") if m in self.models]

    def cells(self) -> list[tuple[str, str, int, int]]:
        return [(c, label, y, r) for c in self.cities for label in self.labels()
                for y in self.test_years for r in range(self.repetitions)]

    def seed_for(self, city: str, label: str, year: int, rep: int) -> int:
        return derive_seed(self.base_seed, "cell", city, label, year, rep)

    def check_seeds(self) -> None:
        seeds = [self.seed_for(*c) for c in self.cells()]
        if len(set(seeds)) != len(seeds):
            raise PipelineError("derived seeds collide; change the base seed")


@dataclass
class CellResult:
    city: str
    label: str
    test_year: int
    repetition: int
    seed: int
    rmse: float
    fsas: list[str]
    fsa_rmse: np.ndarray


_KIND_OF = {v: k for k, v in LABELS.items()}


def run_cell(plan: ExperimentPlan, art: CityArtifacts, label: str, test_year: int, rep: int) -> CellResult:
    seed = plan.seed_for(art.city, label, test_year, rep)
    where = f"{art.city} / {label} / {test_year} / rep {rep}"
    train_years = [y for y in art.years if y < test_year]
    if test_year - 1 not in art.graphs or test_year not in art.scene_table.vectors or len(train_years) < 2:
        raise PipelineError(f"{where}: missing artifacts for test year {test_year}")
    fsas = art.fsas
    truth = art.scene_table.matrix(test_year, fsas)
    if label in SCENARIOS:
        scenario = SCENARIOS[label]
        cfg = gnn.TrainConfig(epochs=plan.epochs, lr=plan.lr, dropout=plan.dropout, hidden=plan.hidden, seed=seed)
        result = gnn.train(art.graphs, art.scene_table, scenario, cfg, train_years=train_years)
        pred = gnn.predict(result.model, art.graphs[test_year - 1], scenario)
    else:
        kind = _KIND_OF.get(label)
        if kind is None:
            raise PipelineError(f"{where}: unknown model")
        tables = build_feature_tables(art.scene_table, art.census, fsas, train_years + [test_year])
        if kind == "naive":
            pred = naive_fit_predict(tables, train_years, fsas)
        else:
            X, Y = supervised_pairs(tables, train_years)
            best, _ = grid_search_cv(kind, plan.grids[kind], X, Y, plan.folds, seed % (2**32))
            model = BaselineModel(kind, best, seed % (2**32)).fit(X, Y)
            pred = model.predict(tables[test_year - 1].rows(fsas))
    return CellResult(art.city, label, test_year, rep, seed, rmse(pred, truth), list(fsas), row_rmse(pred, truth))


_STATE: dict = {}


def _init_worker(plan, artifacts):
    _STATE["plan"], _STATE["artifacts"] = plan, artifacts


def _run_remote(cell):
    city, label, year, rep = cell
    return run_cell(_STATE["plan"], _STATE["artifacts"][city], label, year, rep)


def pool_size() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise PipelineError(f"{WORKERS_ENV} must be an integer") from None


def run_experiment(plan: ExperimentPlan, artifacts: Mapping[str, CityArtifacts],
                   workers: int | None = None) -> "RmseReport":
    plan.check_seeds()
    missing = [c for c in plan.cities if c not in artifacts]
    if missing:
        raise PipelineError(f"no artifacts for cities {missing}")
    cells = plan.cells()
    workers = pool_size() if workers is None else workers
    if workers <= 1:
        results = [run_cell(plan, artifacts[c], label, y, r) for c, label, y, r in cells]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(plan, dict(artifacts))) as ex:
            results = list(ex.map(_run_remote, cells))
    centroids = {c: artifacts[c].centroids for c in plan.cities}
    return RmseReport(results, plan.labels(), centroids)


@dataclass
class RmseReport:
    results: list[CellResult]
    label_order: list[str]
    centroids: dict[str, dict[str, tuple[float, float]]] = field(default_factory=dict)

    def _key(self, r: CellResult):
        rank = self.label_order.index(r.label) if r.label in self.label_order else len(self.label_order)
        return (r.city, rank, r.label, r.test_year, r.repetition)

    def sorted_results(self) -> list[CellResult]:
        return sorted(self.results, key=self._key)

    def _groups(self) -> dict[tuple[str, str], list[CellResult]]:
        out: dict[tuple[str, str], list[CellResult]] = defaultdict(list)
        for r in self.sorted_results():
            out[(r.city, r.label)].append(r)
        return out

    def samples(self, city: str, label: str) -> list[float]:
        """One sample per repetition: its RMSE averaged over the test years."""
        by_rep: dict[int, list[float]] = defaultdict(list)
        for r in self._groups().get((city, label), []):
            by_rep[r.repetition].append(r.rmse)
        return [float(np.mean(by_rep[k])) for k in sorted(by_rep)]

    def summary(self) -> list[tuple[str, str, float, float]]:
        rows = []
        for city, label in self._groups():
            s = self.samples(city, label)
            mean, half = ci95(s) if len(s) > 1 else (s[0], float("nan"))
            rows.append((city, label, mean, half))
        return rows

    def summary_by_year(self) -> list[tuple[str, str, int, float, float]]:
        rows = []
        for (city, label), rs in self._groups().items():
            for y in sorted({r.test_year for r in rs}):
                s = [r.rmse for r in rs if r.test_year == y]
                mean, half = ci95(s) if len(s) > 1 else (s[0], float("nan"))
                rows.append((city, label, y, mean, half))
        return rows

    def per_fsa_by_year(self) -> list[tuple[str, str, int, str, float]]:
        rows = []
        for (city, label), rs in self._groups().items():
            for y in sorted({r.test_year for r in rs}):
                ry = [r for r in rs if r.test_year == y]
                mean = np.mean([r.fsa_rmse for r in ry], axis=0)
                rows.extend((city, label, y, f, float(m)) for f, m in zip(ry[0].fsas, mean))
        return rows

    def per_fsa(self) -> list[tuple[str, str, str, float, str]]:
        acc: dict[tuple[str, str, str], list[float]] = defaultdict(list)
        for city, label, _, f, m in self.per_fsa_by_year():
            acc[(city, label, f)].append(m)
        rows = []
        for (city, label, f), ms in acc.items():
            regions = east_west_split(sorted({k[2] for k in acc if k[0] == city}), self.centroids[city]) \
                if city in self.centroids and self.centroids[city] else {}
            rows.append((city, label, f, float(np.mean(ms)), regions.get(f, "")))
        return rows

    def east_west(self) -> list[tuple[str, str, str, float]]:
        acc: dict[tuple[str, str, str], list[float]] = defaultdict(list)
        for city, label, _, m, region in self.per_fsa():
            if region:
                acc[(city, label, region)].append(m)
        return [(c, l, reg, float(np.mean(v))) for (c, l, reg), v in acc.items()]

    def best_label(self, city: str, exclude: Iterable[str] = ()) -> tuple[str, float]:
        rows = [(m, label) for c, label, m, _ in self.summary() if c == city and label not in set(exclude)]
        m, label = min(rows)
        return label, m

    def write(self, directory: str | Path, config_hash: str = "") -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {}

        def emit(name: str, header: Sequence[str], rows: Iterable[Sequence]):
            path = directory / name
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([*header, "config_hash"])
                for row in rows:
                    w.writerow([repr(v) if isinstance(v, float) else v for v in row] + [config_hash])
            paths[name] = path

        emit("results.csv", ["city", "model_or_scenario", "test_year", "repetition", "rmse"],
             [(r.city, r.label, r.test_year, r.repetition, r.rmse) for r in self.sorted_results()])
        emit("summary.csv", ["city", "model_or_scenario", "mean", "ci95_half_width"], self.summary())
        emit("summary_by_year.csv", ["city", "model_or_scenario", "test_year", "mean", "ci95_half_width"],
             self.summary_by_year())
        emit("per_fsa.csv", ["city", "model_or_scenario", "fsa", "mean_rmse", "region"], self.per_fsa())
        emit("per_fsa_by_year.csv", ["city", "model_or_scenario", "test_year", "fsa", "mean_rmse"],
             self.per_fsa_by_year())
        emit("east_west.csv", ["city", "model_or_scenario", "region", "mean_rmse"], self.east_west())
        return paths


def read_results(path: str | Path) -> list[tuple[str, str, int, int, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [(r["city"], r["model_or_scenario"], int(r["test_year"]), int(r["repetition"]), float(r["rmse"]))
                for r in csv.DictReader(fh)]


def summarize_results(rows: Sequence[tuple[str, str, int, int, float]]) -> list[tuple[str, str, float, float]]:
    """Recompute summary rows (per-repetition mean over test years, then t interval) from results rows."""
    by: dict[tuple[str, str], dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    order: list[tuple[str, str]] = []
    for city, label, _, rep, value in rows:
        if (city, label) not in by:
            order.append((city, label))
        by[(city, label)][rep].append(value)
    out = []
    for key in order:
        s = [float(np.mean(v)) for _, v in sorted(by[key].items())]
        mean, half = ci95(s) if len(s) > 1 else (s[0], float("nan"))
        out.append((*key, mean, half))
    return out
