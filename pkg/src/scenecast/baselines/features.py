"""Per-FSA feature tables H^(y) = [T | D] and supervised (y -> y+1) pairs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import ModelError
from ..ingest import N_DIMENSIONS, CensusTable, map_census_vintage
from ..scenes import SceneTable


@dataclass
class FeatureTable:
    city: str
    year: int
    fsas: list[str]
    values: np.ndarray  # len(fsas) x (15 + n_census)

    @property
    def scenes(self) -> np.ndarray:
        return self.values[:, :N_DIMENSIONS]

    def rows(self, fsas: Sequence[str]) -> np.ndarray:
        pos = {f: i for i, f in enumerate(self.fsas)}
        missing = [f for f in fsas if f not in pos]
        if missing:
            raise ModelError(f"{self.city} {self.year}: no features for FSAs {', '.join(missing)}")
        return self.values[[pos[f] for f in fsas]]


def build_feature_tables(
    scene_table: SceneTable,
    census: Mapping[int, CensusTable] | None,
    fsas: Sequence[str],
    years: Sequence[int] | None = None,
) -> dict[int, FeatureTable]:
    fsas = sorted(fsas)
    out = {}
    for y in years if years is not None else scene_table.years:
        blocks = [scene_table.matrix(y, fsas)]
        if census is not None:
            table = census[map_census_vintage(y, census.keys())]
            table.require(fsas)
            blocks.append(np.stack([table.vector(f) for f in fsas]))
        out[y] = FeatureTable(scene_table.city, y, fsas, np.hstack(blocks))
    return out


def supervised_pairs(tables: Mapping[int, FeatureTable], years: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Stack ``H^(y) -> T^(y+1)`` rows for every consecutive pair inside ``years``."""
    ys = sorted(set(years))
    X, Y = [], []
    for a, b in zip(ys, ys[1:]):
        if b != a + 1:
            continue
        fsas = tables[a].fsas
        X.append(tables[a].values)
        Y.append(tables[b].rows(fsas)[:, :N_DIMENSIONS])
    if not X:
        raise ModelError(f"no consecutive year pairs in {ys}")
    return np.vstack(X), np.vstack(Y)
