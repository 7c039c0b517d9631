"""Turn raw inputs into the per-city artifacts an experiment consumes."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

from ..graph import MobilityGraph, build_year_graph
from ..ingest import CensusTable, Dataset, DimensionCodebook, filter_fsas, venue_centroids
from ..profiling import ProfileResult, profile_users
from ..scenes import SceneTable, score_city

log = logging.getLogger(__name__)


@dataclass
class CityArtifacts:
    city: str
    scene_table: SceneTable
    graphs: dict[int, MobilityGraph]
    census: dict[int, CensusTable]
    centroids: dict[str, tuple[float, float]]
    profile: ProfileResult | None = None

    @property
    def fsas(self) -> list[str]:
        return next(iter(self.graphs.values())).vertices if self.graphs else []

    @property
    def years(self) -> list[int]:
        return sorted(self.graphs)


def prepare_city(
    dataset: Dataset,
    census: Mapping[int, CensusTable],
    codebook: DimensionCodebook,
    centroids: Mapping[str, tuple[float, float]] | None = None,
    topics: tuple[int, int] = (1, 30),
    groups: tuple[int, int] = (2, 15),
    seed: int = 0,
    gibbs_iters: int = 1000,
    min_venues: int = 30,
) -> CityArtifacts:
    """Filter FSAs, profile users, score scenes and build one graph per year of the window."""
    ds = filter_fsas(dataset, min_venues)
    log.info("%s: %d FSAs retained", ds.city, len(ds.fsas))
    prof = profile_users(ds, topics, groups, seed=seed, iters=gibbs_iters)
    scenes = score_city(ds, codebook)
    k = prof.group_model.k
    graphs = {y: build_year_graph(ds, y, prof.group_model.assignment, census, scenes, n_groups=k)
              for y in range(ds.window[0], ds.window[1] + 1)}
    cents = dict(centroids) if centroids else venue_centroids(ds)
    return CityArtifacts(ds.city, scenes, graphs, dict(census), {f: cents[f] for f in ds.fsas if f in cents}, prof)
