"""Yearly FSA mobility graphs and the eight feature scenarios."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, replace
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import GraphError
from .ingest import N_DIMENSIONS, CensusTable, Dataset, map_census_vintage
from .scenes import SceneTable


@dataclass(frozen=True)
class Scenario:
    name: str
    use_area_info: bool
    use_mobility: bool
    use_group_profile: bool


SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario("Area info + mobility + group profile", True, True, True),
        Scenario("Area info + mobility", True, True, False),
        Scenario("Area info + group profile", True, False, True),
        Scenario("Area info", True, False, False),
        Scenario("Mobility + group profile", False, True, True),
        Scenario("Mobility", False, True, False),
        Scenario("Group profile", False, False, True),
        Scenario("None", False, False, False),
    )
}


def get_scenario(name: str) -> Scenario:
    for key, s in SCENARIOS.items():
        if key.casefold() == name.strip().casefold():
            return s
    raise GraphError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")


@dataclass
class MobilityGraph:
    city: str
    year: int
    vertices: list[str]
    vertex_features: np.ndarray  # n x (15 [+ 7])
    edges: np.ndarray  # E x 2, i < j, lexicographic
    edge_features: np.ndarray  # E x (1 [+ k]); column 0 is the weight
    n_census: int = 0
    n_groups: int = 0

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edge_lookup(self, i: int, j: int) -> np.ndarray:
        a, b = min(i, j), max(i, j)
        hit = np.nonzero((self.edges[:, 0] == a) & (self.edges[:, 1] == b))[0]
        if len(hit) == 0:
            raise KeyError((i, j))
        return self.edge_features[hit[0]]

    def permuted(self, order: Sequence[int]) -> "MobilityGraph":
        """Graph with vertices listed in ``order`` (new position p holds old vertex order[p])."""
        order = np.asarray(order)
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        e = inv[self.edges] if len(self.edges) else self.edges.copy()
        e = np.sort(e, axis=1) if len(e) else e
        idx = np.lexsort((e[:, 1], e[:, 0])) if len(e) else np.arange(0)
        return replace(
            self,
            vertices=[self.vertices[i] for i in order],
            vertex_features=self.vertex_features[order],
            edges=e[idx],
            edge_features=self.edge_features[idx],
        )

    def to_dict(self) -> dict:
        return {
            "city": self.city,
            "year": self.year,
            "vertices": list(self.vertices),
            "vertex_features": self.vertex_features.tolist(),
            "edges": [
                {"i": int(i), "j": int(j), "weight": float(f[0]), "group_counts": [float(x) for x in f[1:]]}
                for (i, j), f in zip(self.edges, self.edge_features)
            ],
            "n_census": self.n_census,
            "n_groups": self.n_groups,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MobilityGraph":
        edges = np.array([[e["i"], e["j"]] for e in d["edges"]], dtype=np.int64).reshape(-1, 2)
        n_groups = d.get("n_groups", 0)
        feats = np.array([[e["weight"], *e["group_counts"]] for e in d["edges"]], dtype=float).reshape(-1, 1 + n_groups)
        return cls(d["city"], d["year"], list(d["vertices"]), np.asarray(d["vertex_features"], dtype=float),
                   edges, feats, d.get("n_census", 0), n_groups)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MobilityGraph":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def user_fsa_sets(dataset: Dataset, year: int) -> dict[str, set[str]]:
    visits: dict[str, set[str]] = defaultdict(set)
    for r in dataset.reviews:
        if r.year == year:
            visits[r.user_id].add(dataset.venues[r.venue_id].fsa)
    return visits


def build_year_graph(
    dataset: Dataset,
    year: int,
    group_assignment: Mapping[str, int] | None,
    census: Mapping[int, CensusTable] | None,
    scene_table: SceneTable,
    n_groups: int | None = None,
    vertices: Sequence[str] | None = None,
) -> MobilityGraph:
    """Undirected FSA graph for one calendar year.

    Each user adds every pair of distinct FSAs they reviewed that year. An
    edge's weight is the number of such users; group counts tally those users
    by group. Users without a group count toward the weight only.
    """
    verts = sorted(vertices if vertices is not None else dataset.fsas)
    pos = {f: i for i, f in enumerate(verts)}
    assignment = group_assignment or {}
    k = n_groups if n_groups is not None else (max(assignment.values()) + 1 if assignment else 0)

    tallies: dict[tuple[int, int], np.ndarray] = {}
    for uid, fsas in sorted(user_fsa_sets(dataset, year).items()):
        ids = sorted(pos[f] for f in fsas if f in pos)
        g = assignment.get(uid)
        for pair in combinations(ids, 2):
            row = tallies.get(pair)
            if row is None:
                row = tallies[pair] = np.zeros(1 + k)
            row[0] += 1
            if g is not None:
                row[1 + g] += 1
    pairs = sorted(tallies)
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    edge_features = np.array([tallies[p] for p in pairs]).reshape(-1, 1 + k)

    scenes = scene_table.matrix(year, verts)
    blocks = [scenes]
    n_census = 0
    if census is not None:
        vintage = map_census_vintage(year, census.keys())
        table = census[vintage]
        table.require(verts)
        blocks.append(np.stack([table.vector(f) for f in verts]))
        n_census = blocks[-1].shape[1]
    return MobilityGraph(dataset.city, year, verts, np.hstack(blocks), edges, edge_features, n_census, k)


def apply_scenario(graph: MobilityGraph, scenario: Scenario) -> MobilityGraph:
    """Mask feature blocks; the edge set and the scene block are never touched."""
    vf = graph.vertex_features
    n_census = graph.n_census
    if not scenario.use_area_info:
        vf = vf[:, :N_DIMENSIONS]
        n_census = 0
    weight = graph.edge_features[:, :1]
    if not scenario.use_mobility:
        weight = np.ones_like(weight)
    groups = graph.edge_features[:, 1:]
    n_groups = graph.n_groups
    if not scenario.use_group_profile:
        groups = groups[:, :0]
        n_groups = 0
    return replace(graph, vertex_features=vf.copy(), edge_features=np.hstack([weight, groups]),
                   n_census=n_census, n_groups=n_groups)
