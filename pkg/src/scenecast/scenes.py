"""Per-FSA cultural dimension (scene) vectors from venue categories."""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import SceneError
from .ingest import N_DIMENSIONS, Dataset, DimensionCodebook, Venue


def score_fsa(venues: Sequence[Venue], codebook: DimensionCodebook) -> np.ndarray:
    """Mean over venues of each venue's mean category score vector."""
    if not venues:
        raise SceneError("cannot score an FSA with no venues")
    per_venue = np.empty((len(venues), N_DIMENSIONS))
    for b, venue in enumerate(venues):
        rows = []
        for cat in venue.categories:
            if cat not in codebook:
                raise SceneError(f"category {cat!r} missing from codebook")
            rows.append(codebook.lookup(cat))
        per_venue[b] = np.mean(rows, axis=0)
    return per_venue.mean(axis=0)


@dataclass
class SceneTable:
    city: str
    vectors: dict[int, dict[str, np.ndarray]] = field(default_factory=dict)
    omega: dict[int, dict[str, int]] = field(default_factory=dict)
    carried: dict[int, set[str]] = field(default_factory=dict)

    @property
    def years(self) -> list[int]:
        return sorted(self.vectors)

    def vector(self, year: int, fsa: str) -> np.ndarray:
        try:
            return self.vectors[year][fsa]
        except KeyError:
            raise SceneError(f"no scene vector for {fsa} in {year}") from None

    def matrix(self, year: int, fsas: Sequence[str]) -> np.ndarray:
        return np.stack([self.vector(year, f) for f in fsas])

    def to_csv(self, path: str | Path, extra: dict[str, str] | None = None) -> None:
        extra = extra or {}
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["city", "year", "fsa", *(f"dim_{i}" for i in range(1, N_DIMENSIONS + 1)), "omega", *extra])
            for year in self.years:
                for fsa in sorted(self.vectors[year]):
                    vec = self.vectors[year][fsa]
                    w.writerow([self.city, year, fsa, *(repr(float(x)) for x in vec),
                                self.omega[year][fsa], *extra.values()])

    @classmethod
    def from_csv(cls, path: str | Path) -> "SceneTable":
        table = None
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                table = table or cls(row["city"])
                year = int(row["year"])
                vec = np.array([float(row[f"dim_{i}"]) for i in range(1, N_DIMENSIONS + 1)])
                table.vectors.setdefault(year, {})[row["fsa"]] = vec
                table.omega.setdefault(year, {})[row["fsa"]] = int(row["omega"])
        if table is None:
            raise SceneError(f"{path}: empty scene table")
        return table


def present_venues(dataset: Dataset, year: int) -> dict[str, list[Venue]]:
    """Venues with at least one review in ``year``, grouped by FSA."""
    reviewed = {r.venue_id for r in dataset.reviews if r.year == year}
    out: dict[str, list[Venue]] = defaultdict(list)
    for vid in sorted(reviewed):
        v = dataset.venues[vid]
        out[v.fsa].append(v)
    return out


def score_city_year(
    dataset: Dataset,
    codebook: DimensionCodebook,
    year: int,
    previous: dict[str, np.ndarray] | None = None,
) -> tuple[dict[str, np.ndarray], dict[str, int], set[str]]:
    """Scene vectors for every FSA in ``year``.

    FSAs with no reviewed venue that year carry ``previous[fsa]`` forward.
    Returns (vectors, omega, carried-forward FSAs).
    """
    present = present_venues(dataset, year)
    vectors, omega, carried = {}, {}, set()
    for fsa in dataset.fsas:
        venues = present.get(fsa, [])
        omega[fsa] = len(venues)
        if venues:
            vectors[fsa] = score_fsa(venues, codebook)
        elif previous is not None and fsa in previous:
            vectors[fsa] = previous[fsa].copy()
            carried.add(fsa)
        else:
            raise SceneError(f"FSA {fsa} has no reviewed venues in {year} and no earlier score")
    return vectors, omega, carried


def score_city(dataset: Dataset, codebook: DimensionCodebook, years: Iterable[int] | None = None) -> SceneTable:
    years = sorted(years) if years is not None else list(range(dataset.window[0], dataset.window[1] + 1))
    table = SceneTable(dataset.city)
    previous = None
    for y in years:
        vectors, omega, carried = score_city_year(dataset, codebook, y, previous)
        table.vectors[y], table.omega[y], table.carried[y] = vectors, omega, carried
        previous = vectors
    return table
