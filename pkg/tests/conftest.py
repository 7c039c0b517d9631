from __future__ import annotations

import numpy as np
import pytest

from scenecast.ingest import N_DIMENSIONS, CensusTable, CENSUS_COLUMNS, Dataset, DimensionCodebook, Review, Venue

FSA_CODES = [f"{a}{d}{b}" for a in "MTH" for d in "1234" for b in "ABC"]


def random_dataset(rng: np.random.Generator, n_fsas: int = 5, n_venues: int = 20, n_users: int = 12,
                   n_reviews: int = 60, years: tuple[int, int] = (2011, 2013), n_cats: int = 6) -> Dataset:
    fsas = FSA_CODES[:n_fsas]
    cats = [f"cat {chr(97 + i)}" for i in range(n_cats)]
    venues = {}
    for i in range(n_venues):
        k = int(rng.integers(1, 3))
        chosen = tuple(sorted(rng.choice(cats, k, replace=False)))
        venues[f"v{i}"] = Venue(f"v{i}", fsas[int(rng.integers(n_fsas))], chosen, 43.7, -79.4)
    users = [f"u{i}" for i in range(n_users)]
    reviews = [Review(users[int(rng.integers(n_users))], f"v{int(rng.integers(n_venues))}",
                      int(rng.integers(years[0], years[1] + 1))) for _ in range(n_reviews)]
    return Dataset("Testville", venues, reviews, frozenset(users), window=years)


def random_codebook(rng: np.random.Generator, n_cats: int = 6) -> DimensionCodebook:
    return DimensionCodebook({f"cat {chr(97 + i)}": rng.uniform(1, 5, N_DIMENSIONS) for i in range(n_cats)})


def random_census(rng: np.random.Generator, fsas) -> dict[int, CensusTable]:
    return {v: CensusTable(v, {f: rng.uniform(0, 100, len(CENSUS_COLUMNS)) for f in fsas}) for v in (2011, 2016)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
