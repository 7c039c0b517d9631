"""Synthetic cities with planted scene dynamics, for validating the pipeline.

Each FSA has a pool of "A" venues (high on the first half of the dimensions)
and "B" venues (high on the second half). In every year a fixed number of
venues is active and all of them are reviewed, so the FSA's scene vector is a
known function of the active A share ``p_f(y)``. How that share moves
depends on the mode:

- ``area_driven``: ``dp = gamma * c_f`` where ``c_f`` drives the FSA's census
  columns (most cleanly ``pct_ba_or_higher``).
- ``flow_driven``: ``dp = gamma * (2 a_f - 1)`` where ``a_f`` is the share of
  group-0 users visiting the FSA (visible only through edge group counts).
- ``none``: ``dp`` is pure noise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import PipelineError
from ..ingest import CENSUS_COLUMNS, CENSUS_VINTAGES, N_DIMENSIONS, CensusTable, Dataset, DimensionCodebook, Review, Venue

MODES = ("area_driven", "flow_driven", "none")
_LETTERS = "ABCEGHJKLMNPRSTVXY"
# category names avoid digits, which token cleaning strips
_WORDS = ("amber", "birch", "cedar", "delta", "ember", "fjord", "garnet", "harbor", "indigo", "juniper",
          "kestrel", "lantern", "meadow", "nectar", "onyx", "pepper", "quartz", "raven", "saffron", "tundra")


@dataclass
class SynthConfig:
    n_fsas: int = 20
    n_users: int = 150
    n_groups: int = 2
    years: tuple[int, int] = (2011, 2014)
    mode: str = "area_driven"
    venues_per_fsa: int = 60
    active_per_year: int = 30
    visits_per_user: int = 3
    gamma: float = 0.2
    contrast: float = 2.0
    flow_sharpness: float = 2.0
    noise: float = 0.01
    scene_categories: int = 4
    taste_categories: int = 6
    city: str = "Synthville"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise PipelineError(f"unknown synthetic mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.n_fsas < 2 or self.n_users < self.n_groups or self.n_groups < 1:
            raise PipelineError("need at least 2 FSAs and one user per group")
        if max(self.scene_categories, self.taste_categories, self.n_groups) > len(_WORDS):
            raise PipelineError(f"at most {len(_WORDS)} categories per kind and groups supported")
        if self.n_fsas > len(_LETTERS) * 10:
            raise PipelineError(f"at most {len(_LETTERS) * 10} FSAs supported")
        if not 0 < self.active_per_year <= self.venues_per_fsa // 2:
            raise PipelineError("active_per_year must lie in [1, venues_per_fsa / 2]")
        if not 0 < self.contrast <= 2:
            raise PipelineError("contrast must lie in (0, 2] so scores stay within [1, 5]")
        if self.years[1] <= self.years[0]:
            raise PipelineError("synthetic window needs at least two years")
        if not 1 <= self.visits_per_user <= self.n_fsas:
            raise PipelineError("visits_per_user must lie in [1, n_fsas]")


@dataclass
class SyntheticCity:
    dataset: Dataset
    census: dict[int, CensusTable]
    codebook: DimensionCodebook
    centroids: dict[str, tuple[float, float]]
    share: dict[int, dict[str, float]]  # planted active A share per year and FSA
    drivers: dict[str, dict[str, float]] = field(default_factory=dict)  # c_f, a_f per FSA
    groups: dict[str, int] = field(default_factory=dict)  # planted user groups


def _codebook(cfg: SynthConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    half = N_DIMENSIONS // 2 + 1
    hi = 3.0 + cfg.contrast * np.r_[np.ones(half), -np.ones(N_DIMENSIONS - half)]
    book = {}
    for arch, base in (("a", hi), ("b", 6.0 - hi)):
        for j in range(cfg.scene_categories):
            book[_scene_name(arch, j)] = np.clip(base + rng.normal(0, 0.2, N_DIMENSIONS), 1, 5)
    for g in range(cfg.n_groups):
        for j in range(cfg.taste_categories):
            book[_taste_name(g, j)] = np.full(N_DIMENSIONS, 3.0)
    return book


def _scene_name(arch: str, j: int) -> str:
    return f"scene {arch} {_WORDS[j]}"


def _taste_name(g: int, j: int) -> str:
    return f"taste {_WORDS[g]} {_WORDS[j]}"


def generate_synthetic_city(cfg: SynthConfig, seed: int) -> SyntheticCity:
    cfg.validate()
    rng = np.random.default_rng([seed, 0x5CE7E])
    years = list(range(cfg.years[0], cfg.years[1] + 1))
    fsas = [f"{_LETTERS[i // 10]}{i % 10}{_LETTERS[(i * 7) % len(_LETTERS)]}" for i in range(cfg.n_fsas)]
    book = _codebook(cfg, rng)

    c = rng.uniform(-1, 1, cfg.n_fsas)
    a = rng.uniform(0.1, 0.9, cfg.n_fsas)
    # group visit weights: group 0 follows a_f, other groups follow 1 - a_f (raised to flow_sharpness)
    visit_w = np.vstack([a] + [1 - a] * (cfg.n_groups - 1)) ** cfg.flow_sharpness
    if cfg.mode != "flow_driven":
        visit_w = np.ones_like(visit_w)
    visit_w = visit_w / visit_w.sum(axis=1, keepdims=True)

    lons = np.sort(rng.uniform(-79.6, -79.2, cfg.n_fsas))
    centroids = {f: (float(rng.uniform(43.6, 43.8)), float(lons[i])) for i, f in enumerate(fsas)}

    venues: dict[str, Venue] = {}
    pool: dict[str, dict[str, list[str]]] = {}
    venue_group: dict[str, int] = {}
    for i, f in enumerate(fsas):
        pool[f] = {"a": [], "b": []}
        lat, lon = centroids[f]
        for j in range(cfg.venues_per_fsa):
            arch = "a" if j % 2 == 0 else "b"
            g = 0 if rng.random() < a[i] else int(rng.integers(1, cfg.n_groups)) if cfg.n_groups > 1 else 0
            vid = f"v{i:03d}_{j:03d}"
            cats = (_scene_name(arch, int(rng.integers(cfg.scene_categories))),
                    _taste_name(g, int(rng.integers(cfg.taste_categories))))
            venue_group[vid] = g
            venues[vid] = Venue(vid, f, cats, lat + rng.normal(0, 0.003), lon + rng.normal(0, 0.003))
            pool[f][arch].append(vid)

    users = [f"u{k:04d}" for k in range(cfg.n_users)]
    user_group = {u: k % cfg.n_groups for k, u in enumerate(users)}
    by_group = [[u for u in users if user_group[u] == g] for g in range(cfg.n_groups)]

    p = rng.uniform(0.35, 0.65, cfg.n_fsas)
    share: dict[int, dict[str, float]] = {}
    reviews: list[Review] = []
    for y in years:
        share[y] = {f: float(p[i]) for i, f in enumerate(fsas)}
        active: dict[str, list[str]] = {}
        for i, f in enumerate(fsas):
            n_a = int(round(cfg.active_per_year * p[i]))
            picks_a = rng.choice(len(pool[f]["a"]), n_a, replace=False)
            picks_b = rng.choice(len(pool[f]["b"]), cfg.active_per_year - n_a, replace=False)
            active[f] = sorted([pool[f]["a"][k] for k in picks_a] + [pool[f]["b"][k] for k in picks_b])
        reviewed: set[str] = set()
        for u in users:
            g = user_group[u]
            for fi in rng.choice(cfg.n_fsas, cfg.visits_per_user, replace=False, p=visit_w[g]):
                f = fsas[fi]
                match = [v for v in active[f] if venue_group[v] == g]
                cand = match if match and rng.random() < 0.9 else active[f]
                vid = cand[int(rng.integers(len(cand)))]
                reviews.append(Review(u, vid, y))
                reviewed.add(vid)
        # every active venue is reviewed at least once, by a user sharing its taste
        for f in fsas:
            for vid in active[f]:
                if vid not in reviewed:
                    members = by_group[venue_group[vid]]
                    reviews.append(Review(members[int(rng.integers(len(members)))], vid, y))
                    reviewed.add(vid)

        if cfg.mode == "area_driven":
            drift = cfg.gamma * c
        elif cfg.mode == "flow_driven":
            drift = cfg.gamma * (2 * a - 1)
        else:
            drift = np.zeros(cfg.n_fsas)
        p = np.clip(p + drift + rng.normal(0, cfg.noise, cfg.n_fsas), 0.0, 1.0)

    # census columns share a latent factor; under area_driven it is the drift driver c_f
    lo = np.array([10, 800, 5, 40000, 10, 2, 1], dtype=float)
    hi = np.array([60, 2500, 70, 120000, 40, 30, 10], dtype=float)
    factor = c if cfg.mode == "area_driven" else rng.uniform(-1, 1, cfg.n_fsas)
    loading = np.r_[1.0, rng.uniform(0.6, 0.9, len(CENSUS_COLUMNS) - 1)]
    census = {}
    for vintage in CENSUS_VINTAGES:
        z = factor[:, None] * loading + rng.normal(0, 0.15, (cfg.n_fsas, len(CENSUS_COLUMNS))) * np.r_[0.1, np.ones(len(CENSUS_COLUMNS) - 1)]
        vals = lo + (hi - lo) * np.clip(0.5 + 0.4 * z, 0.0, 1.0)
        census[vintage] = CensusTable(vintage, {f: vals[i] for i, f in enumerate(fsas)})

    ds = Dataset(cfg.city, venues, reviews, frozenset(users), window=(years[0], years[-1]))
    drivers = {f: {"c": float(c[i]), "a": float(a[i])} for i, f in enumerate(fsas)}
    return SyntheticCity(ds, census, DimensionCodebook(book), centroids, share, drivers, user_group)
