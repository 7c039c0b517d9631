"""Loading and filtering of city review datasets, census tables and the scene codebook.

Venue, review and user files are JSON Lines using the Yelp academic dump field
names. Census tables and the codebook are CSV files with a header row.
"""
from __future__ import annotations

import csv
import json
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import IngestError

log = logging.getLogger(__name__)

STUDY_WINDOW = (2011, 2018)
CENSUS_VINTAGES = (2011, 2016)
N_DIMENSIONS = 15
CENSUS_COLUMNS = (
    "pct_ba_or_higher",
    "avg_rent",
    "pct_visible_minority",
    "median_income",
    "pct_age_20_34",
    "pct_walk_to_work",
    "pct_arts_culture_employment",
)
PERCENT_COLUMNS = tuple(c for c in CENSUS_COLUMNS if c.startswith("pct_"))

_FSA_RE = re.compile(r"^[A-Z][0-9][A-Z]$")


@dataclass(frozen=True)
class Venue:
    venue_id: str
    fsa: str
    categories: tuple[str, ...]
    lat: float | None = None
    lon: float | None = None

    def __post_init__(self):
        if not self.categories:
            raise IngestError(f"venue {self.venue_id} has no categories")
        if not _FSA_RE.match(self.fsa):
            raise IngestError(f"venue {self.venue_id} has malformed FSA {self.fsa!r}")


@dataclass(frozen=True)
class Review:
    user_id: str
    venue_id: str
    year: int


@dataclass
class Dataset:
    city: str
    venues: dict[str, Venue]
    reviews: list[Review]
    users: frozenset[str]
    window: tuple[int, int] = STUDY_WINDOW

    def __post_init__(self):
        dangling = sorted({r.venue_id for r in self.reviews if r.venue_id not in self.venues})
        if dangling:
            raise IngestError(f"reviews reference unknown venues: {', '.join(dangling[:10])}")
        unknown = sorted({r.user_id for r in self.reviews if r.user_id not in self.users})
        if unknown:
            raise IngestError(f"reviews reference unknown users: {', '.join(unknown[:10])}")
        lo, hi = self.window
        bad = [r for r in self.reviews if not lo <= r.year <= hi]
        if bad:
            raise IngestError(f"review year {bad[0].year} outside study window {lo}-{hi}")

    @cached_property
    def fsa_index(self) -> dict[str, list[str]]:
        """FSA code -> sorted venue ids."""
        index: dict[str, list[str]] = defaultdict(list)
        for vid in sorted(self.venues):
            index[self.venues[vid].fsa].append(vid)
        return dict(sorted(index.items()))

    @property
    def fsas(self) -> list[str]:
        return list(self.fsa_index)

    @property
    def categories(self) -> set[str]:
        return {c for v in self.venues.values() for c in v.categories}

    @property
    def years(self) -> list[int]:
        return sorted({r.year for r in self.reviews})

    def counts(self) -> dict[str, int]:
        return {
            "venues": len(self.venues),
            "reviews": len(self.reviews),
            "users": len(self.users),
            "categories": len(self.categories),
            "fsas": len(self.fsa_index),
        }


@dataclass
class CensusTable:
    vintage: int
    rows: dict[str, np.ndarray] = field(default_factory=dict)

    def vector(self, fsa: str) -> np.ndarray:
        try:
            return self.rows[fsa]
        except KeyError:
            raise IngestError(f"census {self.vintage} has no row for FSA {fsa}") from None

    def require(self, fsas: Iterable[str]) -> None:
        missing = [f for f in fsas if f not in self.rows]
        if missing:
            raise IngestError(f"census {self.vintage} missing FSAs: {', '.join(missing)}")


@dataclass
class DimensionCodebook:
    scores: dict[str, np.ndarray]
    names: tuple[str, ...] = tuple(f"dim_{i}" for i in range(1, N_DIMENSIONS + 1))

    def lookup(self, category: str) -> np.ndarray:
        try:
            return self.scores[normalize_category(category)]
        except KeyError:
            raise IngestError(f"category {category!r} missing from codebook") from None

    def __contains__(self, category: str) -> bool:
        return normalize_category(category) in self.scores


def normalize_category(category: str) -> str:
    return " ".join(category.split()).casefold()


def normalize_fsa(code: str | None) -> str | None:
    if not code:
        return None
    fsa = code.replace(" ", "").upper()[:3]
    return fsa if _FSA_RE.match(fsa) else None


def _read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise IngestError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def _split_categories(raw) -> tuple[str, ...]:
    if raw is None:
        return ()
    parts = raw if isinstance(raw, list) else str(raw).split(",")
    return tuple(p.strip() for p in parts if p and p.strip())


def load_dataset(
    venue_path: str | Path,
    review_path: str | Path,
    user_path: str | Path,
    *,
    city: str | None = None,
    window: tuple[int, int] = STUDY_WINDOW,
    fsa_centroids: dict[str, tuple[float, float]] | None = None,
) -> Dataset:
    """Load one city's venues, reviews and users from JSON Lines files.

    Venues without usable categories or FSA are dropped with a warning, as are
    reviews outside ``window`` or of dropped venues. When ``city`` is given,
    venues from other cities are skipped and users are restricted to those
    with at least one retained review.
    """
    venues: dict[str, Venue] = {}
    seen_venues: set[str] = set()
    no_category = no_fsa = 0
    for lineno, rec in _read_jsonl(venue_path):
        try:
            vid = str(rec["business_id"])
        except KeyError:
            raise IngestError(f"{venue_path}:{lineno}: missing business_id") from None
        seen_venues.add(vid)
        if city is not None and rec.get("city", "").strip().casefold() != city.casefold():
            continue
        cats = _split_categories(rec.get("categories"))
        if not cats:
            no_category += 1
            continue
        lat, lon = rec.get("latitude"), rec.get("longitude")
        lat = float(lat) if lat is not None else None
        lon = float(lon) if lon is not None else None
        fsa = normalize_fsa(rec.get("postal_code"))
        if fsa is None and fsa_centroids and lat is not None and lon is not None:
            fsa = assign_fsa(lat, lon, fsa_centroids)
        if fsa is None:
            no_fsa += 1
            continue
        venues[vid] = Venue(vid, fsa, cats, lat, lon)
    if no_category:
        log.warning("dropped %d venues with empty category lists", no_category)
    if no_fsa:
        log.warning("dropped %d venues without a resolvable FSA", no_fsa)

    lo, hi = window
    reviews: list[Review] = []
    dangling: set[str] = set()
    out_of_window = 0
    for lineno, rec in _read_jsonl(review_path):
        try:
            vid = str(rec["business_id"])
            uid = str(rec["user_id"])
            year = int(str(rec["date"])[:4])
        except (KeyError, ValueError):
            raise IngestError(f"{review_path}:{lineno}: review needs user_id, business_id, date") from None
        if vid not in venues:
            if vid not in seen_venues:
                dangling.add(vid)
            continue
        if not lo <= year <= hi:
            out_of_window += 1
            continue
        reviews.append(Review(uid, vid, year))
    if dangling:
        ids = sorted(dangling)
        raise IngestError(f"reviews reference unknown venues: {', '.join(ids[:10])}"
                          + (f" (+{len(ids) - 10} more)" if len(ids) > 10 else ""))
    if out_of_window:
        log.info("skipped %d reviews outside %d-%d", out_of_window, lo, hi)

    users: set[str] = set()
    for lineno, rec in _read_jsonl(user_path):
        try:
            users.add(str(rec["user_id"]))
        except KeyError:
            raise IngestError(f"{user_path}:{lineno}: missing user_id") from None
    if city is not None:
        users &= {r.user_id for r in reviews}

    ds = Dataset(city or "", venues, reviews, frozenset(users), window)
    log.info("loaded %s", ds.counts())
    return ds


def filter_fsas(dataset: Dataset, min_venues: int = 30) -> Dataset:
    """Keep FSAs with at least ``min_venues`` unique venues across all years."""
    counts = Counter(v.fsa for v in dataset.venues.values())
    keep = {f for f, c in counts.items() if c >= min_venues}
    if not keep:
        raise IngestError(f"no FSA has at least {min_venues} unique venues")
    venues = {vid: v for vid, v in dataset.venues.items() if v.fsa in keep}
    reviews = [r for r in dataset.reviews if r.venue_id in venues]
    users = frozenset(r.user_id for r in reviews)
    return Dataset(dataset.city, venues, reviews, users, dataset.window)


def map_census_vintage(year: int, vintages: Iterable[int] = CENSUS_VINTAGES) -> int:
    """Census vintage closest to ``year``; ties go to the earlier vintage."""
    return min(sorted(vintages), key=lambda v: abs(year - v))


def assign_fsa(lat: float, lon: float, centroids: dict[str, tuple[float, float]]) -> str:
    """Nearest-centroid FSA for a coordinate (equirectangular distance)."""
    codes = sorted(centroids)
    pts = np.array([centroids[c] for c in codes])
    dlat = pts[:, 0] - lat
    dlon = (pts[:, 1] - lon) * np.cos(np.radians(lat))
    return codes[int(np.argmin(dlat * dlat + dlon * dlon))]


def load_census(path: str | Path) -> dict[int, CensusTable]:
    tables: dict[int, CensusTable] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"fsa", "vintage", *CENSUS_COLUMNS} - set(reader.fieldnames or ())
        if missing:
            raise IngestError(f"{path}: census columns missing: {', '.join(sorted(missing))}")
        for lineno, row in enumerate(reader, 2):
            fsa = normalize_fsa(row["fsa"])
            if fsa is None:
                raise IngestError(f"{path}:{lineno}: bad FSA {row['fsa']!r}")
            try:
                vintage = int(row["vintage"])
                vec = np.array([float(row[c]) for c in CENSUS_COLUMNS])
            except ValueError:
                raise IngestError(f"{path}:{lineno}: non-numeric census value") from None
            if not np.all(np.isfinite(vec)):
                raise IngestError(f"{path}:{lineno}: non-finite census value")
            for c in PERCENT_COLUMNS:
                if not 0.0 <= float(row[c]) <= 100.0:
                    raise IngestError(f"{path}:{lineno}: {c}={row[c]} outside [0, 100]")
            tables.setdefault(vintage, CensusTable(vintage)).rows[fsa] = vec
    return tables


def write_census(tables: dict[int, CensusTable], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fsa", *CENSUS_COLUMNS, "vintage"])
        for vintage in sorted(tables):
            for fsa, vec in sorted(tables[vintage].rows.items()):
                w.writerow([fsa, *(repr(float(x)) for x in vec), vintage])


def load_codebook(path: str | Path) -> DimensionCodebook:
    dims = [f"dim_{i}" for i in range(1, N_DIMENSIONS + 1)]
    scores: dict[str, np.ndarray] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"category", *dims} - set(reader.fieldnames or ())
        if missing:
            raise IngestError(f"{path}: codebook columns missing: {', '.join(sorted(missing))}")
        for lineno, row in enumerate(reader, 2):
            try:
                vec = np.array([float(row[d]) for d in dims])
            except (TypeError, ValueError):
                raise IngestError(f"{path}:{lineno}: codebook needs 15 numeric scores") from None
            if np.any(vec < 1) or np.any(vec > 5):
                raise IngestError(f"{path}:{lineno}: scores must lie in [1, 5]")
            scores[normalize_category(row["category"])] = vec
    return DimensionCodebook(scores)


def write_codebook(codebook: dict[str, np.ndarray], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["category", *(f"dim_{i}" for i in range(1, N_DIMENSIONS + 1))])
        for cat, vec in codebook.items():
            w.writerow([cat, *(repr(float(x)) for x in vec)])


def load_fsa_centroids(path: str | Path) -> dict[str, tuple[float, float]]:
    """Read ``fsa,latitude,longitude`` rows."""
    out: dict[str, tuple[float, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), 2):
            fsa = normalize_fsa(row.get("fsa"))
            if fsa is None:
                raise IngestError(f"{path}:{lineno}: bad FSA {row.get('fsa')!r}")
            out[fsa] = (float(row["latitude"]), float(row["longitude"]))
    return out


def venue_centroids(dataset: Dataset) -> dict[str, tuple[float, float]]:
    """Mean venue coordinate per FSA, for datasets without a centroid file."""
    out = {}
    for fsa, vids in dataset.fsa_index.items():
        pts = [(dataset.venues[v].lat, dataset.venues[v].lon) for v in vids
               if dataset.venues[v].lat is not None and dataset.venues[v].lon is not None]
        if pts:
            arr = np.array(pts)
            out[fsa] = (float(arr[:, 0].mean()), float(arr[:, 1].mean()))
    return out


def write_dataset(dataset: Dataset, directory: str | Path, *, dates: dict[int, str] | None = None) -> dict[str, Path]:
    """Write a dataset back out in the JSON Lines input schema."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {k: directory / f"{k}.jsonl" for k in ("venues", "reviews", "users")}
    with open(paths["venues"], "w", encoding="utf-8") as fh:
        for vid in sorted(dataset.venues):
            v = dataset.venues[vid]
            fh.write(json.dumps({
                "business_id": v.venue_id,
                "city": dataset.city,
                "categories": ", ".join(v.categories),
                "postal_code": f"{v.fsa} 0A0",
                "latitude": v.lat,
                "longitude": v.lon,
            }) + "\n")
    with open(paths["reviews"], "w", encoding="utf-8") as fh:
        for r in dataset.reviews:
            fh.write(json.dumps({
                "user_id": r.user_id,
                "business_id": r.venue_id,
                "date": (dates or {}).get(r.year, f"{r.year}-06-01 12:00:00"),
            }) + "\n")
    with open(paths["users"], "w", encoding="utf-8") as fh:
        for uid in sorted(dataset.users):
            fh.write(json.dumps({"user_id": uid}) + "\n")
    return paths
