import json

import numpy as np
import pytest

from scenecast.errors import IngestError
from scenecast.ingest import (Dataset, Review, Venue, assign_fsa, filter_fsas, load_census, load_codebook,
                              load_dataset, map_census_vintage, normalize_fsa, write_census, write_codebook,
                              write_dataset)

from conftest import random_census, random_dataset


def _write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")


def test_counts_preserved(tmp_path):
    venues = [{"business_id": f"b{i}", "categories": "Cafe, Bar", "postal_code": "M5V 2T6", "city": "Toronto"}
              for i in range(3)]
    reviews = [{"user_id": "u1", "business_id": "b0", "date": "2012-03-01"},
               {"user_id": "u1", "business_id": "b2", "date": "2015-07-09 10:00:00"}]
    _write_jsonl(tmp_path / "v.jsonl", venues)
    _write_jsonl(tmp_path / "r.jsonl", reviews)
    _write_jsonl(tmp_path / "u.jsonl", [{"user_id": "u1"}])
    ds = load_dataset(tmp_path / "v.jsonl", tmp_path / "r.jsonl", tmp_path / "u.jsonl")
    assert (len(ds.venues), len(ds.reviews), len(ds.users)) == (3, 2, 1)
    assert ds.venues["b0"].fsa == "M5V"
    assert ds.categories == {"Cafe", "Bar"}


def test_unknown_venue_rejected(tmp_path):
    _write_jsonl(tmp_path / "v.jsonl", [{"business_id": "b0", "categories": "Cafe", "postal_code": "M5V"}])
    _write_jsonl(tmp_path / "r.jsonl", [{"user_id": "u1", "business_id": "nope", "date": "2012-01-01"}])
    _write_jsonl(tmp_path / "u.jsonl", [{"user_id": "u1"}])
    with pytest.raises(IngestError, match="unknown venues"):
        load_dataset(tmp_path / "v.jsonl", tmp_path / "r.jsonl", tmp_path / "u.jsonl")


def test_dataset_integrity():
    v = Venue("a", "M5V", ("Cafe",))
    with pytest.raises(IngestError):
        Dataset("x", {"a": v}, [Review("u", "b", 2012)], frozenset({"u"}))
    with pytest.raises(IngestError):
        Dataset("x", {"a": v}, [Review("ghost", "a", 2012)], frozenset({"u"}))
    with pytest.raises(IngestError):
        Dataset("x", {"a": v}, [Review("u", "a", 2009)], frozenset({"u"}))
    with pytest.raises(IngestError):
        Venue("b", "M5V", ())
    with pytest.raises(IngestError):
        Venue("b", "5MV", ("Cafe",))


def test_malformed_json(tmp_path):
    (tmp_path / "v.jsonl").write_text("{not json\n", encoding="utf-8")
    with pytest.raises(IngestError, match="malformed"):
        load_dataset(tmp_path / "v.jsonl", tmp_path / "v.jsonl", tmp_path / "v.jsonl")


def _fsa_dataset(sizes):
    venues = {}
    for k, (fsa, n) in enumerate(sizes.items()):
        for i in range(n):
            venues[f"{fsa}-{i}"] = Venue(f"{fsa}-{i}", fsa, ("Cafe",))
    reviews = [Review("u", vid, 2012) for vid in venues]
    return Dataset("x", venues, reviews, frozenset({"u"}))


def test_filter_threshold_inclusive():
    ds = filter_fsas(_fsa_dataset({"M5V": 30, "M4M": 29}))
    assert ds.fsas == ["M5V"]
    assert len(ds.reviews) == 30
    with pytest.raises(IngestError):
        filter_fsas(_fsa_dataset({"M5V": 29, "M4M": 29}))


@pytest.mark.parametrize("year,vintage", [(2011, 2011), (2013, 2011), (2014, 2016), (2016, 2016), (2018, 2016)])
def test_census_vintage(year, vintage):
    assert map_census_vintage(year) == vintage


def test_vintage_tie_goes_to_earlier():
    assert map_census_vintage(2012, (2010, 2014)) == 2010


def test_normalize_and_assign_fsa():
    assert normalize_fsa("m5v 2t6") == "M5V"
    assert normalize_fsa("12345") is None
    assert normalize_fsa(None) is None
    cents = {"M5V": (43.64, -79.40), "M4M": (43.66, -79.34)}
    assert assign_fsa(43.65, -79.33, cents) == "M4M"


def test_round_trips(tmp_path, rng):
    ds = random_dataset(rng)
    paths = write_dataset(ds, tmp_path / "d")
    back = load_dataset(paths["venues"], paths["reviews"], paths["users"], window=ds.window)
    assert back.counts() == ds.counts()
    assert sorted(back.reviews, key=repr) == sorted(ds.reviews, key=repr)

    census = random_census(rng, ds.fsas)
    write_census(census, tmp_path / "c.csv")
    got = load_census(tmp_path / "c.csv")
    for v in census:
        for f in census[v].rows:
            np.testing.assert_array_equal(got[v].vector(f), census[v].vector(f))

    book = {"cafe": np.linspace(1, 5, 15)}
    write_codebook(book, tmp_path / "b.csv")
    np.testing.assert_array_equal(load_codebook(tmp_path / "b.csv").lookup("  CAFE "), book["cafe"])


def test_codebook_range_checked(tmp_path):
    write_codebook({"cafe": np.full(15, 6.0)}, tmp_path / "b.csv")
    with pytest.raises(IngestError, match=r"\[1, 5\]"):
        load_codebook(tmp_path / "b.csv")
