import numpy as np
import pytest

from scenecast.errors import SceneError
from scenecast.ingest import DimensionCodebook, Dataset, Review, Venue
from scenecast.scenes import SceneTable, score_city, score_fsa

from conftest import random_codebook, random_dataset


def _book(**scores):
    return DimensionCodebook({k.replace("_", " "): np.asarray(v, dtype=float) for k, v in scores.items()})


def test_single_venue_identity():
    s = np.linspace(1, 5, 15)
    book = _book(cafe=s)
    np.testing.assert_array_equal(score_fsa([Venue("a", "M5V", ("cafe",))], book), s)


def test_inner_and_outer_means():
    book = _book(lo=np.full(15, 2.0), hi=np.full(15, 4.0), top=np.full(15, 5.0), mid=np.full(15, 3.0))
    assert score_fsa([Venue("a", "M5V", ("lo", "hi"))], book)[0] == 3.0
    two = [Venue("a", "M5V", ("mid",)), Venue("b", "M5V", ("top",))]
    assert score_fsa(two, book)[0] == 4.0
    # unequal category counts: venues weigh equally, not categories
    mixed = [Venue("a", "M5V", ("lo", "lo", "hi")), Venue("b", "M5V", ("top",))]
    assert score_fsa(mixed, book)[0] == pytest.approx(0.5 * (8 / 3) + 0.5 * 5)


def test_errors():
    with pytest.raises(SceneError):
        score_fsa([], _book(cafe=np.ones(15)))
    with pytest.raises(SceneError, match="missing"):
        score_fsa([Venue("a", "M5V", ("bar",))], _book(cafe=np.ones(15)))


def test_carry_forward():
    book = _book(cafe=np.full(15, 2.0), bar=np.full(15, 4.0))
    venues = {"a": Venue("a", "M5V", ("cafe",)), "b": Venue("b", "M4M", ("bar",))}
    reviews = [Review("u", "a", 2012), Review("u", "b", 2012), Review("u", "a", 2013)]
    ds = Dataset("x", venues, reviews, frozenset({"u"}))
    table = score_city(ds, book, [2012, 2013])
    np.testing.assert_array_equal(table.vector(2013, "M4M"), table.vector(2012, "M4M"))
    assert table.carried[2013] == {"M4M"}
    assert table.omega[2013] == {"M4M": 0, "M5V": 1}
    with pytest.raises(SceneError, match="no earlier score"):
        score_city(ds, book, [2011, 2012])


def test_hand_table_three_fsas():
    book = _book(cafe=np.full(15, 1.0), bar=np.full(15, 5.0), gallery=np.full(15, 4.0))
    venues = {
        "a1": Venue("a1", "M1A", ("cafe",)), "a2": Venue("a2", "M1A", ("bar",)),
        "b1": Venue("b1", "M2A", ("cafe", "bar")), "b2": Venue("b2", "M2A", ("gallery",)),
        "c1": Venue("c1", "M3A", ("gallery", "gallery", "cafe")),
    }
    reviews = [Review("u", v, 2012) for v in venues]
    table = score_city(Dataset("x", venues, reviews, frozenset({"u"})), book, [2012])
    assert table.vector(2012, "M1A")[0] == 3.0
    assert table.vector(2012, "M2A")[0] == 3.5
    assert table.vector(2012, "M3A")[0] == 3.0


def test_csv_round_trip(tmp_path, rng):
    ds = random_dataset(rng, years=(2011, 2011), n_reviews=80)
    table = score_city(ds, random_codebook(rng), [2011])
    table.to_csv(tmp_path / "s.csv")
    back = SceneTable.from_csv(tmp_path / "s.csv")
    for f in ds.fsas:
        np.testing.assert_array_equal(back.vector(2011, f), table.vector(2011, f))
