import csv

import numpy as np
import pytest

from scenecast.config import RunConfig, derive_seed, read_config, write_config
from scenecast.errors import PipelineError
from scenecast.eval import (ExperimentPlan, SynthConfig, ci95, east_west_split, generate_synthetic_city,
                            prepare_city, rmse, run_experiment)
from scenecast.eval.experiment import read_results, summarize_results
from scenecast.eval.metrics import row_rmse
from scenecast.eval.report import bar_chart_svg
from scenecast.scenes import score_city


def test_rmse_examples():
    t = np.arange(30.0).reshape(2, 15)
    assert rmse(t, t) == 0.0
    assert rmse(t + 0.7, t) == pytest.approx(0.7, abs=1e-12)
    assert abs(rmse(np.array([1.0, 2.0]), np.array([3.0, 4.0])) - 2.0) < 1e-9
    with pytest.raises(PipelineError):
        rmse(np.zeros(2), np.zeros(3))


def test_rmse_row_permutation_invariant():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(6, 15)), rng.normal(size=(6, 15))
    p = rng.permutation(6)
    assert rmse(a[p], b[p]) == pytest.approx(rmse(a, b), abs=1e-15)
    np.testing.assert_allclose(row_rmse(a, b)[p], row_rmse(a[p], b[p]))


def test_ci95_examples():
    mean, half = ci95([1, 2, 3, 4])
    # s = sqrt(5/3), t(0.975, 3) = 3.182446305284263
    assert abs(mean - 2.5) < 1e-9
    assert abs(half - 3.182446305284263 * np.sqrt(5 / 3) / 2) < 1e-9
    assert round(half, 3) == 2.054
    assert ci95([0.3, 0.3, 0.3]) == (pytest.approx(0.3), 0.0)
    with pytest.raises(PipelineError):
        ci95([1.0])


def test_east_west():
    cents = {f: (43.7, lon) for f, lon in zip("ABCD", (-79.5, -79.4, -79.3, -79.2))}
    assert east_west_split(list("ABCD"), cents) == {"A": "west", "B": "west", "C": "east", "D": "east"}
    same = {f: (43.7, -79.4) for f in "ABC"}
    assert set(east_west_split(list("ABC"), same).values()) == {"east"}
    with pytest.raises(PipelineError):
        east_west_split(["Z"], cents)


def test_synthetic_city_is_deterministic():
    cfg = SynthConfig(n_fsas=5, n_users=30)
    a, b = generate_synthetic_city(cfg, 4), generate_synthetic_city(cfg, 4)
    assert a.dataset.reviews == b.dataset.reviews
    assert a.share == b.share
    c = generate_synthetic_city(cfg, 5)
    assert c.dataset.reviews != a.dataset.reviews


def test_synthetic_scenes_follow_planted_share():
    cfg = SynthConfig(n_fsas=4, n_users=30, mode="area_driven")
    city = generate_synthetic_city(cfg, 0)
    table = score_city(city.dataset, city.codebook)
    for y in table.years:
        first = np.array([table.vector(y, f)[0] for f in city.dataset.fsas])
        share = np.array([city.share[y][f] for f in city.dataset.fsas])
        assert np.corrcoef(first, share)[0, 1] > 0.95
        assert np.all((first >= 1) & (first <= 5))


@pytest.mark.parametrize("bad", [dict(mode="sideways"), dict(n_fsas=1), dict(contrast=3.0), dict(years=(2012, 2012)),
                                 dict(active_per_year=40)])
def test_synthetic_config_rejects(bad):
    with pytest.raises(PipelineError):
        generate_synthetic_city(SynthConfig(**bad), 0)


@pytest.fixture(scope="module")
def small_city():
    city = generate_synthetic_city(SynthConfig(n_fsas=6, n_users=40), 1)
    return prepare_city(city.dataset, city.census, city.codebook, city.centroids, topics=(1, 3), groups=(2, 3),
                        seed=0, gibbs_iters=30)


def test_plan_bookkeeping(small_city, tmp_path):
    plan = ExperimentPlan([small_city.city], ["None"], [2014], 2, base_seed=3, models=["gnn", "naive"], epochs=5,
                          hidden=8)
    report = run_experiment(plan, {small_city.city: small_city})
    assert [r.label for r in report.results].count("None") == 2
    assert len(report.samples(small_city.city, "None")) == 2
    again = run_experiment(plan, {small_city.city: small_city})
    assert [r.rmse for r in again.results] == [r.rmse for r in report.results]
    assert len({r.seed for r in report.results}) == len(report.results)

    paths = report.write(tmp_path, "abc123")
    per_fsa = list(csv.DictReader(open(paths["per_fsa.csv"], encoding="utf-8")))
    assert len(per_fsa) == len(small_city.fsas) * len(plan.labels())
    assert {r["region"] for r in per_fsa} == {"east", "west"}
    assert all(r["config_hash"] == "abc123" for r in per_fsa)

    summary = {(r["city"], r["model_or_scenario"]): float(r["mean"])
               for r in csv.DictReader(open(paths["summary.csv"], encoding="utf-8"))}
    for city, label, mean, _ in summarize_results(read_results(paths["results.csv"])):
        assert summary[(city, label)] == mean


def test_missing_artifact_names_the_cell(small_city):
    plan = ExperimentPlan([small_city.city], ["None"], [2019], 1, models=["gnn"], epochs=1)
    with pytest.raises(PipelineError, match="2019"):
        run_experiment(plan, {small_city.city: small_city})
    with pytest.raises(PipelineError):
        run_experiment(ExperimentPlan(["Elsewhere"], ["None"], [2014], 1), {small_city.city: small_city})


def test_derived_seeds_injective():
    plan = ExperimentPlan(["A", "B"], test_years=[2016, 2017, 2018], repetitions=25)
    seeds = [plan.seed_for(*c) for c in plan.cells()]
    assert len(seeds) == len(set(seeds)) == 2 * 12 * 3 * 25
    assert derive_seed(0, "x") != derive_seed(1, "x")
    assert derive_seed(0, "x", 1) == derive_seed(0, "x", 1)


def test_config_round_trip(tmp_path):
    cfg = RunConfig(city="Calgary", venues=str(tmp_path / "v.jsonl"), out=str(tmp_path / "out"), test_years=[2017], reps=3,
                    scenarios=["None", "Area info"], topics_range=(1, 5), lr=0.01)
    write_config(cfg, tmp_path / "run.cfg", relative_to=tmp_path)
    back = read_config(tmp_path / "run.cfg")
    assert back.to_dict() == cfg.to_dict()
    assert back.hash() == cfg.hash()
    back.out = "elsewhere"
    assert back.hash() == cfg.hash()
    back.reps = 4
    assert back.hash() != cfg.hash()


def test_config_errors(tmp_path):
    (tmp_path / "bad.cfg").write_text("reps: 3\n", encoding="utf-8")
    with pytest.raises(PipelineError):
        read_config(tmp_path / "bad.cfg")
    with pytest.raises(PipelineError):
        RunConfig().set("colour", "blue")
    with pytest.raises(PipelineError):
        RunConfig().set("window", "2018:2011")
    with pytest.raises(PipelineError):
        RunConfig(test_years=[2011]).validate(require_inputs=False)
    with pytest.raises(PipelineError, match="not set"):
        RunConfig().validate()


def test_chart_svg():
    svg = bar_chart_svg("Town", [("None", 0.2, 0.01), ("Naive", 0.4, float("nan"))], "h1")
    assert svg.startswith("<svg") and "None" in svg and "h1" in svg
