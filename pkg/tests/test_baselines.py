import numpy as np
import pytest

from scenecast.baselines import (BaselineModel, FeatureTable, boosted_fit, fit_tree, forest_fit, grid_search_cv,
                                 kfold_indices, lasso_fit, lasso_lambda_max, naive_fit_predict, soft_threshold,
                                 supervised_pairs)
from scenecast.baselines.lasso import _standardize, lasso_objective
from scenecast.errors import ModelError


def _tables(values_by_year, fsas=("M1A", "M2A")):
    return {y: FeatureTable("x", y, list(fsas), np.asarray(v, dtype=float)) for y, v in values_by_year.items()}


def test_naive_mean():
    T = np.full((2, 15), 3.0)
    tables = _tables({2011: T, 2012: T, 2013: T})
    np.testing.assert_array_equal(naive_fit_predict(tables, [2011, 2012, 2013], ["M2A", "M1A"]), T)
    lo, hi = np.full((2, 15), 2.0), np.full((2, 15), 4.0)
    got = naive_fit_predict(_tables({2011: lo, 2012: hi}), [2011, 2012], ["M1A"])
    assert got[0, 0] == 3.0
    with pytest.raises(ModelError):
        naive_fit_predict(_tables({2011: lo}), [], ["M1A"])


def test_supervised_pairs_skip_gaps():
    rng = np.random.default_rng(0)
    tables = _tables({y: rng.normal(size=(2, 22)) for y in (2011, 2012, 2014, 2015)})
    X, Y = supervised_pairs(tables, [2011, 2012, 2014, 2015])
    assert X.shape == (4, 22) and Y.shape == (4, 15)
    np.testing.assert_array_equal(Y[:2], tables[2012].values[:, :15])


def test_soft_threshold_by_hand():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0


def test_one_feature_lasso_by_hand():
    x = np.array([-1.0, 1.0, -1.0, 1.0])  # already standardized
    y = np.array([0.0, 2.0, 0.0, 2.0])
    w, b = lasso_fit(x[:, None], y, 0.25)
    # rho = mean(x * (y - 1)) = 1, w = S(1, 0.25) / 1
    assert w[0] == pytest.approx(0.75, abs=1e-12)
    assert b == pytest.approx(1.0, abs=1e-12)


def test_lasso_zero_penalty_is_least_squares():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 5))
    y = X @ rng.normal(size=5) + 0.1 * rng.normal(size=60)
    w, b = lasso_fit(X, y, 0.0, tol=1e-14)
    A = np.hstack([X, np.ones((60, 1))])
    sol = np.linalg.solve(A.T @ A, A.T @ y)
    np.testing.assert_allclose(w, sol[:5], atol=1e-6)
    assert b == pytest.approx(sol[5], abs=1e-6)


def test_full_shrinkage_threshold():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(40, 4))
    y = rng.normal(size=40)
    lam = lasso_lambda_max(X, y)
    w, b = lasso_fit(X, y, lam)
    assert np.all(w == 0.0) and b == pytest.approx(y.mean())
    w2, _ = lasso_fit(X, y, lam * 0.9)
    assert np.any(w2 != 0.0)


def test_lasso_objective_monotone():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 6))
    X[:, 1] = X[:, 0] + 0.01 * rng.normal(size=50)
    y = X[:, 0] - 2 * X[:, 3] + rng.normal(size=50)
    hist = []
    lasso_fit(X, y, 0.05, history=hist)
    assert len(hist) > 1
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_lasso_errors():
    with pytest.raises(ModelError):
        lasso_fit(np.ones((3, 2)), np.ones(2), 0.1)
    with pytest.raises(ModelError):
        lasso_fit(np.ones((3, 2)), np.ones(3), -1.0)
    with pytest.raises(ModelError):
        lasso_fit(np.array([[np.nan], [1.0]]), np.ones(2), 0.1)


def test_constant_target():
    X = np.random.default_rng(0).normal(size=(20, 3))
    y = np.full(20, 2.5)
    for m in (lasso_fit(X, y, 0.01), ):
        np.testing.assert_allclose(X @ m[0] + m[1], 2.5)
    np.testing.assert_array_equal(fit_tree(X, y).predict(X), 2.5)
    np.testing.assert_allclose(forest_fit(X, y, 5).predict(X), 2.5)
    np.testing.assert_allclose(boosted_fit(X, y, 5).predict(X), 2.5)


def test_forest_beats_mean_on_square():
    g = np.linspace(-2, 2, 41)
    X = g[:, None]
    y = g ** 2
    f = forest_fit(X, y, 50, seed=0)
    Xt = np.linspace(-1.95, 1.95, 40)[:, None]
    yt = Xt[:, 0] ** 2
    assert np.mean((f.predict(Xt) - yt) ** 2) < np.mean((y.mean() - yt) ** 2)


def test_boosting_training_loss_decreases():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 3))
    y = np.sin(X[:, 0]) + X[:, 1]
    hist = []
    boosted_fit(X, y, 30, 0.1, 2, loss_history=hist)
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_kfold_partition_and_determinism():
    parts = kfold_indices(23, 5, 7)
    assert sorted(np.concatenate(parts).tolist()) == list(range(23))
    assert all(np.array_equal(a, b) for a, b in zip(parts, kfold_indices(23, 5, 7)))
    with pytest.raises(ModelError):
        kfold_indices(3, 5, 0)


def test_grid_search():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(50, 8))
    w = np.zeros(8)
    w[:2] = [3.0, -2.0]
    Y = np.column_stack([X @ w + 0.5 * rng.normal(size=50), X @ w])
    best, table = grid_search_cv("lasso", [{"lam": 0.05}], X, Y)
    assert best == {"lam": 0.05} and len(table) == 1
    grid = [{"lam": float(v)} for v in np.logspace(-3, 1, 9)]
    a = grid_search_cv("lasso", grid, X, Y, seed=3)
    b = grid_search_cv("lasso", grid, X, Y, seed=3)
    assert a == b
    # a huge penalty cannot win on a strong sparse signal
    assert a[0]["lam"] < 1.0


def test_grid_ties_keep_first():
    X = np.random.default_rng(0).normal(size=(20, 2))
    Y = np.ones((20, 1))
    best, _ = grid_search_cv("lasso", [{"lam": 0.2}, {"lam": 0.1}], X, Y)
    assert best == {"lam": 0.2}


@pytest.mark.parametrize("kind,params", [("lasso", {"lam": 0.01}), ("forest", {"n_trees": 5, "max_depth": 3}),
                                         ("boosted", {"rounds": 5, "shrinkage": 0.1})])
def test_model_round_trip(tmp_path, kind, params):
    rng = np.random.default_rng(6)
    X, Y = rng.normal(size=(30, 4)), rng.normal(size=(30, 3))
    m = BaselineModel(kind, params, 1).fit(X, Y)
    m.save(tmp_path / "m.json")
    np.testing.assert_array_equal(BaselineModel.load(tmp_path / "m.json").predict(X), m.predict(X))
    with pytest.raises(ModelError):
        BaselineModel(kind).predict(X)


def test_standardize_constant_column():
    Z, mu, scale = _standardize(np.array([[1.0, 5.0], [3.0, 5.0]]))
    np.testing.assert_array_equal(Z[:, 1], 0.0)
    assert lasso_objective(Z, np.zeros(2), np.zeros(2), 0.0, 1.0) == 0.0
