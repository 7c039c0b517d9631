"""The compiled kernels and their pure-Python twins must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenecast import kernels

py = kernels.get_backend("python")
try:
    cy = kernels.get_backend("cython")
except ImportError:  # extension not built
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled extension not built")
seeds = st.integers(0, 2**32 - 1)


@needs_ext
@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(2, 8))
def test_gibbs_sweep_bitwise(seed, K, V):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 60))
    docs = np.sort(rng.integers(0, 5, n)).astype(np.int64)
    words = rng.integers(0, V, n).astype(np.int64)
    z = rng.integers(0, K, n).astype(np.int64)
    ndk = np.zeros((5, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (docs, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)
    u = rng.random(n)
    state_a = [a.copy() for a in (z, ndk, nkw, nk)]
    state_b = [a.copy() for a in (z, ndk, nkw, nk)]
    py.gibbs_sweep(docs, words, *state_a, 0.5, 0.01, u)
    cy.gibbs_sweep(docs, words, *state_b, 0.5, 0.01, u)
    for a, b in zip(state_a, state_b):
        np.testing.assert_array_equal(a, b)
    assert state_a[3].sum() == n


@needs_ext
@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from([-1, 0, 2, 5]), st.integers(1, 3), st.integers(0, 4))
def test_tree_bitwise(seed, depth, min_leaf, mtry):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(2, 40)), int(rng.integers(1, 5))
    X = np.round(rng.normal(size=(n, d)), 1)  # rounding creates ties
    y = rng.normal(size=n)
    samples = rng.integers(0, n, n).astype(np.int64)
    a = py.build_tree(X, y, samples, depth, min_leaf, mtry, seed)
    b = cy.build_tree(X, y, samples, depth, min_leaf, mtry, seed)
    for x, z in zip(a, b):
        np.testing.assert_array_equal(x, z)
    Xt = rng.normal(size=(10, d))
    np.testing.assert_array_equal(py.tree_predict(*a, Xt), cy.tree_predict(*b, Xt))


@needs_ext
@settings(max_examples=25, deadline=None)
@given(seeds)
def test_adam_bitwise(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 50))
    arrs = [rng.normal(size=n), rng.normal(size=n), rng.normal(size=n) * 0.1, rng.random(n)]
    a = [x.copy() for x in arrs]
    b = [x.copy() for x in arrs]
    py.adam_update(*a, 1e-3, 0.9, 0.999, 1e-8, 0.19, 0.002)
    cy.adam_update(*b, 1e-3, 0.9, 0.999, 1e-8, 0.19, 0.002)
    for x, z in zip(a, b):
        np.testing.assert_allclose(x, z, rtol=1e-15, atol=1e-300)


@needs_ext
@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(0.0, 0.5))
def test_lasso_cd_agrees(seed, lam):
    rng = np.random.default_rng(seed)
    n, d = 30, int(rng.integers(1, 6))
    Z = rng.normal(size=(n, d))
    G = Z.T @ Z / n
    c = Z.T @ rng.normal(size=n) / n
    wa, wb = np.zeros(d), np.zeros(d)
    ra = py.lasso_cd(G, c, wa, lam, 1e-10, 500, 0)
    rb = cy.lasso_cd(G, c, wb, lam, 1e-10, 500, 0)
    assert ra[0] == rb[0]
    np.testing.assert_allclose(wa, wb, rtol=0, atol=1e-14)


def test_tree_memorizes_without_bootstrap():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    out = kernels.build_tree(X, y, np.arange(40, dtype=np.int64), -1, 1, 0, 0)
    np.testing.assert_array_equal(kernels.tree_predict(*out, X), y)


def test_env_var_forces_python_backend():
    code = "from scenecast import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, SCENECAST_NO_EXT="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
