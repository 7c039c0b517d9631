import numpy as np
import pytest

from scenecast import autodiff as ad
from scenecast import gnn
from scenecast.errors import ModelError
from scenecast.graph import SCENARIOS, MobilityGraph
from scenecast.scenes import SceneTable

import gradcheck


def small_model(seed=0, dropout=0.0, in_v=22, in_e=3, hidden=8):
    return gnn.GnnModel(in_v, in_e, hidden=hidden, n_blocks=5, dropout=dropout, seed=seed)


def loss_fn(model, inputs, target, train=False, seed=None):
    def fn():
        rng = np.random.default_rng(seed) if seed is not None else None
        return ad.mse(model.forward(inputs, train=train, rng=rng), target)
    return fn


def test_full_model_gradients():
    inputs = gradcheck.tiny_graph_inputs(0)
    model = small_model(1, dropout=0.2)
    target = np.random.default_rng(2).normal(size=(3, 15))
    err = gradcheck.check(loss_fn(model, inputs, target, train=True, seed=7), model.parameters())
    assert err < 1e-4


def test_permutation_equivariance():
    inputs = gradcheck.tiny_graph_inputs(3)
    model = small_model(4)
    base = model.forward(inputs).data
    rng = np.random.default_rng(0)
    for _ in range(5):
        order = rng.permutation(3)
        inv = np.argsort(order)
        perm = gnn.GraphInputs(inputs.x[order], inv[inputs.src], inv[inputs.dst], inputs.edge_attr)
        np.testing.assert_allclose(model.forward(perm).data, base[order], atol=1e-9)


def test_isolated_vertex_uses_own_features_only():
    inputs = gradcheck.tiny_graph_inputs(0)
    lone = gnn.GraphInputs(inputs.x[:1], np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                           np.zeros((0, 3)))
    model = small_model(0)
    out = model.forward(lone).data
    # with no edges every aggregation is zero, so the block reduces to h + MLP(h)
    p = model.params
    h = inputs.x[:1] @ p["vertex_encoder.W"].data + p["vertex_encoder.b"].data
    for i in range(5):
        bp = model.block_params(i)
        y = ad.relu(ad.layernorm(ad.Tensor(h), bp["norm.gamma"], bp["norm.beta"])).data
        z = np.maximum(y @ bp["conv.mlp.W1"].data + bp["conv.mlp.b1"].data, 0)
        h = h + z @ bp["conv.mlp.W2"].data + bp["conv.mlp.b2"].data
    np.testing.assert_allclose(out, h @ p["head.W"].data + p["head.b"].data, atol=1e-12)


def test_eval_mode_is_deterministic_and_dropout_zero_matches():
    inputs = gradcheck.tiny_graph_inputs(0)
    m = small_model(0, dropout=0.0)
    a = m.forward(inputs).data
    np.testing.assert_array_equal(a, m.forward(inputs).data)
    np.testing.assert_array_equal(a, m.forward(inputs, train=True, rng=np.random.default_rng(1)).data)
    md = small_model(0, dropout=0.5)
    np.testing.assert_array_equal(md.forward(inputs).data, md.forward(inputs).data)


def test_zero_head_predicts_zero():
    m = small_model(0)
    m.params["head.W"].data[:] = 0.0
    assert np.all(m.forward(gradcheck.tiny_graph_inputs(9)).data == 0.0)


def test_width_checks():
    m = small_model(0, in_v=15)
    with pytest.raises(ModelError):
        m.forward(gradcheck.tiny_graph_inputs(0))


def _graphs_and_scenes(rng, n=4, years=(2011, 2012, 2013)):
    edges = np.array([[0, 1], [1, 2], [2, 3], [0, 3]], dtype=np.int64)[: max(1, n - 1)]
    graphs, scenes = {}, SceneTable("x")
    verts = [f"M{i}A" for i in range(n)]
    for y in years:
        vf = np.hstack([rng.uniform(1, 5, (n, 15)), rng.uniform(0, 100, (n, 7))])
        graphs[y] = MobilityGraph("x", y, verts, vf, edges, rng.integers(1, 5, (len(edges), 3)).astype(float), 7, 2)
        scenes.vectors[y] = {v: vf[i, :15] for i, v in enumerate(verts)}
    return graphs, scenes


def test_zero_epochs_returns_initialisation():
    graphs, scenes = _graphs_and_scenes(np.random.default_rng(0))
    cfg = gnn.TrainConfig(epochs=0, hidden=8, seed=3)
    res = gnn.train(graphs, scenes, SCENARIOS["None"], cfg)
    init = gnn.model_for(gnn.apply_scenario(graphs[2011], SCENARIOS["None"]), cfg)
    for k, t in init.params.items():
        np.testing.assert_array_equal(res.model.params[k].data, t.data)


def test_training_is_deterministic(tmp_path):
    graphs, scenes = _graphs_and_scenes(np.random.default_rng(0))
    cfg = gnn.TrainConfig(epochs=15, hidden=8, seed=3)
    a = gnn.train(graphs, scenes, SCENARIOS["Area info + mobility + group profile"], cfg)
    b = gnn.train(graphs, scenes, SCENARIOS["Area info + mobility + group profile"], cfg)
    assert a.trace == b.trace
    a.write_trace(tmp_path / "a.csv")
    b.write_trace(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_constant_target_memorized():
    graphs, scenes = _graphs_and_scenes(np.random.default_rng(1), years=(2011, 2012))
    c = np.linspace(1.5, 4.5, 15)
    scenes.vectors[2012] = {v: c.copy() for v in graphs[2012].vertices}
    res = gnn.train(graphs, scenes, SCENARIOS["Area info"],
                    gnn.TrainConfig(epochs=400, hidden=16, dropout=0.0, lr=1e-2, seed=0), train_years=[2011, 2012])
    pred = gnn.predict(res.model, graphs[2011], SCENARIOS["Area info"])
    np.testing.assert_allclose(pred, np.tile(c, (4, 1)), atol=0.05)


def test_training_errors():
    graphs, scenes = _graphs_and_scenes(np.random.default_rng(0))
    with pytest.raises(ModelError):
        gnn.train(graphs, scenes, SCENARIOS["None"], gnn.TrainConfig(epochs=1), train_years=[2011])
    with pytest.raises(ModelError):
        gnn.train(graphs, scenes, SCENARIOS["None"], gnn.TrainConfig(epochs=1), train_years=[2011, 2013])
    with pytest.raises(ModelError):
        gnn.TrainConfig(dropout=1.0)


def test_checkpoint_round_trip(tmp_path):
    graphs, scenes = _graphs_and_scenes(np.random.default_rng(0))
    res = gnn.train(graphs, scenes, SCENARIOS["Area info"], gnn.TrainConfig(epochs=3, hidden=8))
    gnn.save_checkpoint(res.model, tmp_path / "m.json", gnn.TrainConfig(epochs=3, hidden=8))
    back = gnn.load_checkpoint(tmp_path / "m.json")
    g = graphs[2012]
    np.testing.assert_array_equal(gnn.predict(back, g, SCENARIOS["Area info"]),
                                  gnn.predict(res.model, g, SCENARIOS["Area info"]))


def test_training_pairs():
    assert gnn.training_pairs([2013, 2011, 2012, 2015]) == [(2011, 2012), (2012, 2013)]
