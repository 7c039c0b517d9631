import numpy as np
import pytest

from scenecast import autodiff as ad
from scenecast import kernels
from scenecast.errors import ModelError, NonFiniteError

import gradcheck


def test_square_derivative():
    x = ad.parameter([[3.0]])
    with ad.Tape() as tape:
        y = ad.mul(x, x)
    (g,) = ad.backward(tape, y, [x])
    assert g[0, 0] == 6.0


@pytest.mark.parametrize("name", list(gradcheck.op_cases()))
def test_op_gradients(name):
    fn, params = gradcheck.op_cases(seed=1)[name]
    assert gradcheck.check(fn, params) < 1e-6


def test_matmul_chain_per_entry():
    rng = np.random.default_rng(0)
    a, b = ad.parameter(rng.normal(size=(4, 3))), ad.parameter(rng.normal(size=(3, 2)))
    fn = lambda: ad.sum_all(ad.mul(ad.matmul(a, b), ad.matmul(a, b)))
    for x, n in zip(gradcheck.analytic(fn, [a, b]), gradcheck.numeric(fn, [a, b])):
        np.testing.assert_allclose(x, n, rtol=1e-6, atol=1e-9)


def test_unused_parameter_has_zero_gradient():
    a, unused = ad.parameter([[1.0, 2.0]]), ad.parameter([[5.0]])
    with ad.Tape() as tape:
        loss = ad.sum_all(a)
    _, gu = ad.backward(tape, loss, [a, unused])
    np.testing.assert_array_equal(gu, [[0.0]])


def test_fused_message_aggregate_matches_composition():
    rng = np.random.default_rng(5)
    h, e, beta = rng.normal(size=(6, 4)), rng.normal(size=(9, 4)), np.array([[0.7]])
    src = rng.integers(0, 6, 9)
    dst = rng.integers(0, 6, 9)
    probe = rng.normal(size=(6, 4))

    def run(fused):
        H, E, B = ad.parameter(h), ad.parameter(e), ad.parameter(beta)
        with ad.Tape() as tape:
            if fused:
                out = ad.message_aggregate(H, E, src, dst, B, 1e-7)
            else:
                m = ad.add_const(ad.relu(ad.add(ad.gather_rows(H, src), E)), 1e-7)
                out = ad.softmax_aggregate(m, dst, 6, B)
            loss = ad.sum_all(ad.mul(out, ad.Tensor(probe)))
        return out.data, ad.backward(tape, loss, [H, E, B])

    o1, g1 = run(True)
    o2, g2 = run(False)
    np.testing.assert_allclose(o1, o2, atol=1e-14)
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(a, b, atol=1e-13)


def test_singleton_neighbourhood_weight_is_one():
    m = ad.Tensor([[1.0, -2.0], [3.0, 4.0]])
    for b in (0.0, 1.0, 50.0):
        out = ad.softmax_aggregate(m, np.array([1, 0]), 3, ad.Tensor([[b]]))
        np.testing.assert_array_equal(out.data, [[3.0, 4.0], [1.0, -2.0], [0.0, 0.0]])


def test_beta_zero_is_mean():
    m = ad.Tensor([[1.0], [2.0], [6.0]])
    out = ad.softmax_aggregate(m, np.array([0, 0, 0]), 1, ad.Tensor([[0.0]]))
    assert out.data[0, 0] == pytest.approx(3.0)


def test_adam_first_step_by_hand():
    p = np.array([1.0])
    ad.adam_step([p], [np.array([0.5])], {}, lr=0.1)
    # m = 0.05, v = 0.00025; bias corrected m/c1 = 0.5, v/c2 = 0.25
    assert p[0] == pytest.approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8), abs=1e-15)


def test_adam_zero_gradient_keeps_parameters():
    p = np.array([1.0, -2.0])
    state = {}
    for _ in range(3):
        ad.adam_step([p], [np.zeros(2)], state, lr=0.1)
    np.testing.assert_array_equal(p, [1.0, -2.0])


def test_adam_class_deterministic():
    def run():
        rng = np.random.default_rng(0)
        w = ad.parameter(rng.normal(size=(3, 2)))
        opt = ad.Adam([w], lr=0.05)
        x = rng.normal(size=(5, 3))
        for _ in range(20):
            opt.zero_grad()
            with ad.Tape() as tape:
                loss = ad.mse(ad.matmul(ad.Tensor(x), w), np.ones((5, 2)))
            ad.backward(tape, loss, opt.params)
            opt.step()
        return w.data.copy()

    np.testing.assert_array_equal(run(), run())


def test_dropout_identity_when_off():
    a = ad.Tensor(np.ones((2, 2)))
    assert ad.dropout(a, 0.0, None, True) is a
    assert ad.dropout(a, 0.5, None, False) is a
    with pytest.raises(ModelError):
        ad.dropout(a, 1.0, np.random.default_rng(0), True)


def test_shape_and_finiteness_errors():
    with pytest.raises(ModelError):
        ad.matmul(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((2, 3))))
    with pytest.raises(ModelError):
        ad.add(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((2, 2))))
    with pytest.raises(NonFiniteError):
        ad.add_const(ad.Tensor([[np.inf]]), 1.0)
    with ad.Tape() as tape:
        loss = ad.add(ad.parameter(np.ones((1, 2))), ad.Tensor(np.ones((1, 2))))
    with pytest.raises(ModelError):
        ad.backward(tape, loss)


def test_backends_agree_on_message_kernels():
    rng = np.random.default_rng(2)
    h, e = rng.normal(size=(7, 5)), rng.normal(size=(12, 5))
    src, dst = rng.integers(0, 7, 12), rng.integers(0, 7, 12)
    order, indptr = ad.csr_by_destination(dst, 7)
    py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
    a = py.message_aggregate_forward(h, e, src, order, indptr, 0.9, 1e-7)
    b = cy.message_aggregate_forward(h, e, src, order, indptr, 0.9, 1e-7)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=1e-14)
    g = rng.normal(size=(7, 5))
    ga = py.message_aggregate_backward(g, h, e, src, dst, a[1], a[2], a[0], 0.9)
    gb = cy.message_aggregate_backward(g, h, e, src, dst, b[1], b[2], b[0], 0.9)
    for x, y in zip(ga, gb):
        np.testing.assert_allclose(x, y, atol=1e-13)
