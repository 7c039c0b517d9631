"""A small reverse-mode autodiff engine over dense float64 matrices.

Every value is a 2-D :class:`Tensor`. Operations executed while a
:class:`Tape` is active are recorded and can be differentiated with
:func:`backward`. Only row-vector broadcasting (biases, per-column scales) is
supported.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import ModelError, NonFiniteError

_local = threading.local()


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ModelError(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __repr__(self):
        return f"Tensor({self.name or 'anon'}, shape={self.shape})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    __add__ = lambda self, other: add(self, other)
    __matmul__ = lambda self, other: matmul(self, other)
    __mul__ = lambda self, other: mul(self, other)


def parameter(data, name: str = "") -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


@dataclass
class _Record:
    out: Tensor
    parents: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """Ordered record of differentiable operations.

    Use as a context manager; nested tapes shadow outer ones for the current
    thread only.
    """

    records: list[_Record] = field(default_factory=list)

    def __enter__(self):
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _local.stack.pop()
        return False

    def __len__(self):
        return len(self.records)


def _active_tape() -> Tape | None:
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


def _finite(arr: np.ndarray, op: str) -> np.ndarray:
    # a finite sum implies finite entries; fall back to the full check on overflow
    if not np.isfinite(arr.sum()) and not np.isfinite(arr).all():
        raise NonFiniteError(f"{op} produced non-finite values")
    return arr


def _make(data: np.ndarray, op: str, parents: tuple[Tensor, ...], bwd) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = _finite(data, op)
    out.grad = None
    out.name = op
    out.requires_grad = any(p.requires_grad for p in parents)
    tape = _active_tape()
    if out.requires_grad and tape is not None:
        tape.records.append(_Record(out, parents, bwd))
    return out


def _const(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and shape[1] == g.shape[1]:
        return g.sum(axis=0, keepdims=True)
    if shape == (1, 1):
        return np.array([[g.sum()]])
    raise ModelError(f"cannot reduce gradient {g.shape} to {shape}")


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    if a.shape == b.shape:
        return
    if b.shape == (1, 1) or (b.shape[0] == 1 and b.shape[1] == a.shape[1]):
        return
    raise ModelError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may be a row vector or scalar broadcast over ``a``."""
    a, b = _const(a), _const(b)
    _check_broadcast(a, b, "add")
    return _make(a.data + b.data, "add", (a, b),
                 lambda g: (g, _unbroadcast(g, b.shape)))


def add_const(a: Tensor, c: float) -> Tensor:
    return _make(a.data + c, "add_const", (a,), lambda g: (g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _const(a), _const(b)
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, "mul", (a, b),
                 lambda g: (g * bd, _unbroadcast(g * ad, b.shape)))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _const(a), _const(b)
    if a.shape[1] != b.shape[0]:
        raise ModelError(f"matmul: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _make(ad @ bd, "matmul", (a, b), lambda g: (g @ bd.T, ad.T @ g))


def linear(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """``x @ W + b`` with ``b`` a row vector."""
    if x.shape[1] != W.shape[0] or b.shape != (1, W.shape[1]):
        raise ModelError(f"linear: {x.shape} @ {W.shape} + {b.shape}")
    xd, Wd = x.data, W.data
    return _make(xd @ Wd + b.data, "linear", (x, W, b),
                 lambda g: (g @ Wd.T, xd.T @ g, g.sum(axis=0, keepdims=True)))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0  # subgradient at exactly 0 is 0
    return _make(np.where(mask, a.data, 0.0), "relu", (a,), lambda g: (g * mask,))


def layernorm(a: Tensor, gamma: Tensor | None = None, beta: Tensor | None = None, eps: float = 1e-12) -> Tensor:
    """Row-wise standardization to mean 0 and variance 1, then optional ``gamma * x + beta``."""
    x = a.data
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=1, keepdims=True) + eps)
    xhat = xc * inv
    if gamma is None:
        def bwd(g):
            return (inv * (g - g.mean(axis=1, keepdims=True) - xhat * (g * xhat).mean(axis=1, keepdims=True)),)

        return _make(xhat, "layernorm", (a,), bwd)

    gd = gamma.data

    def bwd_affine(g):
        gx = g * gd
        dx = inv * (gx - gx.mean(axis=1, keepdims=True) - xhat * (gx * xhat).mean(axis=1, keepdims=True))
        return dx, (g * xhat).sum(axis=0, keepdims=True), g.sum(axis=0, keepdims=True)

    return _make(xhat * gd + beta.data, "layernorm", (a, gamma, beta), bwd_affine)


class _Segments:
    """Edges grouped by an index vector, for scatter reductions via ``reduceat``."""

    __slots__ = ("order", "starts", "targets", "n")

    def __init__(self, index: np.ndarray, n: int):
        self.order = np.argsort(index, kind="stable")
        sorted_idx = index[self.order]
        first = np.ones(len(sorted_idx), dtype=bool)
        first[1:] = sorted_idx[1:] != sorted_idx[:-1]
        self.starts = np.nonzero(first)[0]
        self.targets = sorted_idx[self.starts]
        self.n = n

    def reduce(self, ufunc, values: np.ndarray, fill: float = 0.0) -> np.ndarray:
        out = np.full((self.n, values.shape[1]), fill)
        if len(self.order):
            out[self.targets] = ufunc.reduceat(values[self.order], self.starts, axis=0)
        return out


def gather_rows(a: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    seg = _Segments(index, a.shape[0])
    return _make(a.data[index], "gather_rows", (a,), lambda g: (seg.reduce(np.add, g),))


def softmax_aggregate(messages: Tensor, dst: np.ndarray, n: int, beta: Tensor) -> Tensor:
    """Softmax-weighted sum of edge messages at their destination vertices.

    Per destination v and channel c the weights are
    ``softmax_e(beta * m[e, c])`` over edges e into v; the output is
    ``sum_e w[e, c] * m[e, c]``. Vertices without incoming edges get zeros.
    """
    dst = np.asarray(dst, dtype=np.int64)
    m = messages.data
    h = m.shape[1]
    if len(dst) == 0:
        return _make(np.zeros((n, h)), "softmax_aggregate", (messages, beta),
                     lambda g: (np.zeros_like(m), np.zeros((1, 1))))
    seg = _Segments(dst, n)
    b = float(beta.data[0, 0])
    s = b * m
    ex = np.exp(s - seg.reduce(np.maximum, s, -np.inf)[dst])
    w = ex / seg.reduce(np.add, ex)[dst]
    out = seg.reduce(np.add, w * m)

    def bwd(g):
        go = g[dst]
        diff = m - out[dst]
        gw = go * w
        gm = gw * (1.0 + b * diff)
        gb = np.array([[np.sum(gw * m * diff)]])
        return gm, gb

    return _make(out, "softmax_aggregate", (messages, beta), bwd)


def csr_by_destination(dst: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Edge order grouped by destination (stable) and the matching row pointer."""
    dst = np.asarray(dst, dtype=np.int64)
    order = np.argsort(dst, kind="stable").astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=n), out=indptr[1:])
    return order, indptr


def message_aggregate(
    h: Tensor,
    e: Tensor,
    src: np.ndarray,
    dst: np.ndarray,
    beta: Tensor,
    eps: float = 1e-7,
    csr: tuple[np.ndarray, np.ndarray] | None = None,
) -> Tensor:
    """Fused ``softmax_aggregate(relu(gather_rows(h, src) + e) + eps, dst, n, beta)``.

    Runs in the compiled kernel when available. ``csr`` may carry a
    precomputed ``csr_by_destination(dst, n)``.
    """
    n = h.shape[0]
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if e.shape != (len(src), h.shape[1]):
        raise ModelError(f"message_aggregate: edge features {e.shape} vs {len(src)} edges of width {h.shape[1]}")
    order, indptr = csr if csr is not None else csr_by_destination(dst, n)
    b = float(beta.data[0, 0])
    hd, ed = h.data, e.data
    out, m, w = kernels.message_aggregate_forward(hd, ed, src, order, indptr, b, eps)

    def bwd(g):
        gh, ge, gb = kernels.message_aggregate_backward(np.ascontiguousarray(g), hd, ed, src, dst, m, w, out, b)
        return gh, ge, np.array([[gb]])

    return _make(out, "message_aggregate", (h, e, beta), bwd)


def dropout(a: Tensor, p: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout; identity in evaluation mode or when ``p == 0``."""
    if not train or p == 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ModelError(f"dropout rate must be in [0, 1), got {p}")
    mask = (rng.random(a.shape) >= p) / (1.0 - p)
    return _make(a.data * mask, "dropout", (a,), lambda g: (g * mask,))


def mse(pred: Tensor, target) -> Tensor:
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=float)
    if t.shape != pred.shape:
        raise ModelError(f"mse: prediction {pred.shape} vs target {t.shape}")
    d = pred.data - t
    size = d.size
    return _make(np.array([[np.mean(d * d)]]), "mse", (pred,), lambda g: (g * 2.0 * d / size,))


def sum_all(a: Tensor) -> Tensor:
    return _make(np.array([[a.data.sum()]]), "sum", (a,), lambda g: (np.full(a.shape, g[0, 0]),))


def backward(tape: Tape, loss: Tensor, params: Sequence[Tensor] = ()) -> list[np.ndarray]:
    """Populate ``.grad`` on every tensor upstream of ``loss``.

    Returns the gradients of ``params`` in order (zeros for parameters the
    loss does not depend on). The tape is cleared afterwards and intermediate
    gradients are released.
    """
    if loss.shape != (1, 1):
        raise ModelError(f"loss must be scalar, got shape {loss.shape}")
    loss.grad = np.ones((1, 1))
    for rec in reversed(tape.records):
        g = rec.out.grad
        if g is None:
            continue
        for parent, pg in zip(rec.parents, rec.backward(g)):
            if parent.requires_grad and pg is not None:
                parent._accumulate(pg)
    for rec in tape.records:
        rec.out.grad = None
    loss.grad = None
    tape.records.clear()
    grads = []
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
        grads.append(p.grad)
    return grads


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: dict,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> dict:
    """Bias-corrected Adam update applied to ``params`` in place.

    ``state`` holds ``t`` (step count) and first/second moment lists ``m``/``v``;
    an empty dict starts from zero moments. Arrays must be float64 and
    C-contiguous.
    """
    if not state:
        state.update(t=0, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])
    state["t"] += 1
    t = state["t"]
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        kernels.adam_update(p.reshape(-1), np.ascontiguousarray(g).reshape(-1), m.reshape(-1), v.reshape(-1),
                            lr, beta1, beta2, eps, c1, c2)
    return state


class Adam:
    """Adam over a set of tensors.

    Parameter storage is packed into one flat buffer (each tensor's ``data``
    becomes a view into it) so an update is a handful of vector operations.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state: dict = {}
        sizes = [p.data.size for p in self.params]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self._flat = np.concatenate([p.data.ravel() for p in self.params]) if self.params else np.zeros(0)
        self._grad = np.zeros_like(self._flat)
        for p, lo, hi in zip(self.params, self._offsets[:-1], self._offsets[1:]):
            p.data = self._flat[lo:hi].reshape(p.data.shape)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        g = self._grad
        for p, lo, hi in zip(self.params, self._offsets[:-1], self._offsets[1:]):
            if p.grad is None:
                g[lo:hi] = 0.0
            else:
                g[lo:hi] = p.grad.ravel()
        adam_step([self._flat], [g], self.state, self.lr, self.beta1, self.beta2, self.eps)
