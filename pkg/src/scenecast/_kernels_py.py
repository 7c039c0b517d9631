"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

The arithmetic mirrors the compiled code operation for operation (sequential
sums via ``cumsum``, stable sorts, the same split-mix generator), so outputs
match the extension bit for bit. Used when the extension is unavailable or
``SCENECAST_NO_EXT`` is set.
"""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix_next(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def gibbs_sweep(doc_ids, word_ids, z, ndk, nkw, nk, alpha, beta, uniforms):
    """One full collapsed Gibbs sweep over all tokens, in place."""
    K = nk.shape[0]
    vbeta = nkw.shape[1] * beta
    for i in range(doc_ids.shape[0]):
        d = doc_ids[i]
        w = word_ids[i]
        old = z[i]
        ndk[d, old] -= 1
        nkw[old, w] -= 1
        nk[old] -= 1
        cdf = np.cumsum((ndk[d] + alpha) * (nkw[:, w] + beta) / (nk + vbeta))
        new = int(np.searchsorted(cdf, uniforms[i] * cdf[-1], side="right"))
        if new >= K:
            new = K - 1
        z[i] = new
        ndk[d, new] += 1
        nkw[new, w] += 1
        nk[new] += 1


def build_tree(X, y, samples, max_depth, min_leaf, max_features, seed):
    n_total = samples.shape[0]
    d = X.shape[1]
    mtry = max_features if 0 < max_features <= d else d
    feature: list[int] = [-1]
    threshold: list[float] = [0.0]
    left: list[int] = [-1]
    right: list[int] = [-1]
    value: list[float] = [0.0]
    idx = np.array(samples, dtype=np.int64, copy=True)
    state = int(seed) & _MASK
    stack = [(0, 0, n_total, 0)]
    while stack:
        node, start, end, depth = stack.pop()
        n = end - start
        ys_node = y[idx[start:end]]
        total = float(np.cumsum(ys_node)[-1])
        value[node] = total / n
        if (max_depth >= 0 and depth >= max_depth) or n < 2 * min_leaf:
            continue
        if ys_node.min() == ys_node.max():
            continue

        feats = list(range(d))
        for i in range(mtry):
            state, r = splitmix_next(state)
            j = i + r % (d - i)
            feats[i], feats[j] = feats[j], feats[i]

        best_proxy = total * total / n
        best_f = -1
        best_thr = 0.0
        nl = np.arange(1, n, dtype=np.float64)
        nr = n - nl
        size_ok = (nl >= min_leaf) & (nr >= min_leaf)
        for f in feats[:mtry]:
            xv = X[idx[start:end], f]
            order = np.argsort(xv, kind="stable")
            xs = xv[order]
            sum_l = np.cumsum(ys_node[order])[:-1]
            sum_r = total - sum_l
            proxy = sum_l * sum_l / nl + sum_r * sum_r / nr
            valid = size_ok & (xs[:-1] < xs[1:])
            if not valid.any():
                continue
            masked = np.where(valid, proxy, -np.inf)
            i = int(np.argmax(masked))
            if masked[i] > best_proxy:
                best_proxy = float(masked[i])
                best_f = f
                thr = 0.5 * (xs[i] + xs[i + 1])
                if thr >= xs[i + 1]:
                    thr = xs[i]
                best_thr = float(thr)
        if best_f < 0:
            continue

        block = idx[start:end]
        go_left = X[block, best_f] <= best_thr
        n_left = int(go_left.sum())
        idx[start:end] = np.concatenate([block[go_left], block[~go_left]])

        left_id = len(feature)
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = left_id
        right[node] = left_id + 1
        for _ in range(2):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
        stack.append((left_id + 1, start + n_left, end, depth + 1))
        stack.append((left_id, start, start + n_left, depth + 1))

    return (
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
    )


def tree_predict(feature, threshold, left, right, value, X):
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = feature[node] >= 0
    rows = np.arange(X.shape[0])
    while active.any():
        r = rows[active]
        nd = node[r]
        go_left = X[r, feature[nd]] <= threshold[nd]
        node[r] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return value[node]


def adam_update(p, g, m, v, lr, beta1, beta2, eps, c1, c2):
    """Bias-corrected Adam update over flat arrays, in place."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def _segment_reduce(ufunc, values, order, starts, targets, n, fill):
    out = np.full((n, values.shape[1]), fill)
    if len(order):
        out[targets] = ufunc.reduceat(values[order], starts, axis=0)
    return out


def _csr_segments(order, indptr):
    counts = np.diff(indptr)
    nonempty = np.nonzero(counts)[0]
    return indptr[nonempty], nonempty


def message_aggregate_forward(h, e, src, order, indptr, beta, eps):
    """Fused GENConv messages ``relu(h[src] + e) + eps`` and per-destination softmax sum."""
    n = indptr.shape[0] - 1
    m = np.maximum(h[src] + e, 0.0) + eps
    if len(src) == 0:
        return np.zeros((n, h.shape[1])), m, np.zeros_like(m)
    dst = np.repeat(np.arange(n), np.diff(indptr))[np.argsort(order, kind="stable")]
    starts, targets = _csr_segments(order, indptr)
    s = beta * m
    ex = np.exp(s - _segment_reduce(np.maximum, s, order, starts, targets, n, -np.inf)[dst])
    w = ex / _segment_reduce(np.add, ex, order, starts, targets, n, 0.0)[dst]
    out = _segment_reduce(np.add, w * m, order, starts, targets, n, 0.0)
    return out, m, w


def message_aggregate_backward(g, h, e, src, dst, m, w, out, beta):
    """Gradients of ``message_aggregate_forward`` w.r.t. ``h``, ``e`` and ``beta``."""
    gw = g[dst] * w
    diff = m - out[dst]
    gb = float(np.sum(gw * m * diff))
    ge = np.where(h[src] + e > 0.0, gw * (1.0 + beta * diff), 0.0)
    gh = np.zeros_like(h)
    np.add.at(gh, src, ge)
    return gh, ge, gb


def lasso_cd(G, c, w, lam, tol, max_iter, sweeps_per_call):
    """Covariance-form cyclic coordinate descent for the lasso, in place."""
    d = w.shape[0]
    limit = max_iter if sweeps_per_call <= 0 else min(max_iter, sweeps_per_call)
    it = 0
    delta = 0.0
    while it < limit:
        delta = 0.0
        for j in range(d):
            gjj = G[j, j]
            if gjj == 0.0:
                continue
            rho = c[j]
            for k in range(d):
                rho = rho - G[j, k] * w[k]
            rho = rho + gjj * w[j]
            if rho > lam:
                new = (rho - lam) / gjj
            elif rho < -lam:
                new = (rho + lam) / gjj
            else:
                new = 0.0
            diff = abs(new - w[j])
            if diff != 0.0:
                w[j] = new
                delta = max(delta, diff)
        it += 1
        if delta < tol:
            break
    return it, delta
