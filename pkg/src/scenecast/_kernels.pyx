# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: collapsed Gibbs sweeps for LDA and CART tree growth.

Every routine here has a pure-Python twin in ``_kernels_py`` that performs the
same floating point operations in the same order, so both backends produce
identical results for identical inputs.
"""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport qsort, malloc, free
from libc.stdint cimport uint64_t, int64_t
from libc.math cimport sqrt, exp

cnp.import_array()

ctypedef struct ValPos:
    double v
    int64_t pos


cdef int _cmp_valpos(const void *a, const void *b) noexcept nogil:
    cdef const ValPos *x = <const ValPos *> a
    cdef const ValPos *y = <const ValPos *> b
    if x.v < y.v:
        return -1
    if x.v > y.v:
        return 1
    if x.pos < y.pos:
        return -1
    if x.pos > y.pos:
        return 1
    return 0


cdef inline uint64_t _splitmix_next(uint64_t *state) noexcept nogil:
    cdef uint64_t z
    state[0] = state[0] + 0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def gibbs_sweep(
    const int64_t[:] doc_ids,
    const int64_t[:] word_ids,
    int64_t[:] z,
    int64_t[:, :] ndk,
    int64_t[:, :] nkw,
    int64_t[:] nk,
    double alpha,
    double beta,
    const double[:] uniforms,
):
    """One full collapsed Gibbs sweep over all tokens, in place."""
    cdef Py_ssize_t n_tokens = doc_ids.shape[0]
    cdef Py_ssize_t K = nk.shape[0]
    cdef Py_ssize_t V = nkw.shape[1]
    cdef double vbeta = V * beta
    cdef double *cdf = <double *> malloc(K * sizeof(double))
    cdef Py_ssize_t i, k, d, w, old, new
    cdef double cum, target
    if cdf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n_tokens):
                d = doc_ids[i]
                w = word_ids[i]
                old = z[i]
                ndk[d, old] -= 1
                nkw[old, w] -= 1
                nk[old] -= 1
                cum = 0.0
                for k in range(K):
                    cum = cum + (ndk[d, k] + alpha) * (nkw[k, w] + beta) / (nk[k] + vbeta)
                    cdf[k] = cum
                target = uniforms[i] * cum
                new = K - 1
                for k in range(K):
                    if cdf[k] > target:
                        new = k
                        break
                z[i] = new
                ndk[d, new] += 1
                nkw[new, w] += 1
                nk[new] += 1
    finally:
        free(cdf)


def build_tree(
    const double[:, :] X,
    const double[:] y,
    const int64_t[:] samples,
    int max_depth,
    int min_leaf,
    int max_features,
    uint64_t seed,
):
    """Grow one variance-reduction regression tree.

    Returns ``(feature, threshold, left, right, value)`` arrays; leaves carry
    ``feature == -1``.
    """
    cdef Py_ssize_t n_total = samples.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t cap = 2 * n_total + 1
    feature_arr = np.full(cap, -1, dtype=np.int64)
    threshold_arr = np.zeros(cap, dtype=np.float64)
    left_arr = np.full(cap, -1, dtype=np.int64)
    right_arr = np.full(cap, -1, dtype=np.int64)
    value_arr = np.zeros(cap, dtype=np.float64)
    cdef int64_t[:] feature = feature_arr
    cdef double[:] threshold = threshold_arr
    cdef int64_t[:] left = left_arr
    cdef int64_t[:] right = right_arr
    cdef double[:] value = value_arr

    idx_arr = np.array(samples, dtype=np.int64, copy=True)
    tmp_arr = np.empty(n_total, dtype=np.int64)
    feats_arr = np.empty(d, dtype=np.int64)
    cdef int64_t[:] idx = idx_arr
    cdef int64_t[:] tmp = tmp_arr
    cdef int64_t[:] feats = feats_arr

    # explicit DFS stack: node, start, end, depth
    stack_arr = np.empty((cap, 4), dtype=np.int64)
    cdef int64_t[:, :] stack = stack_arr
    cdef Py_ssize_t top = 0
    cdef Py_ssize_t n_nodes = 1
    cdef uint64_t state = seed
    cdef int mtry = max_features if 0 < max_features <= d else <int> d

    cdef ValPos *buf = <ValPos *> malloc((n_total + 1) * sizeof(ValPos))
    if buf == NULL:
        raise MemoryError()

    cdef Py_ssize_t node, start, end, depth, n, i, j, f, fi, best_f, nl, nr, pos
    cdef double total, ymin, ymax, yv, parent_proxy, best_proxy, best_thr
    cdef double sum_l, sum_r, proxy, thr
    cdef int64_t swap

    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n_total
    stack[0, 3] = 0
    top = 1
    try:
        with nogil:
            while top > 0:
                top -= 1
                node = stack[top, 0]
                start = stack[top, 1]
                end = stack[top, 2]
                depth = stack[top, 3]
                n = end - start

                total = 0.0
                ymin = y[idx[start]]
                ymax = ymin
                for i in range(start, end):
                    yv = y[idx[i]]
                    total = total + yv
                    if yv < ymin:
                        ymin = yv
                    if yv > ymax:
                        ymax = yv
                value[node] = total / n
                if (max_depth >= 0 and depth >= max_depth) or n < 2 * min_leaf or ymin == ymax:
                    continue

                for i in range(d):
                    feats[i] = i
                for i in range(mtry):
                    j = i + <Py_ssize_t> (_splitmix_next(&state) % <uint64_t> (d - i))
                    swap = feats[i]
                    feats[i] = feats[j]
                    feats[j] = swap

                parent_proxy = total * total / n
                best_proxy = parent_proxy
                best_f = -1
                best_thr = 0.0
                for fi in range(mtry):
                    f = feats[fi]
                    for i in range(n):
                        buf[i].v = X[idx[start + i], f]
                        buf[i].pos = i
                    qsort(buf, n, sizeof(ValPos), _cmp_valpos)
                    sum_l = 0.0
                    for i in range(n - 1):
                        sum_l = sum_l + y[idx[start + buf[i].pos]]
                        nl = i + 1
                        nr = n - nl
                        if nl < min_leaf:
                            continue
                        if nr < min_leaf:
                            break
                        if not (buf[i].v < buf[i + 1].v):
                            continue
                        sum_r = total - sum_l
                        proxy = sum_l * sum_l / nl + sum_r * sum_r / nr
                        if proxy > best_proxy:
                            best_proxy = proxy
                            best_f = f
                            thr = 0.5 * (buf[i].v + buf[i + 1].v)
                            if thr >= buf[i + 1].v:
                                thr = buf[i].v
                            best_thr = thr
                if best_f < 0:
                    continue

                # stable partition: left block keeps original relative order
                pos = 0
                for i in range(start, end):
                    if X[idx[i], best_f] <= best_thr:
                        tmp[pos] = idx[i]
                        pos += 1
                nl = pos
                for i in range(start, end):
                    if not (X[idx[i], best_f] <= best_thr):
                        tmp[pos] = idx[i]
                        pos += 1
                for i in range(n):
                    idx[start + i] = tmp[i]

                feature[node] = best_f
                threshold[node] = best_thr
                left[node] = n_nodes
                right[node] = n_nodes + 1
                stack[top, 0] = n_nodes + 1
                stack[top, 1] = start + nl
                stack[top, 2] = end
                stack[top, 3] = depth + 1
                top += 1
                stack[top, 0] = n_nodes
                stack[top, 1] = start
                stack[top, 2] = start + nl
                stack[top, 3] = depth + 1
                top += 1
                n_nodes += 2
    finally:
        free(buf)

    return (
        feature_arr[:n_nodes].copy(),
        threshold_arr[:n_nodes].copy(),
        left_arr[:n_nodes].copy(),
        right_arr[:n_nodes].copy(),
        value_arr[:n_nodes].copy(),
    )


def tree_predict(
    const int64_t[:] feature,
    const double[:] threshold,
    const int64_t[:] left,
    const int64_t[:] right,
    const double[:] value,
    const double[:, :] X,
):
    cdef Py_ssize_t n = X.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef Py_ssize_t i, node
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] = value[node]
    return out_arr


def adam_update(
    double[:] p,
    const double[:] g,
    double[:] m,
    double[:] v,
    double lr,
    double beta1,
    double beta2,
    double eps,
    double c1,
    double c2,
):
    """Fused bias-corrected Adam update over flat arrays, in place."""
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double gi
    with nogil:
        for i in range(n):
            gi = g[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi
            v[i] = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
            p[i] = p[i] - lr * (m[i] / c1) / (sqrt(v[i] / c2) + eps)


def message_aggregate_forward(
    const double[:, :] h,
    const double[:, :] e,
    const int64_t[:] src,
    const int64_t[:] order,
    const int64_t[:] indptr,
    double beta,
    double eps,
):
    """Fused GENConv messages ``relu(h[src] + e) + eps`` and per-destination softmax sum.

    Edges are visited per destination through ``order``/``indptr`` (CSR by
    destination). Returns ``(out, m, w)`` with messages and weights kept in
    the original edge order for the backward pass.
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t E = e.shape[0]
    cdef Py_ssize_t H = h.shape[1]
    out_arr = np.zeros((n, H), dtype=np.float64)
    m_arr = np.empty((E, H), dtype=np.float64)
    w_arr = np.empty((E, H), dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef double[:, :] m = m_arr
    cdef double[:, :] w = w_arr
    cdef Py_ssize_t v, k, ed, c
    cdef double x, mx, tot
    with nogil:
        for ed in range(E):
            for c in range(H):
                x = h[src[ed], c] + e[ed, c]
                m[ed, c] = (x if x > 0.0 else 0.0) + eps
        for v in range(n):
            if indptr[v] == indptr[v + 1]:
                continue
            for c in range(H):
                ed = order[indptr[v]]
                mx = beta * m[ed, c]
                for k in range(indptr[v] + 1, indptr[v + 1]):
                    x = beta * m[order[k], c]
                    if x > mx:
                        mx = x
                tot = 0.0
                for k in range(indptr[v], indptr[v + 1]):
                    ed = order[k]
                    x = exp(beta * m[ed, c] - mx)
                    w[ed, c] = x
                    tot = tot + x
                x = 0.0
                for k in range(indptr[v], indptr[v + 1]):
                    ed = order[k]
                    w[ed, c] = w[ed, c] / tot
                    x = x + w[ed, c] * m[ed, c]
                out[v, c] = x
    return out_arr, m_arr, w_arr


def message_aggregate_backward(
    const double[:, :] g,
    const double[:, :] h,
    const double[:, :] e,
    const int64_t[:] src,
    const int64_t[:] dst,
    const double[:, :] m,
    const double[:, :] w,
    const double[:, :] out,
    double beta,
):
    """Gradients of ``message_aggregate_forward`` w.r.t. ``h``, ``e`` and ``beta``."""
    cdef Py_ssize_t E = e.shape[0]
    cdef Py_ssize_t H = h.shape[1]
    gh_arr = np.zeros((h.shape[0], H), dtype=np.float64)
    ge_arr = np.empty((E, H), dtype=np.float64)
    cdef double[:, :] gh = gh_arr
    cdef double[:, :] ge = ge_arr
    cdef Py_ssize_t ed, c, s, d
    cdef double gw, diff, gb = 0.0, gm
    with nogil:
        for ed in range(E):
            s = src[ed]
            d = dst[ed]
            for c in range(H):
                gw = g[d, c] * w[ed, c]
                diff = m[ed, c] - out[d, c]
                gb = gb + gw * m[ed, c] * diff
                if h[s, c] + e[ed, c] > 0.0:
                    gm = gw * (1.0 + beta * diff)
                    ge[ed, c] = gm
                    gh[s, c] += gm
                else:
                    ge[ed, c] = 0.0
    return gh_arr, ge_arr, gb


def lasso_cd(
    const double[:, :] G,
    const double[:] c,
    double[:] w,
    double lam,
    double tol,
    int max_iter,
    int sweeps_per_call,
):
    """Covariance-form cyclic coordinate descent for the lasso, in place.

    ``G = Z'Z/n`` and ``c = Z'(y - mean y)/n``. Runs up to ``sweeps_per_call``
    sweeps (all of ``max_iter`` when <= 0) and returns ``(sweeps, last max
    coordinate change)``.
    """
    cdef Py_ssize_t d = w.shape[0]
    cdef Py_ssize_t j, k
    cdef int it = 0, limit = max_iter if sweeps_per_call <= 0 else min(max_iter, sweeps_per_call)
    cdef double rho, new, delta = 0.0, diff
    with nogil:
        while it < limit:
            delta = 0.0
            for j in range(d):
                if G[j, j] == 0.0:
                    continue
                rho = c[j]
                for k in range(d):
                    rho = rho - G[j, k] * w[k]
                rho = rho + G[j, j] * w[j]
                if rho > lam:
                    new = (rho - lam) / G[j, j]
                elif rho < -lam:
                    new = (rho + lam) / G[j, j]
                else:
                    new = 0.0
                diff = new - w[j]
                if diff != 0.0:
                    w[j] = new
                    if diff < 0.0:
                        diff = -diff
                    if diff > delta:
                        delta = diff
            it += 1
            if delta < tol:
                break
    return it, delta
