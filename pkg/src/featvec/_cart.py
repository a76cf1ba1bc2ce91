"""Compiled CART kernel.

Presorted exact CART: ``order[f, s:e]`` lists the samples of the node held
in positions ``s:e`` sorted by feature ``f``; a split stably partitions
every row of ``order`` so the invariant holds for both children. Split
scores use the usual proxies (sum of squared class counts over size, or
squared target sum over size) with O(1) running updates.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _draw_subset(perm, k):
    # k features in draw order; the split scan treats earlier draws as
    # winners of exact ties

    d = perm.shape[0]
    for i in range(k):
        j = i + np.random.randint(0, d - i)
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return perm[:k].copy()


@njit(cache=True, nogil=True)
def grow_tree(XT, y_int, y_float, n_classes, classification, max_depth, min_leaf, k, seed,
              samples, order):
    """Build one tree; returns preorder node arrays truncated to the node count.

    ``XT`` is the feature-major (d, n) copy of the data. ``samples`` are the training rows (bootstrap draws allowed); ``order``
    is a (d, m) int64 array whose row f holds positions 0..m-1 sorted by
    ``X[samples[pos], f]``. ``order`` is modified in place.
    """
    np.random.seed(seed)
    d = XT.shape[0]
    m = samples.shape[0]
    cap = 2 * m - 1
    if max_depth < 40:
        cap = min(cap, 2 ** (max_depth + 1) - 1)
    n_out = n_classes if classification else 1

    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    n_samples = np.zeros(cap, dtype=np.int64)
    impurity = np.zeros(cap)
    decrease = np.zeros(cap)
    value = np.zeros((cap, n_out))

    perm = np.arange(d)
    sl = 0.0
    sql = 0.0
    sqr = 0.0
    go_left = np.zeros(m, dtype=np.bool_)
    buf = np.empty(m, dtype=np.int64)
    counts = np.zeros(n_classes)
    cl = np.zeros(n_classes)
    cr = np.zeros(n_classes)

    # stack entries: start, end, depth, parent, is_left
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_parent = np.empty(cap, dtype=np.int64)
    st_isleft = np.empty(cap, dtype=np.bool_)
    top = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    st_parent[0] = -1
    st_isleft[0] = True
    top = 1
    n_nodes = 0

    while top > 0:
        top -= 1
        s = st_start[top]
        e = st_end[top]
        depth = st_depth[top]
        parent = st_parent[top]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if st_isleft[top]:
                left[parent] = node
            else:
                right[parent] = node
        cnt = e - s
        n_samples[node] = cnt

        # node statistics
        if classification:
            counts[:] = 0.0
            for i in range(s, e):
                counts[y_int[samples[order[0, i]]]] += 1.0
            sq = 0.0
            for c in range(n_classes):
                sq += counts[c] * counts[c]
                value[node, c] = counts[c] / cnt
            imp = 1.0 - sq / (cnt * cnt)
            parent_proxy = sq / cnt
            total = 0.0
        else:
            total = 0.0
            sumsq = 0.0
            for i in range(s, e):
                v = y_float[samples[order[0, i]]]
                total += v
                sumsq += v * v
            mean = total / cnt
            value[node, 0] = mean
            imp = max(sumsq / cnt - mean * mean, 0.0)
            parent_proxy = total * total / cnt
            sq = 0.0
        impurity[node] = imp

        if depth >= max_depth or imp <= 0.0 or cnt < 2 * min_leaf:
            continue

        feats = _draw_subset(perm, k)
        best_proxy = -np.inf
        best_f = -1
        best_t = 0.0
        for fi in range(feats.shape[0]):
            f = feats[fi]
            row = order[f]
            if classification:
                for c in range(n_classes):
                    cl[c] = 0.0
                    cr[c] = counts[c]
                sql = 0.0
                sqr = sq
            else:
                sl = 0.0
            for i in range(s, e - 1):
                p = samples[row[i]]
                if classification:
                    c = y_int[p]
                    sql += 2.0 * cl[c] + 1.0
                    cl[c] += 1.0
                    sqr -= 2.0 * cr[c] - 1.0
                    cr[c] -= 1.0
                else:
                    sl += y_float[p]
                nl = i - s + 1
                nr = cnt - nl
                if nl < min_leaf:
                    continue
                if nr < min_leaf:
                    break
                v = XT[f, p]
                vn = XT[f, samples[row[i + 1]]]
                if not v < vn:
                    continue
                if classification:
                    proxy = sql / nl + sqr / nr
                else:
                    sr = total - sl
                    proxy = sl * sl / nl + sr * sr / nr
                if proxy > best_proxy:
                    best_proxy = proxy
                    best_f = f
                    t = 0.5 * (v + vn)
                    if t >= vn:
                        t = v
                    best_t = t
        if best_f < 0:
            continue

        feature[node] = best_f
        threshold[node] = best_t
        decrease[node] = max((best_proxy - parent_proxy) / cnt, 0.0)

        row = order[best_f]
        n_left = 0
        for i in range(s, e):
            pos = row[i]
            gl = XT[best_f, samples[pos]] <= best_t
            go_left[pos] = gl
            if gl:
                n_left += 1
        for g in range(d):
            row = order[g]
            a = s
            b = s + n_left
            for i in range(s, e):
                pos = row[i]
                if go_left[pos]:
                    buf[a] = pos
                    a += 1
                else:
                    buf[b] = pos
                    b += 1
            for i in range(s, e):
                row[i] = buf[i]

        # right pushed first so the left subtree is numbered first (preorder)
        st_start[top] = s + n_left
        st_end[top] = e
        st_depth[top] = depth + 1
        st_parent[top] = node
        st_isleft[top] = False
        top += 1
        st_start[top] = s
        st_end[top] = s + n_left
        st_depth[top] = depth + 1
        st_parent[top] = node
        st_isleft[top] = True
        top += 1

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            n_samples[:n_nodes], impurity[:n_nodes], decrease[:n_nodes], value[:n_nodes])
