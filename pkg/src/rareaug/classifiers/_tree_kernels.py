"""CART growth and traversal kernels.

Trees are flat arrays indexed by node id: ``feature``, ``threshold``,
``kind`` (0 leaf, 1 numeric ``x <= threshold`` goes left, 2 categorical
``x == threshold`` goes left), ``left``, ``right`` and the per-node class
counts. Nodes are expanded depth-first, left child first, and node ids are
handed out in pairs when a node splits; both implementations follow that
order so per-node feature sampling (seeded by node id) matches exactly.
"""

import numpy as np

from .._jit import njit, pick

LEAF, NUMERIC, CATEGORICAL = 0, 1, 2
MIN_DECREASE = 1e-12

_MASK = (1 << 64) - 1


# -- splitmix64, in uint64 for numba and python ints for the fallback ------

@njit
def _mix_nb(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _mix_py(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


@njit
def _node_features_nb(seed, node_id, p, mtry, out):
    perm = np.arange(p)
    state = _mix_nb(seed ^ _mix_nb(np.uint64(node_id)))
    for i in range(mtry):
        state = _mix_nb(state)
        j = i + np.int64(state % np.uint64(p - i))
        t = perm[i]
        perm[i] = perm[j]
        perm[j] = t
    chosen = np.sort(perm[:mtry])
    for i in range(mtry):
        out[i] = chosen[i]


def _node_features_py(seed, node_id, p, mtry):
    if mtry >= p:
        return list(range(p))
    perm = list(range(p))
    state = _mix_py(seed ^ _mix_py(node_id))
    for i in range(mtry):
        state = _mix_py(state)
        j = i + state % (p - i)
        perm[i], perm[j] = perm[j], perm[i]
    return sorted(perm[:mtry])


@njit
def _gini_nb(a, b):
    t = a + b
    return 1.0 - (a * a + b * b) / (t * t)


# -- numba growth -----------------------------------------------------------

@njit
def build_tree_nb(X, y, w, order, is_cat, card, max_depth, min_leaf, mtry, seed):
    n, p = X.shape
    XT = np.ascontiguousarray(X.T)
    n_act = 0
    for r in range(n):
        if w[r] > 0:
            n_act += 1
    # per-feature row lists sorted by value; every node owns the same
    # [start, end) segment in each list
    S = np.empty((p, n_act), np.int64)
    for f in range(p):
        k = 0
        for t in range(n):
            r = order[f, t]
            if w[r] > 0:
                S[f, k] = r
                k += 1

    cap = 2 * n_act + 1
    full = 2 ** (max_depth + 1) - 1
    if full < cap:
        cap = full
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    kind = np.zeros(cap, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    count0 = np.zeros(cap, np.int64)
    count1 = np.zeros(cap, np.int64)

    go = np.zeros(n, np.bool_)
    buf = np.empty(n_act, np.int64)
    feats = np.empty(p, np.int64)
    max_card = 2
    for f in range(p):
        if card[f] > max_card:
            max_card = card[f]
    cat0 = np.zeros(max_card)
    cat1 = np.zeros(max_card)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_act
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        c0 = 0
        c1 = 0
        for t in range(start, end):
            r = S[0, t]
            if y[r] == 1:
                c1 += w[r]
            else:
                c0 += w[r]
        m = c0 + c1
        count0[node] = c0
        count1[node] = c1
        if depth >= max_depth or c0 == 0 or c1 == 0 or m < 2 * min_leaf:
            continue
        parent = _gini_nb(float(c0), float(c1))

        if mtry >= p:
            nf = p
            for i in range(p):
                feats[i] = i
        else:
            nf = mtry
            _node_features_nb(seed, node, p, mtry, feats)

        best_dec = MIN_DECREASE
        best_f = -1
        best_thr = 0.0
        best_kind = LEAF
        best_l0 = 0.0
        best_l1 = 0.0
        for fi in range(nf):
            f = feats[fi]
            if is_cat[f]:
                k = card[f]
                for c in range(k):
                    cat0[c] = 0.0
                    cat1[c] = 0.0
                for t in range(start, end):
                    r = S[f, t]
                    c = np.int64(XT[f, r])
                    if y[r] == 1:
                        cat1[c] += w[r]
                    else:
                        cat0[c] += w[r]
                for c in range(k):
                    l0 = cat0[c]
                    l1 = cat1[c]
                    nl = l0 + l1
                    nr = m - nl
                    if nl < min_leaf or nr < min_leaf:
                        continue
                    r0 = float(c0) - l0
                    r1 = float(c1) - l1
                    dec = parent - (nl * _gini_nb(l0, l1) + nr * _gini_nb(r0, r1)) / m
                    if dec > best_dec:
                        best_dec = dec
                        best_f = f
                        best_thr = float(c)
                        best_kind = CATEGORICAL
                        best_l0 = l0
                        best_l1 = l1
            else:
                l0 = 0.0
                l1 = 0.0
                for t in range(start, end - 1):
                    r = S[f, t]
                    wy = w[r] * y[r]
                    l1 += wy
                    l0 += w[r] - wy
                    a = XT[f, r]
                    b = XT[f, S[f, t + 1]]
                    if a == b:
                        continue
                    nl = l0 + l1
                    nr = m - nl
                    if nl < min_leaf:
                        continue
                    if nr < min_leaf:
                        break
                    r0 = float(c0) - l0
                    r1 = float(c1) - l1
                    dec = parent - (nl * _gini_nb(l0, l1) + nr * _gini_nb(r0, r1)) / m
                    if dec > best_dec:
                        best_dec = dec
                        best_f = f
                        thr = a + (b - a) / 2.0
                        if thr >= b:
                            thr = a
                        best_thr = thr
                        best_kind = NUMERIC
                        best_l0 = l0
                        best_l1 = l1

        if best_f < 0:
            continue
        n_left = 0
        for t in range(start, end):
            r = S[0, t]
            v = XT[best_f, r]
            g = (v == best_thr) if best_kind == CATEGORICAL else (v <= best_thr)
            go[r] = g
            if g:
                n_left += 1
        # children that will stay leaves never read the lists again
        r0 = float(c0) - best_l0
        r1 = float(c1) - best_l1
        left_leaf = depth + 1 >= max_depth or best_l0 == 0 or best_l1 == 0 or best_l0 + best_l1 < 2 * min_leaf
        right_leaf = depth + 1 >= max_depth or r0 == 0 or r1 == 0 or r0 + r1 < 2 * min_leaf
        # stable partition keeps every list sorted
        for f in range(p if not (left_leaf and right_leaf) else 1):
            a_i = 0
            b_i = n_left
            for t in range(start, end):
                r = S[f, t]
                if go[r]:
                    buf[a_i] = r
                    a_i += 1
                else:
                    buf[b_i] = r
                    b_i += 1
            for t in range(end - start):
                S[f, start + t] = buf[t]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        kind[node] = best_kind
        left[node] = lid
        right[node] = rid
        st_node[top] = rid
        st_start[top] = start + n_left
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lid
        st_start[top] = start
        st_end[top] = start + n_left
        st_depth[top] = depth + 1
        top += 1

    return (feature[:n_nodes], threshold[:n_nodes], kind[:n_nodes], left[:n_nodes],
            right[:n_nodes], count0[:n_nodes], count1[:n_nodes])


# -- numpy growth -----------------------------------------------------------

def _gini_np(a, b):
    t = a + b
    return 1.0 - (a * a + b * b) / (t * t)


def build_tree_np(X, y, w, order, is_cat, card, max_depth, min_leaf, mtry, seed):
    """Same tree as ``build_tree_nb``; ``order`` is unused because each node
    sorts its own rows."""
    p = X.shape[1]
    seed = int(seed)
    feature, threshold, kind, left, right, count0, count1 = [], [], [], [], [], [], []

    def new_node():
        for lst, v in ((feature, -1), (threshold, 0.0), (kind, LEAF), (left, -1), (right, -1),
                       (count0, 0), (count1, 0)):
            lst.append(v)

    new_node()
    stack = [(0, np.flatnonzero(w > 0), 0)]
    while stack:
        node, rows, depth = stack.pop()
        wr = w[rows]
        yr = y[rows]
        c1 = int(wr[yr == 1].sum())
        c0 = int(wr[yr != 1].sum())
        m = c0 + c1
        count0[node], count1[node] = c0, c1
        if depth >= max_depth or c0 == 0 or c1 == 0 or m < 2 * min_leaf:
            continue
        parent = _gini_np(float(c0), float(c1))
        feats = range(p) if mtry >= p else _node_features_py(seed, node, p, mtry)
        w1 = np.where(yr == 1, wr, 0)
        w0 = wr - w1

        best = (MIN_DECREASE, -1, 0.0, LEAF)
        for f in feats:
            col = X[rows, f]
            if is_cat[f]:
                k = int(card[f])
                codes = col.astype(np.int64)
                l1 = np.bincount(codes, weights=w1, minlength=k).astype(float)
                l0 = np.bincount(codes, weights=w0, minlength=k).astype(float)
                ok = np.ones(k, bool)
            else:
                o = np.argsort(col, kind="stable")
                v = col[o]
                l1 = np.cumsum(w1[o])[:-1].astype(float)
                l0 = np.cumsum(w0[o])[:-1].astype(float)
                ok = v[:-1] != v[1:]
            nl = l0 + l1
            nr = m - nl
            ok = ok & (nl >= min_leaf) & (nr >= min_leaf)
            if not ok.any():
                continue
            r0 = float(c0) - l0
            r1 = float(c1) - l1
            with np.errstate(invalid="ignore", divide="ignore"):
                dec = parent - (nl * _gini_np(l0, l1) + nr * _gini_np(r0, r1)) / m
            dec = np.where(ok, dec, -np.inf)
            i = int(np.argmax(dec))
            if dec[i] > best[0]:
                if is_cat[f]:
                    best = (dec[i], f, float(i), CATEGORICAL)
                else:
                    a, b = v[i], v[i + 1]
                    thr = a + (b - a) / 2.0
                    if thr >= b:
                        thr = a
                    best = (dec[i], f, float(thr), NUMERIC)

        _, bf, bthr, bkind = best
        if bf < 0:
            continue
        col = X[rows, bf]
        go_left = (col == bthr) if bkind == CATEGORICAL else (col <= bthr)
        lid = len(feature)
        new_node()
        new_node()
        feature[node], threshold[node], kind[node] = bf, bthr, bkind
        left[node], right[node] = lid, lid + 1
        stack.append((lid + 1, rows[~go_left], depth + 1))
        stack.append((lid, rows[go_left], depth + 1))

    return (np.array(feature, np.int64), np.array(threshold, float), np.array(kind, np.int64),
            np.array(left, np.int64), np.array(right, np.int64),
            np.array(count0, np.int64), np.array(count1, np.int64))


def presort(X):
    """Per-feature row order, shape ``(p, n)``; shared by every tree fit on ``X``."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


# -- traversal --------------------------------------------------------------

@njit
def apply_tree_nb(X, feature, threshold, kind, left, right):
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while kind[node] != LEAF:
            v = X[i, feature[node]]
            if kind[node] == CATEGORICAL:
                go_left = v == threshold[node]
            else:
                go_left = v <= threshold[node]
            node = left[node] if go_left else right[node]
        out[i] = node
    return out


def apply_tree_np(X, feature, threshold, kind, left, right):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = np.flatnonzero(kind[node] != LEAF)
    while active.size:
        nd = node[active]
        v = X[active, feature[nd]]
        go_left = np.where(kind[nd] == CATEGORICAL, v == threshold[nd], v <= threshold[nd])
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[kind[node[active]] != LEAF]
    return node


build_tree = pick(build_tree_nb, build_tree_np)
apply_tree = pick(apply_tree_nb, apply_tree_np)
