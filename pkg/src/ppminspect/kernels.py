"""Hot loops of the booster: level-wise exact split search and forest traversal.

Each kernel exists twice: a numba-compiled loop and a vectorised numpy
version. Both follow the same tie rule (lowest feature, then lowest
threshold wins among equal gains) and accumulate gradients in the same
order, so they grow bitwise-identical trees.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

#: feature block size for the numpy split search (bounds temporary memory)
NUMPY_BLOCK = 64


def _midpoint(a, b):
    t = a + (b - a) * 0.5
    return b if t <= a else t


@njit
def level_best_splits_numba(X, sorted_idx, node_of, g, h, node_G, node_H, lam, gamma, min_child_hessian):
    n_features, n_rows = sorted_idx.shape
    n_nodes = node_G.shape[0]
    best_gain = np.zeros(n_nodes)
    best_feature = np.full(n_nodes, -1, dtype=np.int64)
    best_threshold = np.zeros(n_nodes)
    GL = np.zeros(n_nodes)
    HL = np.zeros(n_nodes)
    prev = np.zeros(n_nodes)
    seen = np.zeros(n_nodes, dtype=np.bool_)
    parent = np.empty(n_nodes)
    for nd in range(n_nodes):
        parent[nd] = node_G[nd] * node_G[nd] / (node_H[nd] + lam)
    for f in range(n_features):
        GL[:] = 0.0
        HL[:] = 0.0
        seen[:] = False
        for k in range(n_rows):
            r = sorted_idx[f, k]
            nd = node_of[r]
            if nd < 0:
                continue
            v = X[r, f]
            if seen[nd] and v != prev[nd]:
                gl = GL[nd]
                hl = HL[nd]
                gr = node_G[nd] - gl
                hr = node_H[nd] - hl
                if hl >= min_child_hessian and hr >= min_child_hessian:
                    gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent[nd]) - gamma
                    if gain > best_gain[nd]:
                        best_gain[nd] = gain
                        best_feature[nd] = f
                        a = prev[nd]
                        t = a + (v - a) * 0.5
                        best_threshold[nd] = v if t <= a else t
            GL[nd] += g[r]
            HL[nd] += h[r]
            prev[nd] = v
            seen[nd] = True
    return best_gain, best_feature, best_threshold


def level_best_splits_numpy(X, sorted_idx, node_of, g, h, node_G, node_H, lam, gamma, min_child_hessian):
    n_features, n_rows = sorted_idx.shape
    n_nodes = node_G.shape[0]
    best_gain = np.zeros(n_nodes)
    best_feature = np.full(n_nodes, -1, dtype=np.int64)
    best_threshold = np.zeros(n_nodes)

    active = node_of >= 0
    m = int(active.sum())
    if m < 2:
        return best_gain, best_feature, best_threshold
    counts = np.bincount(node_of[active], minlength=n_nodes)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    parent = node_G * node_G / (node_H + lam)

    for lo in range(0, n_features, NUMPY_BLOCK):
        rows = sorted_idx[lo : lo + NUMPY_BLOCK]
        nb = rows.shape[0]
        nodes = node_of[rows]
        order = np.argsort(nodes, axis=1, kind="stable")[:, n_rows - m :]
        rows = np.take_along_axis(rows, order, axis=1)
        node_seq = node_of[rows[0]]
        vals = X[rows, np.arange(lo, lo + nb)[:, None]]
        gs, hs = g[rows], h[rows]
        # per-node running sums from zero: same summation order as the loop kernel
        GL = np.empty_like(gs)
        HL = np.empty_like(hs)
        for node in np.nonzero(counts)[0]:
            s, e = starts[node], starts[node] + counts[node]
            GL[:, s:e] = np.cumsum(gs[:, s:e], axis=1)
            HL[:, s:e] = np.cumsum(hs[:, s:e], axis=1)
        GL, HL = GL[:, :-1], HL[:, :-1]
        nd = node_seq[:-1]
        G, H = node_G[nd], node_H[nd]
        GR, HR = G - GL, H - HL
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent[nd]) - gamma
        valid = (
            (nd == node_seq[1:])
            & (vals[:, :-1] != vals[:, 1:])
            & (HL >= min_child_hessian)
            & (HR >= min_child_hessian)
            & (gain > 0)
        )
        if not valid.any():
            continue
        f_idx, k_idx = np.nonzero(valid)  # row-major: feature first, then position
        gains = gain[f_idx, k_idx]
        owners = nd[k_idx]
        block_best = np.full(n_nodes, -np.inf)
        np.maximum.at(block_best, owners, gains)
        winners = gains == block_best[owners]
        pick = np.full(n_nodes, np.iinfo(np.int64).max)
        np.minimum.at(pick, owners[winners], np.nonzero(winners)[0])
        for node in np.unique(owners):
            j = pick[node]
            # strict improvement keeps earlier blocks on ties
            if gains[j] > best_gain[node]:
                f, k = f_idx[j], k_idx[j]
                best_gain[node] = gains[j]
                best_feature[node] = lo + f
                best_threshold[node] = _midpoint(vals[f, k], vals[f, k + 1])
    return best_gain, best_feature, best_threshold


@njit
def predict_forest_numba(X, feature, threshold, left, right, value, roots, base):
    n = X.shape[0]
    out = np.full(n, base)
    # row-major walk keeps one row in cache across all trees; per-row sums
    # still run in tree order, as in the numpy version
    for i in range(n):
        acc = out[i]
        for t in range(roots.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += value[node]
        out[i] = acc
    return out


def predict_forest_numpy(X, feature, threshold, left, right, value, roots, base):
    n = X.shape[0]
    out = np.full(n, base, dtype=float)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        internal = feature[node] >= 0
        while internal.any():
            f = feature[node]
            go_left = X[rows, np.where(internal, f, 0)] < threshold[node]
            node = np.where(internal, np.where(go_left, left[node], right[node]), node)
            internal = feature[node] >= 0
        out += value[node]
    return out


if USE_NUMBA:
    level_best_splits = level_best_splits_numba
    predict_forest = predict_forest_numba
else:
    level_best_splits = level_best_splits_numpy
    predict_forest = predict_forest_numpy
