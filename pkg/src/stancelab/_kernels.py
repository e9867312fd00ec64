"""Hot numeric kernels for the boosted-tree engine.

Two implementations are provided: a numba ``@njit`` path (default) and a pure
numpy path. Set ``STANCELAB_NO_NUMBA=1`` to force the numpy path; it is also
used automatically when numba is unavailable. ``benchmarks/split_benchmark.py``
compares the two.
"""

from __future__ import annotations

import os

import numpy as np

# switching later in a process does nothing: the choice is bound at import
NUMBA_DISABLED = os.environ.get("STANCELAB_NO_NUMBA", "0").lower() in ("1", "true", "yes")

if not NUMBA_DISABLED:
    try:
        from numba import njit
    except ImportError:
        NUMBA_DISABLED = True

USING_NUMBA = not NUMBA_DISABLED

# candidate splits must beat the incumbent by this margin; makes the scan
# order-stable under float noise
GAIN_EPS = 1e-12


def _best_split_loop(Xn, gn, hn, reg_lambda, min_child_weight):
    """Exact greedy split search over all columns of one tree node.

    Returns (column, threshold, gain); column is -1 when no split improves the
    loss. Thresholds are midpoints between consecutive distinct sorted values,
    with `x < threshold` routed left.
    """
    m, p = Xn.shape
    g_total = 0.0
    h_total = 0.0
    for i in range(m):
        g_total += gn[i]
        h_total += hn[i]
    parent = g_total * g_total / (h_total + reg_lambda)

    best_gain = 0.0
    best_col = -1
    best_thr = 0.0
    for j in range(p):
        col = Xn[:, j]
        # stable sort so tied values accumulate in row order on both paths
        order = np.argsort(col, kind="mergesort")
        gl = 0.0
        hl = 0.0
        for idx in range(m - 1):
            r = order[idx]
            gl += gn[r]
            hl += hn[r]
            v = col[r]
            v_next = col[order[idx + 1]]
            if v_next <= v:
                continue
            hr = h_total - hl
            if hl < min_child_weight or hr < min_child_weight:
                continue
            gr = g_total - gl
            gain = 0.5 * (gl * gl / (hl + reg_lambda)
                          + gr * gr / (hr + reg_lambda) - parent)
            if gain > best_gain + GAIN_EPS:
                best_gain = gain
                best_col = j
                best_thr = 0.5 * (v + v_next)
    return best_col, best_thr, best_gain


def _best_split_numpy(Xn, gn, hn, reg_lambda, min_child_weight):
    """Vectorized equivalent of :func:`_best_split_loop`."""
    m, p = Xn.shape
    # cumsum accumulates left to right, bit-matching the loop kernel's totals
    # (plain .sum() pairs terms differently and drifts in the last ulp)
    g_total = float(np.cumsum(gn)[-1])
    h_total = float(np.cumsum(hn)[-1])
    parent = g_total * g_total / (h_total + reg_lambda)

    best_gain = 0.0
    best_col = -1
    best_thr = 0.0
    for j in range(p):
        col = Xn[:, j]
        order = np.argsort(col, kind="mergesort")
        sv = col[order]
        gl = np.cumsum(gn[order])[:-1]
        hl = np.cumsum(hn[order])[:-1]
        hr = h_total - hl
        valid = (sv[1:] > sv[:-1]) & (hl >= min_child_weight) & (hr >= min_child_weight)
        if not valid.any():
            continue
        gr = g_total - gl
        gains = 0.5 * (gl * gl / (hl + reg_lambda)
                       + gr * gr / (hr + reg_lambda) - parent)
        for idx in np.nonzero(valid)[0]:
            gain = gains[idx]
            if gain > best_gain + GAIN_EPS:
                best_gain = float(gain)
                best_col = j
                best_thr = 0.5 * float(sv[idx] + sv[idx + 1])
    return best_col, best_thr, best_gain


def _predict_margin_loop(X, feature, threshold, left, right, value,
                         tree_start, out):
    """Add the output of every tree to ``out`` (one margin per row of X)."""
    n = X.shape[0]
    n_trees = tree_start.shape[0]
    for t in range(n_trees):
        root = tree_start[t]
        for i in range(n):
            node = root
            while feature[node] >= 0:
                if X[i, feature[node]] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] += value[node]
    return out


def _predict_margin_numpy(X, feature, threshold, left, right, value,
                          tree_start, out):
    n = X.shape[0]
    rows = np.arange(n)
    for t in range(tree_start.shape[0]):
        nodes = np.full(n, tree_start[t], dtype=np.int64)
        while True:
            feats = feature[nodes]
            active = feats >= 0
            if not active.any():
                break
            idx = rows[active]
            f = feats[active]
            go_left = X[idx, f] < threshold[nodes[active]]
            nodes[idx] = np.where(go_left, left[nodes[active]],
                                  right[nodes[active]])
        out += value[nodes]
    return out


if USING_NUMBA:
    best_split = njit(cache=True)(_best_split_loop)
    predict_margin = njit(cache=True)(_predict_margin_loop)
else:
    best_split = _best_split_numpy
    predict_margin = _predict_margin_numpy
