"""Pure-Python/NumPy fallback kernels, result-identical to the compiled ones.

Every function here mirrors a function in _core.pyx: same traversal
order, same arithmetic expression order, same tie-breaking, so the two
backends produce bit-identical models and attributions. The split scan
relies on the uniqueness of stable-sort permutations and on sequential
(left-to-right) prefix sums; the attribution recursion is the exact
path-dependent algorithm over cover fractions.
"""

from __future__ import annotations

import numpy as np


def backend_name():
    return "python"


def best_split(values: np.ndarray, w: np.ndarray, y: np.ndarray):
    """Scan candidate feature columns for the lowest weighted Gini split.

    Parameters
    ----------
    values : (n, m) float64
        Node rows x candidate features, candidate order = ascending
        feature id (the tie-break order).
    w : (n,) float64
        Per-row class weights.
    y : (n,) uint8
        Binary labels.

    Returns
    -------
    (col, threshold, score) : (int, float, float)
        Winning candidate column, midpoint threshold, and weighted
        child impurity sum; col = -1 when no column admits a split.
        Ties keep the first candidate (lowest feature id, then lowest
        threshold).
    """
    n, m = values.shape
    w0 = np.where(y == 0, w, 0.0)
    w1 = np.where(y == 1, w, 0.0)
    best_col = -1
    best_thr = 0.0
    best_score = np.inf
    for j in range(m):
        v = values[:, j]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        c0 = np.cumsum(w0[order])
        c1 = np.cumsum(w1[order])
        t0 = c0[n - 1]
        t1 = c1[n - 1]
        bmask = sv[:-1] != sv[1:]
        if not bmask.any():
            continue
        l0 = c0[:-1][bmask]
        l1 = c1[:-1][bmask]
        r0 = t0 - l0
        r1 = t1 - l1
        lw = l0 + l1
        rw = r0 + r1
        la = l0 / lw
        lb = l1 / lw
        ra = r0 / rw
        rb = r1 / rw
        gl = 1.0 - la * la - lb * lb
        gr = 1.0 - ra * ra - rb * rb
        score = lw * gl + rw * gr
        k = int(np.argmin(score))
        sk = float(score[k])
        if sk < best_score:
            lo_vals = sv[:-1][bmask]
            hi_vals = sv[1:][bmask]
            a = float(lo_vals[k])
            b = float(hi_vals[k])
            thr = 0.5 * (a + b)
            if thr == b:
                thr = a
            best_col = j
            best_thr = thr
            best_score = sk
    return best_col, best_thr, best_score


def _extend_path(fi, zf, of, pw, unique_depth, zero_fraction, one_fraction, feature_index):
    fi[unique_depth] = feature_index
    zf[unique_depth] = zero_fraction
    of[unique_depth] = one_fraction
    pw[unique_depth] = 1.0 if unique_depth == 0 else 0.0
    for i in range(unique_depth - 1, -1, -1):
        pw[i + 1] += one_fraction * pw[i] * (i + 1.0) / (unique_depth + 1.0)
        pw[i] = zero_fraction * pw[i] * (unique_depth - i) / (unique_depth + 1.0)


def _unwind_path(fi, zf, of, pw, unique_depth, path_index):
    one_fraction = of[path_index]
    zero_fraction = zf[path_index]
    next_one_portion = pw[unique_depth]
    for i in range(unique_depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = pw[i]
            pw[i] = next_one_portion * (unique_depth + 1.0) / ((i + 1.0) * one_fraction)
            next_one_portion = tmp - pw[i] * zero_fraction * (unique_depth - i) / (
                unique_depth + 1.0
            )
        else:
            pw[i] = (pw[i] * (unique_depth + 1.0)) / (zero_fraction * (unique_depth - i))
    for i in range(path_index, unique_depth):
        fi[i] = fi[i + 1]
        zf[i] = zf[i + 1]
        of[i] = of[i + 1]


def _unwound_path_sum(fi, zf, of, pw, unique_depth, path_index):
    one_fraction = of[path_index]
    zero_fraction = zf[path_index]
    next_one_portion = pw[unique_depth]
    total = 0.0
    for i in range(unique_depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = next_one_portion * (unique_depth + 1.0) / ((i + 1.0) * one_fraction)
            total += tmp
            next_one_portion = pw[i] - tmp * zero_fraction * (
                (unique_depth - i) / (unique_depth + 1.0)
            )
        else:
            total += (pw[i] / zero_fraction) / ((unique_depth - i) / (unique_depth + 1.0))
    return total


def _shap_recurse(
    feature,
    threshold,
    left,
    right,
    cover,
    value,
    x,
    phi,
    fi,
    zf,
    of,
    pw,
    node,
    unique_depth,
    parent_offset,
    parent_zero_fraction,
    parent_one_fraction,
    parent_feature_index,
):
    offset = parent_offset + unique_depth + 1
    for i in range(unique_depth + 1):
        fi[offset + i] = fi[parent_offset + i]
        zf[offset + i] = zf[parent_offset + i]
        of[offset + i] = of[parent_offset + i]
        pw[offset + i] = pw[parent_offset + i]
    _extend_path(
        fi[offset:],
        zf[offset:],
        of[offset:],
        pw[offset:],
        unique_depth,
        parent_zero_fraction,
        parent_one_fraction,
        parent_feature_index,
    )
    f = feature[node]
    if f < 0:
        leaf_value = value[node]
        for i in range(1, unique_depth + 1):
            wsum = _unwound_path_sum(
                fi[offset:], zf[offset:], of[offset:], pw[offset:], unique_depth, i
            )
            phi[fi[offset + i]] += (
                wsum * (of[offset + i] - zf[offset + i]) * leaf_value
            )
        return
    if x[f] <= threshold[node]:
        hot, cold = left[node], right[node]
    else:
        hot, cold = right[node], left[node]
    wnode = cover[node]
    hot_zero_fraction = cover[hot] / wnode
    cold_zero_fraction = cover[cold] / wnode
    incoming_zero_fraction = 1.0
    incoming_one_fraction = 1.0
    path_index = 0
    while path_index <= unique_depth:
        if fi[offset + path_index] == f:
            break
        path_index += 1
    if path_index != unique_depth + 1:
        incoming_zero_fraction = zf[offset + path_index]
        incoming_one_fraction = of[offset + path_index]
        _unwind_path(
            fi[offset:], zf[offset:], of[offset:], pw[offset:], unique_depth, path_index
        )
        unique_depth -= 1
    _shap_recurse(
        feature, threshold, left, right, cover, value, x, phi,
        fi, zf, of, pw,
        hot, unique_depth + 1, offset,
        hot_zero_fraction * incoming_zero_fraction, incoming_one_fraction, f,
    )
    _shap_recurse(
        feature, threshold, left, right, cover, value, x, phi,
        fi, zf, of, pw,
        cold, unique_depth + 1, offset,
        cold_zero_fraction * incoming_zero_fraction, 0.0, f,
    )


def tree_shap(feature, threshold, left, right, cover, value, max_path, x, phi):
    """Add one tree's exact path-dependent attributions into phi.

    `value` is the per-node explained scalar (leaf entries used);
    `max_path` bounds the number of distinct features on any root-leaf
    path (tree depth suffices). phi is accumulated in place.
    """
    size = (max_path + 2) * (max_path + 3) // 2
    fi = np.zeros(size, dtype=np.int64)
    zf = np.zeros(size)
    of = np.zeros(size)
    pw = np.zeros(size)
    _shap_recurse(
        feature, threshold, left, right, cover, value, x, phi,
        fi, zf, of, pw,
        0, 0, 0, 1.0, 1.0, -1,
    )
