"""Exact tree-path attributions and their aggregation to share tables.

The explained output is the EI-class probability (class index 0), so
positive values push the model toward EI and negative values toward
TCSI. Per-tree attributions come from the exact path-dependent
recursion over cover fractions (no background dataset); forest values
are the per-tree mean, with the base value defined as the matching
cover-weighted expectation so that base + sum(phi) equals the
predicted EI probability.

`brute_shapley` recomputes the same quantity from the Shapley
definition by enumerating feature subsets; it exists purely as an
independent oracle and is capped at 12 distinct features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .features import CAT_SPATIAL, CAT_TEMPORAL, FeatureMeta
from .forest import ForestModel, Tree, predict_proba
from .montage import ROI_NAMES
from .spectral import BAND_NAMES

__all__ = [
    "EXPLAINED_CLASS",
    "Attribution",
    "AttributionSummary",
    "tree_shap",
    "brute_shapley",
    "aggregate",
]

EXPLAINED_CLASS = 0

BRUTE_MAX_FEATURES = 12


@dataclass(eq=False)
class Attribution:
    """Per-trial attributions toward the EI probability.

    phi has one row per explained trial; base is the cover-weighted
    expected output shared by all rows; prediction[i] is the model's
    EI probability for row i, which equals base + phi[i].sum() up to
    float drift.
    """

    phi: np.ndarray
    base: float
    prediction: np.ndarray


def _tree_expectation(tree: Tree, values: np.ndarray) -> float:
    """Cover-fraction expectation of the per-node scalar `values`."""

    def rec(node):
        if tree.feature[node] < 0:
            return float(values[node])
        l = tree.left[node]
        r = tree.right[node]
        w = tree.cover[node]
        return (tree.cover[l] / w) * rec(l) + (tree.cover[r] / w) * rec(r)

    return rec(0)


def tree_shap(model: ForestModel, X: np.ndarray) -> Attribution:
    """Exact path-dependent attributions for every row of X.

    Parameters
    ----------
    model : ForestModel
    X : (n, d) float array

    Returns
    -------
    Attribution
        phi of shape (n, d) toward P(EI); base such that
        base + phi[i].sum() = prediction[i] within 1e-9.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} feature columns, got array of shape {X.shape}"
        )
    n, d = X.shape
    phi = np.zeros((n, d))
    base = 0.0
    for tree in model.trees:
        values = np.ascontiguousarray(tree.value[:, EXPLAINED_CLASS])
        max_path = tree.depth()
        for i in range(n):
            _kernels.backend.tree_shap(
                tree.feature,
                tree.threshold,
                tree.left,
                tree.right,
                tree.cover,
                values,
                max_path,
                X[i],
                phi[i],
            )
        base += _tree_expectation(tree, values)
    phi /= len(model.trees)
    base /= len(model.trees)
    prediction = predict_proba(model, X)[:, EXPLAINED_CLASS]
    return Attribution(phi=phi, base=base, prediction=prediction)


def brute_shapley(tree: Tree, x: np.ndarray, n_features: int) -> tuple[np.ndarray, float]:
    """Shapley values of one tree by explicit subset enumeration.

    The value function v(S) fixes the features in S to x and
    marginalizes the rest with cover fractions at every split.
    Features the tree never splits on get exactly zero. Only usable
    for trees with at most 12 distinct split features.

    Returns
    -------
    (phi, base)
        phi of shape (n_features,); base = v(empty set).
    """
    used = sorted({int(f) for f in tree.feature if f >= 0})
    k = len(used)
    if k > BRUTE_MAX_FEATURES:
        raise ValueError(
            f"tree splits on {k} distinct features, oracle cap is {BRUTE_MAX_FEATURES}"
        )
    pos = {f: i for i, f in enumerate(used)}
    x = np.asarray(x, dtype=np.float64)

    def veval(mask):
        def rec(node):
            f = tree.feature[node]
            if f < 0:
                return float(tree.value[node, EXPLAINED_CLASS])
            if (mask >> pos[int(f)]) & 1:
                if x[f] <= tree.threshold[node]:
                    return rec(tree.left[node])
                return rec(tree.right[node])
            l = tree.left[node]
            r = tree.right[node]
            w = tree.cover[node]
            return (tree.cover[l] / w) * rec(l) + (tree.cover[r] / w) * rec(r)

        return rec(0)

    vs = [veval(mask) for mask in range(1 << k)]
    fact = [math.factorial(i) for i in range(k + 1)]
    phi = np.zeros(n_features)
    for f in used:
        bit = 1 << pos[f]
        for mask in range(1 << k):
            if mask & bit:
                continue
            s = bin(mask).count("1")
            weight = fact[s] * fact[k - s - 1] / fact[k]
            phi[f] += weight * (vs[mask | bit] - vs[mask])
    return phi, vs[0]


@dataclass(eq=False)
class AttributionSummary:
    """Normalized importance shares at several aggregation levels.

    Every level is built from the per-column mean absolute phi and
    normalized to sum to one. The ROI level splits connectivity and
    asymmetry columns half/half between their two endpoint regions and
    leaves out columns with no regional identity (global statistics
    and the anterior/posterior gradients).
    """

    mean_abs: np.ndarray
    band_shares: dict[str, float]
    category_shares: dict[str, float]
    subtype_shares: dict[str, float]
    roi_shares: dict[str, float]

    def to_jsonable(self) -> dict:
        return {
            "band_shares": self.band_shares,
            "category_shares": self.category_shares,
            "subtype_shares": self.subtype_shares,
            "roi_shares": self.roi_shares,
        }


def _normalize(acc: dict[str, float]) -> dict[str, float]:
    total = sum(acc.values())
    if total <= 0.0:
        return {key: 1.0 / len(acc) for key in acc}
    return {key: val / total for key, val in acc.items()}


def aggregate(phi: np.ndarray, metas: list[FeatureMeta]) -> AttributionSummary:
    """Aggregate per-trial attributions into normalized share tables.

    Parameters
    ----------
    phi : (n, d) or (d,) float array
        Attributions toward P(EI); the sign is dropped here.
    metas : list of FeatureMeta
        Metadata for the d columns, in column order.

    Returns
    -------
    AttributionSummary
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim == 1:
        phi = phi[None, :]
    if phi.shape[1] != len(metas):
        raise ValueError("phi columns do not match metadata length")
    imp = np.mean(np.abs(phi), axis=0)

    bands_present = [b for b in BAND_NAMES if any(m.band == b for m in metas)]
    band_acc = {b: 0.0 for b in bands_present}
    cat_acc: dict[str, float] = {}
    sub_acc: dict[str, float] = {}
    roi_acc = {name: 0.0 for name in ROI_NAMES}
    for m, v in zip(metas, imp):
        v = float(v)
        band_acc[m.band] += v
        cat_acc[m.category] = cat_acc.get(m.category, 0.0) + v
        sub_acc[m.subtype] = sub_acc.get(m.subtype, 0.0) + v
        if m.category in (CAT_SPATIAL, CAT_TEMPORAL):
            roi_acc[m.roi_endpoints[0]] += v
        elif len(m.roi_endpoints) == 2:
            roi_acc[m.roi_endpoints[0]] += 0.5 * v
            roi_acc[m.roi_endpoints[1]] += 0.5 * v
    return AttributionSummary(
        mean_abs=imp,
        band_shares=_normalize(band_acc),
        category_shares=_normalize(cat_acc),
        subtype_shares=_normalize(sub_acc),
        roi_shares=_normalize(roi_acc),
    )
