"""Stratified ANOVA-F feature selection with category budgets.

Within each (band, category) stratum, features rank by one-way ANOVA
F-score (descending, ties by ascending id, an infinite sentinel for
zero within-class variance with distinct means ranks above all finite
scores). Category budgets are fixed fractions of the total (global
0.15, intra-ROI spatial 0.30, intra-ROI temporal 0.30, inter-ROI
0.25); each category's budget splits equally across bands, remainder
slots and any small-pool surplus go to the same category's globally
best leftovers, and any category-wide shortfall refills across
categories by descending F. The selected count always equals the
budget exactly, and selection reads training rows only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .features import CATEGORIES, FeatureMeta

__all__ = [
    "CATEGORY_FRACTIONS",
    "SelectionPlan",
    "anova_f",
    "anova_f_columns",
    "category_budgets",
    "select",
]

CATEGORY_FRACTIONS = {
    "global": 0.15,
    "intra-roi-spatial": 0.30,
    "intra-roi-temporal": 0.30,
    "inter-roi": 0.25,
}

MULTI_BAND_BUDGET = 500
SINGLE_BAND_BUDGET = 100


@dataclass
class SelectionPlan:
    """Outcome of one stratified selection run."""

    total_budget: int
    category_fractions: dict[str, float]
    category_budgets: dict[str, int]
    stratum_counts: dict[tuple[str, str], int]
    selected_ids: np.ndarray
    f_scores: np.ndarray

    def to_json(self) -> str:
        doc = {
            "total_budget": self.total_budget,
            "category_fractions": self.category_fractions,
            "category_budgets": self.category_budgets,
            "stratum_counts": {
                f"{band}|{cat}": n for (band, cat), n in self.stratum_counts.items()
            },
            "selected": [
                {"id": int(i), "f": None if np.isinf(f) else float(f)}
                for i, f in zip(self.selected_ids, self.f_scores)
            ],
        }
        return json.dumps(doc, sort_keys=True)


def _class_split(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    classes = np.unique(y)
    if classes.shape[0] != 2:
        raise ValueError(f"expected exactly 2 classes, got {classes.shape[0]}")
    m0 = y == classes[0]
    m1 = y == classes[1]
    if m0.sum() < 2 or m1.sum() < 2:
        raise ValueError("each class needs at least 2 samples for ANOVA")
    return m0, m1


def anova_f_columns(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """One-way (two-class) ANOVA F per column of X.

    F = between-class mean square / within-class mean square. Columns
    with zero within-class variance score +inf when class means differ
    and 0 when the column is constant.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    m0, m1 = _class_split(y)
    n0, n1 = int(m0.sum()), int(m1.sum())
    n = n0 + n1
    x0, x1 = X[m0], X[m1]
    mu0 = x0.mean(axis=0)
    mu1 = x1.mean(axis=0)
    mu = X.mean(axis=0)
    ssb = n0 * (mu0 - mu) ** 2 + n1 * (mu1 - mu) ** 2
    ssw = ((x0 - mu0) ** 2).sum(axis=0) + ((x1 - mu1) ** 2).sum(axis=0)
    msw = ssw / (n - 2)
    out = np.zeros(X.shape[1])
    ok = ssw > 0.0
    np.divide(ssb, msw, out=out, where=ok)
    out[~ok & (ssb > 0.0)] = np.inf
    return out


def anova_f(values, labels) -> float:
    """Scalar one-way ANOVA F for a single feature column."""
    v = np.asarray(values, dtype=np.float64).reshape(-1, 1)
    return float(anova_f_columns(v, np.asarray(labels))[0])


def category_budgets(total_budget: int) -> dict[str, int]:
    """Split the total budget by category fractions (largest remainder)."""
    exact = {c: CATEGORY_FRACTIONS[c] * total_budget for c in CATEGORIES}
    floors = {c: int(np.floor(exact[c])) for c in CATEGORIES}
    short = total_budget - sum(floors.values())
    by_remainder = sorted(
        CATEGORIES, key=lambda c: (-(exact[c] - floors[c]), CATEGORIES.index(c))
    )
    for c in by_remainder[:short]:
        floors[c] += 1
    return floors


def _stratum_order(ids: np.ndarray, f: np.ndarray) -> list[int]:
    """Ids sorted by descending F, ties by ascending id."""
    order = np.lexsort((ids, -f[ids]))
    return [int(i) for i in ids[order]]


def select(
    X: np.ndarray,
    y: np.ndarray,
    metas: list[FeatureMeta],
    total_budget: int | None = None,
) -> SelectionPlan:
    """Pick exactly `total_budget` features from training data.

    Parameters
    ----------
    X : ndarray
        Training rows x features (training rows only; never pass
        held-out rows).
    y : array-like
        Training labels, two classes with >= 2 samples each.
    metas : list of FeatureMeta
        Column metadata aligned with X.
    total_budget : int, optional
        Defaults to 500 when five bands are present, 100 otherwise.

    Returns
    -------
    SelectionPlan
        Selected ids (ascending) with their F-scores and per-stratum
        realized counts.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != len(metas):
        raise ValueError("metas do not match column count")
    bands = []
    for m in metas:
        if m.band not in bands:
            bands.append(m.band)
    if total_budget is None:
        total_budget = MULTI_BAND_BUDGET if len(bands) == 5 else SINGLE_BAND_BUDGET
    if X.shape[1] < total_budget:
        raise ValueError(
            f"feature pool ({X.shape[1]}) smaller than budget ({total_budget})"
        )

    f = anova_f_columns(X, y)
    strata: dict[tuple[str, str], list[int]] = {}
    for m in metas:
        strata.setdefault((m.band, m.category), []).append(m.id)
    ordered = {
        key: _stratum_order(np.asarray(ids), f) for key, ids in strata.items()
    }

    budgets = category_budgets(total_budget)
    selected: list[int] = []
    taken = {key: 0 for key in ordered}
    deficit = 0
    for cat in CATEGORIES:
        cat_keys = [(b, cat) for b in bands if (b, cat) in ordered]
        budget = budgets[cat]
        if not cat_keys:
            deficit += budget
            continue
        base = budget // len(cat_keys)
        for key in cat_keys:
            take = min(base, len(ordered[key]))
            selected.extend(ordered[key][:take])
            taken[key] = take
        # remainder slots plus any small-pool surplus go to the
        # category's globally best leftovers
        remaining = budget - sum(taken[key] for key in cat_keys)
        leftovers = [
            (key, i) for key in cat_keys for i in ordered[key][taken[key] :]
        ]
        leftovers.sort(key=lambda t: (-f[t[1]], t[1]))
        for key, i in leftovers[:remaining]:
            selected.append(i)
            taken[key] += 1
        remaining = budget - sum(taken[key] for key in cat_keys)
        deficit += remaining

    if deficit > 0:
        # category-wide shortfall: refill across categories by F
        pool = [
            (key, i)
            for key, ids in ordered.items()
            for i in ids[taken[key] :]
        ]
        pool.sort(key=lambda t: (-f[t[1]], t[1]))
        for key, i in pool[:deficit]:
            selected.append(i)
            taken[key] += 1

    assert len(selected) == total_budget
    assert len(set(selected)) == total_budget
    ids = np.asarray(sorted(selected), dtype=np.int64)
    return SelectionPlan(
        total_budget=total_budget,
        category_fractions=dict(CATEGORY_FRACTIONS),
        category_budgets=budgets,
        stratum_counts={key: taken[key] for key in ordered},
        selected_ids=ids,
        f_scores=f[ids],
    )
