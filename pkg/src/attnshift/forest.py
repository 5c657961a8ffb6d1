"""Random forest classifier built from scratch on flat node arrays.

Binary classification with balanced class weights, bootstrap
resampling, per-node feature subsampling, and exact midpoint
thresholds. Trees are stored as parallel flat arrays (feature,
threshold, left, right, cover, value) so attribution code can walk
them without object overhead. The split scan itself runs in a
swappable kernel backend; everything that affects randomness or row
ordering lives here in the driver, which keeps the two backends
bit-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

CLASS_NAMES = ("EI", "TCSI")

MODEL_FORMAT = "attnshift-forest"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    """Hyperparameters for :func:`fit`.

    features_per_split=None means ceil(sqrt(d)), resolved at fit time.
    Bootstrap resampling and balanced class weights are always on.
    """

    n_trees: int = 200
    max_depth: int = 10
    min_samples_split: int = 10
    features_per_split: int | None = None
    seed: int = 0

    def validate(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be at least 2")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be positive")


@dataclass(eq=False)
class Tree:
    """One decision tree as parallel flat arrays.

    feature[i] is the split feature id, -1 for leaves. x <= threshold
    routes left. cover[i] is the weighted sample count that reached
    node i; value[i] holds the weighted class frequencies (EI, TCSI).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    cover: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    def depth(self):
        """Maximum root-to-leaf edge count, 0 for a lone leaf."""
        best = 0
        stack = [(0, 0)]
        while stack:
            node, d = stack.pop()
            if self.feature[node] < 0:
                best = max(best, d)
            else:
                stack.append((self.left[node], d + 1))
                stack.append((self.right[node], d + 1))
        return best


@dataclass(eq=False)
class ForestModel:
    config: ForestConfig
    n_features: int
    class_weights: np.ndarray
    trees: list[Tree]
    classes: tuple[str, str] = CLASS_NAMES
    bootstrap_indices: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def n_trees(self):
        return len(self.trees)


def balanced_weights(y: np.ndarray) -> np.ndarray:
    """Per-class weights w_c = n / (2 * n_c) for binary labels 0/1."""
    y = np.asarray(y)
    n = y.shape[0]
    n0 = int(np.sum(y == 0))
    n1 = n - n0
    if n0 == 0 or n1 == 0:
        raise ValueError("training labels contain a single class")
    return np.array([n / (2.0 * n0), n / (2.0 * n1)])


def features_per_split(d: int, config: ForestConfig) -> int:
    if config.features_per_split is not None:
        return min(config.features_per_split, d)
    return min(int(math.ceil(math.sqrt(d))), d)


class _TreeBuilder:
    def __init__(self):
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.cover = []
        self.value = []

    def add_node(self, s0, s1):
        idx = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        total = s0 + s1
        self.cover.append(total)
        self.value.append((s0 / total, s1 / total))
        return idx

    def freeze(self):
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            cover=np.asarray(self.cover, dtype=np.float64),
            value=np.asarray(self.value, dtype=np.float64),
        )


def _grow(builder, X, y, w, rows, depth, rng, config, mtry):
    yr = y[rows]
    wr = w[yr]
    s0 = float(np.sum(wr[yr == 0]))
    s1 = float(np.sum(wr[yr == 1]))
    node = builder.add_node(s0, s1)
    n = rows.shape[0]
    if depth >= config.max_depth or n < config.min_samples_split:
        return node
    if s0 == 0.0 or s1 == 0.0:
        return node
    feats = np.sort(rng.choice(X.shape[1], size=mtry, replace=False))
    gathered = X[np.ix_(rows, feats)]
    col, thr, _ = _kernels.backend.best_split(gathered, wr, yr)
    if col < 0:
        return node
    f = int(feats[col])
    mask = X[rows, f] <= thr
    left_rows = rows[mask]
    right_rows = rows[~mask]
    builder.feature[node] = f
    builder.threshold[node] = thr
    builder.left[node] = _grow(builder, X, y, w, left_rows, depth + 1, rng, config, mtry)
    builder.right[node] = _grow(builder, X, y, w, right_rows, depth + 1, rng, config, mtry)
    return node


def fit(X: np.ndarray, y: np.ndarray, config: ForestConfig | None = None) -> ForestModel:
    """Fit a balanced random forest on a binary problem.

    Parameters
    ----------
    X : (n, d) float array
    y : (n,) int array of 0 (EI) and 1 (TCSI)
    config : ForestConfig, optional

    Returns
    -------
    ForestModel

    Raises
    ------
    ValueError
        On a single-class y, label values outside {0, 1}, or an
        empty/ill-shaped X.
    """
    if config is None:
        config = ForestConfig()
    config.validate()
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("X must be a non-empty 2-D array")
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ValueError("y length does not match X")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    y = y.astype(np.uint8)
    w = balanced_weights(y)
    n, d = X.shape
    mtry = features_per_split(d, config)
    seqs = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees = []
    boots = []
    for seq in seqs:
        rng = np.random.default_rng(seq)
        boot = rng.integers(0, n, size=n)
        Xb = X[boot]
        yb = y[boot]
        builder = _TreeBuilder()
        _grow(builder, Xb, yb, w, np.arange(n), 0, rng, config, mtry)
        trees.append(builder.freeze())
        boots.append(boot.astype(np.int64))
    return ForestModel(
        config=config,
        n_features=d,
        class_weights=w,
        trees=trees,
        bootstrap_indices=boots,
    )


def _tree_leaf_indices(tree: Tree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    while True:
        f = tree.feature[node]
        internal = f >= 0
        if not internal.any():
            return node
        xv = X[rows, np.maximum(f, 0)]
        go_left = xv <= tree.threshold[node]
        nxt = np.where(go_left, tree.left[node], tree.right[node])
        node = np.where(internal, nxt, node)


def predict_proba(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Mean of per-tree leaf class frequencies, shape (n, 2)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} feature columns, got array of shape {X.shape}"
        )
    acc = np.zeros((X.shape[0], 2))
    for tree in model.trees:
        acc += tree.value[_tree_leaf_indices(tree, X)]
    acc /= len(model.trees)
    return acc


def oob_proba(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Out-of-bag probabilities; NaN rows were in-bag for every tree."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    acc = np.zeros((X.shape[0], 2))
    counts = np.zeros(X.shape[0])
    for tree, boot in zip(model.trees, model.bootstrap_indices):
        oob = np.ones(X.shape[0], dtype=bool)
        oob[boot] = False
        if not oob.any():
            continue
        acc[oob] += tree.value[_tree_leaf_indices(tree, X[oob])]
        counts[oob] += 1.0
    with np.errstate(invalid="ignore"):
        return acc / counts[:, None]


def save_model(model: ForestModel, path) -> None:
    """Write a versioned JSON representation; exact float round trip."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "classes": list(model.classes),
        "n_features": model.n_features,
        "class_weights": model.class_weights.tolist(),
        "config": {
            "n_trees": model.config.n_trees,
            "max_depth": model.config.max_depth,
            "min_samples_split": model.config.min_samples_split,
            "features_per_split": model.config.features_per_split,
            "seed": model.config.seed,
        },
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "cover": t.cover.tolist(),
                "value": t.value.tolist(),
            }
            for t in model.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path) -> ForestModel:
    """Load a model written by :func:`save_model`.

    Raises
    ------
    ValueError
        On a wrong format marker or unsupported version.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a forest model file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')!r}")
    cfg = ForestConfig(**doc["config"])
    trees = [
        Tree(
            feature=np.asarray(t["feature"], dtype=np.int32),
            threshold=np.asarray(t["threshold"], dtype=np.float64),
            left=np.asarray(t["left"], dtype=np.int32),
            right=np.asarray(t["right"], dtype=np.int32),
            cover=np.asarray(t["cover"], dtype=np.float64),
            value=np.asarray(t["value"], dtype=np.float64),
        )
        for t in doc["trees"]
    ]
    return ForestModel(
        config=cfg,
        n_features=int(doc["n_features"]),
        class_weights=np.asarray(doc["class_weights"]),
        trees=trees,
        classes=tuple(doc["classes"]),
    )
