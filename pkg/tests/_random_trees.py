"""Random tree factory shared by attribution tests.

Builds standalone trees with consistent covers (children sum to the
parent) and leaf values in [0, 1], for comparing the path recursion
against the brute-force subset oracle.
"""

import numpy as np

from attnshift.forest import Tree


def make_random_tree(rng, max_depth=6, n_features=10, leaf_prob=0.3):
    cols = {k: [] for k in ("feature", "threshold", "left", "right", "cover", "value")}

    def grow(depth_left, cover):
        idx = len(cols["feature"])
        for k in cols:
            cols[k].append(None)
        if depth_left == 0 or rng.random() < leaf_prob:
            v = float(rng.random())
            cols["feature"][idx] = -1
            cols["threshold"][idx] = 0.0
            cols["left"][idx] = -1
            cols["right"][idx] = -1
            cols["cover"][idx] = cover
            cols["value"][idx] = (v, 1.0 - v)
            return idx
        frac = float(rng.uniform(0.1, 0.9))
        cols["feature"][idx] = int(rng.integers(0, n_features))
        cols["threshold"][idx] = float(np.round(rng.normal(), 2))
        cols["cover"][idx] = cover
        cols["value"][idx] = (0.0, 0.0)
        cols["left"][idx] = grow(depth_left - 1, cover * frac)
        cols["right"][idx] = grow(depth_left - 1, cover * (1.0 - frac))
        return idx

    grow(max_depth, float(rng.uniform(20.0, 200.0)))
    return Tree(
        feature=np.asarray(cols["feature"], dtype=np.int32),
        threshold=np.asarray(cols["threshold"], dtype=np.float64),
        left=np.asarray(cols["left"], dtype=np.int32),
        right=np.asarray(cols["right"], dtype=np.int32),
        cover=np.asarray(cols["cover"], dtype=np.float64),
        value=np.asarray(cols["value"], dtype=np.float64),
    )
