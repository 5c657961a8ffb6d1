import numpy as np
import pytest

from attnshift.features import (
    CATEGORIES,
    PER_BAND_POOL,
    build_feature_metas,
    extract,
    pearson,
    read_features,
    subwindow_bounds,
    write_features,
    write_features_csv,
)
from attnshift.spectral import BAND_NAMES, BandPowerTensor

from _feature_oracle import oracle_trial_features


def make_tensor(values, fs=256.0):
    values = np.asarray(values, dtype=np.float64)
    n_frames = values.shape[2]
    times = -2.0 + 0.125 * (np.arange(n_frames) + 1)
    return BandPowerTensor(values, times, fs, 64, 32)


def random_tensors(n_trials, n_frames, seed):
    rng = np.random.default_rng(seed)
    return [
        make_tensor(rng.gamma(2.0, 1.0, size=(5, 64, n_frames)))
        for _ in range(n_trials)
    ]


def test_pool_sizes_and_category_counts():
    metas = build_feature_metas()
    assert len(metas) == 5 * PER_BAND_POOL == 2525
    for band in BAND_NAMES:
        counts = {c: 0 for c in CATEGORIES}
        for m in metas:
            if m.band == band:
                counts[m.category] += 1
        assert counts == {
            "global": 8,
            "intra-roi-spatial": 160,
            "intra-roi-temporal": 208,
            "inter-roi": 129,
        }
    assert [m.id for m in metas] == list(range(2525))
    single = build_feature_metas(bands=("alpha",))
    assert len(single) == PER_BAND_POOL


def test_meta_endpoint_arities():
    by_subtype = {}
    for m in build_feature_metas(bands=("theta",)):
        by_subtype.setdefault(m.subtype, []).append(m)
    assert all(len(m.roi_endpoints) == 0 for m in by_subtype["global-low-order"])
    assert all(len(m.roi_endpoints) == 1 for m in by_subtype["roi-spatial-sd"])
    conn = by_subtype["connectivity"]
    assert len(conn) == 120
    assert all(
        len(m.roi_endpoints) == 2 and m.roi_endpoints[0] != m.roi_endpoints[1]
        for m in conn
    )
    assert {frozenset(m.roi_endpoints) for m in conn} == {
        frozenset(p) for p in __import__("itertools").combinations(
            [m.roi_endpoints[0] for m in by_subtype["roi-spatial-sd"]], 2
        )
    }
    assert all(len(m.roi_endpoints) == 2 for m in by_subtype["hemispheric-asymmetry"])
    assert all(
        len(m.roi_endpoints) == 0 for m in by_subtype["anterior-posterior-gradient"]
    )


def test_constant_tensor_degenerate_values():
    tensors = [make_tensor(np.full((5, 64, 11), 3.25))]
    fm = extract(tensors, [0])
    by_name = {m.name: fm.values[0, m.id] for m in fm.metas}
    for m in fm.metas:
        if m.name.endswith(("|sd", "|range", "|var", "_sd", "|slope")):
            assert by_name[m.name] == 0.0
        if "|asym|" in m.name or "|gradient|" in m.name:
            assert by_name[m.name] == 0.0
        if "|conn|" in m.name:
            assert by_name[m.name] == 0.0
    assert np.all(fm.degenerate_counts[[m.id for m in fm.metas if "|conn|" in m.name]] == 1)


def test_affine_series_correlate_to_one():
    rng = np.random.default_rng(2)
    base = rng.gamma(2.0, 1.0, size=(5, 64, 11))
    vals = base.copy()
    # make right prefrontal channels an increasing affine map of left
    # prefrontal's mean series so the pair correlates at exactly 1
    from attnshift.montage import standard_montage

    mont = standard_montage()
    li = list(mont.roi_channel_indices("left prefrontal"))
    ri = list(mont.roi_channel_indices("right prefrontal"))
    left_mean = base[:, li, :].mean(axis=1)
    for c in ri:
        vals[:, c, :] = 2.0 * left_mean + 1.0
    fm = extract([make_tensor(vals)], [1])
    name = "alpha|conn|left prefrontal~right prefrontal"
    idx = next(m.id for m in fm.metas if m.name == name)
    assert abs(fm.values[0, idx] - 1.0) <= 1e-12


def test_pearson_examples():
    assert pearson([1, 2, 3], [1, 2, 3]) == 1.0
    assert pearson([1, 2, 3], [3, 2, 1]) == -1.0
    # textbook formula via an independent implementation
    import scipy.stats

    x, y = [1.0, 2.0, 4.0], [2.0, 2.0, 5.0]
    expected = float(scipy.stats.pearsonr(x, y).statistic)
    assert abs(pearson(x, y) - expected) <= 1e-12
    assert pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == 0.0
    with pytest.raises(ValueError):
        pearson([1.0], [2.0])


def test_extract_matches_oracle():
    tensors = random_tensors(3, 5, seed=4)
    fm = extract(tensors, [0, 1, 0])
    for t in range(3):
        expected = oracle_trial_features(tensors[t].values, BAND_NAMES)
        assert len(expected) == 2525
        for m in fm.metas:
            got = fm.values[t, m.id]
            assert abs(got - expected[m.name]) <= 1e-9, (m.name, got, expected[m.name])


def test_extract_matches_oracle_f11_single_band():
    tensors = random_tensors(2, 11, seed=5)
    fm = extract(tensors, [0, 1], bands=("gamma",))
    assert fm.config == "gamma"
    assert fm.n_features == PER_BAND_POOL
    for t in range(2):
        expected = oracle_trial_features(tensors[t].values[4:5], ("gamma",))
        for m in fm.metas:
            assert abs(fm.values[t, m.id] - expected[m.name]) <= 1e-9, m.name


def test_value_range_invariants():
    fm = extract(random_tensors(4, 11, seed=6), [0, 1, 0, 1])
    assert np.all(np.isfinite(fm.values))
    for m in fm.metas:
        colv = fm.values[:, m.id]
        if "|conn|" in m.name:
            assert np.all(colv >= -1.0) and np.all(colv <= 1.0)
        if "|asym|" in m.name:
            assert np.all(colv > -1.0) and np.all(colv < 1.0)
        if m.name.endswith(("_sd", "|sd")):
            assert np.all(colv >= 0.0)
        if m.name.endswith("argmax_norm"):
            assert np.all(colv >= 0.0) and np.all(colv <= 1.0)


def test_scale_equivariance():
    tensors = random_tensors(3, 11, seed=7)
    scaled = [
        make_tensor(t.values * 7.0)
        for t in tensors
    ]
    a = extract(tensors, [0, 1, 0])
    b = extract(scaled, [0, 1, 0])
    for m in a.metas:
        va, vb = a.values[:, m.id], b.values[:, m.id]
        if ("|conn|" in m.name or "|asym|" in m.name
                or m.name.endswith(("argmax_norm", "|gradient|norm"))):
            assert np.allclose(vb, va, atol=1e-9)
        elif m.name.endswith(("|mean", "|sd", "|range", "|median", "|iqr", "_mean", "_sd",
                              "|slope", "|gradient|raw")) or "|ch:" in m.name:
            assert np.allclose(vb, 7.0 * va, rtol=1e-9, atol=1e-12)


def test_subwindow_bounds():
    assert subwindow_bounds(11) == [(0, 2), (2, 4), (4, 6), (6, 8), (8, 11)]
    assert subwindow_bounds(5) == [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]
    b3 = subwindow_bounds(3)
    assert len(b3) == 5
    assert all(hi > lo for lo, hi in b3)
    assert all(0 <= lo and hi <= 3 for lo, hi in b3)


def test_label_mismatch_rejected():
    with pytest.raises(ValueError, match="label count"):
        extract(random_tensors(2, 5, seed=8), [0])


def test_serialization_round_trip(tmp_path):
    fm = extract(random_tensors(3, 5, seed=9), [0, 1, 0])
    write_features(tmp_path / "feat", fm)
    back = read_features(tmp_path / "feat")
    assert back.config == fm.config
    assert back.n_features == fm.n_features
    np.testing.assert_array_equal(back.labels, fm.labels)
    np.testing.assert_array_equal(back.degenerate_counts, fm.degenerate_counts)
    np.testing.assert_allclose(
        back.values, fm.values.astype(np.float32).astype(np.float64)
    )
    assert [m.name for m in back.metas] == [m.name for m in fm.metas]
    write_features_csv(tmp_path / "feat.csv", fm)
    lines = (tmp_path / "feat.csv").read_text().strip().split("\n")
    assert len(lines) == 4
    assert lines[0].startswith("label,")
    assert len(lines[0].split(",")) == 2526
