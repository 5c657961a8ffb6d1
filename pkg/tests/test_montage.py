import json

import pytest

from attnshift.montage import (
    CHANNEL_LABELS,
    GROUP_NAMES,
    ROI_NAMES,
    standard_montage,
)


@pytest.fixture(scope="module")
def mont():
    return standard_montage()


def test_channel_count_and_uniqueness(mont):
    assert len(mont.channels) == 64
    labels = [c.label for c in mont.channels]
    assert len(set(labels)) == 64
    assert sorted(c.index for c in mont.channels) == list(range(64))


def test_roi_count_and_partition(mont):
    assert len(mont.rois) == 16
    seen = []
    for roi in mont.rois:
        assert len(roi.channels) == 4
        seen.extend(roi.channels)
    assert len(seen) == 64
    assert set(seen) == set(CHANNEL_LABELS)


def test_hemisphere_tally(mont):
    tally = {"left": 0, "right": 0, "midline": 0}
    for roi in mont.rois:
        tally[roi.hemisphere] += 1
    assert tally == {"left": 7, "right": 7, "midline": 2}


def test_known_roi_memberships(mont):
    assert set(mont.roi("left prefrontal").channels) == {"Fp1", "AF7", "AF3", "F1"}
    assert set(mont.roi("midline parietal").channels) == {"Cz", "CPz", "Pz", "POz"}
    assert set(mont.roi("midline frontal").channels) == {"Fpz", "AFz", "Fz", "FCz"}
    assert set(mont.roi("right occipital").channels) == {"PO8", "PO4", "O2", "Oz"}


def test_roi_of(mont):
    assert mont.roi_of("Oz").name == "right occipital"
    assert mont.roi_of("Fz").name == "midline frontal"
    assert mont.roi_of("Iz").name == "left occipital"
    with pytest.raises(KeyError):
        mont.roi_of("XX")
    with pytest.raises(KeyError):
        mont.roi("left temporal")


def test_hemisphere_pairs(mont):
    pairs = mont.hemisphere_pairs()
    assert len(pairs) == 7
    names = [(l.name, r.name) for l, r in pairs]
    assert ("left prefrontal", "right prefrontal") in names
    for left, right in pairs:
        assert left.hemisphere == "left"
        assert right.hemisphere == "right"
        assert left.group == right.group
        assert len(left.channels) == len(right.channels) == 4
    assert [l.group for l, _ in pairs] == list(GROUP_NAMES)


def test_position_signs_and_disc_bound(mont):
    for c in mont.channels:
        x, y = c.pos2d
        assert x * x + y * y <= 1.0
        if c.label.endswith("z"):
            assert x == 0.0
        elif c.label in ("Iz",):
            assert x == 0.0


def test_left_right_mean_x_separation(mont):
    for left, right in mont.hemisphere_pairs():
        lx = sum(mont.channel(c).pos2d[0] for c in left.channels) / 4
        rx = sum(mont.channel(c).pos2d[0] for c in right.channels) / 4
        assert lx < 0.0 < rx


def test_mirror_symmetry_of_pairs(mont):
    # left/right regions mirror each other channel by channel; Iz/Oz
    # both sit on the positional midline so only the x-sign flip holds
    for left, right in mont.hemisphere_pairs():
        for lc, rc in zip(left.channels, right.channels):
            lx, ly = mont.channel(lc).pos2d
            rx, ry = mont.channel(rc).pos2d
            assert lx == -rx
            if lx != 0.0:
                assert ly == ry


def test_anteriority_assignment(mont):
    ant = {r.name for r in mont.rois if r.anteriority == "anterior"}
    post = {r.name for r in mont.rois if r.anteriority == "posterior"}
    cent = {r.name for r in mont.rois if r.anteriority == "central"}
    assert "left prefrontal" in ant and "midline frontal" in ant
    assert "left fronto-central" in ant
    assert "midline parietal" in post and "right occipital" in post
    assert cent == {"left centro-temporal", "right centro-temporal"}
    assert len(ant) == 7 and len(post) == 7 and len(cent) == 2


def test_roi_name_order_is_stable(mont):
    assert tuple(r.name for r in mont.rois) == ROI_NAMES
    assert ROI_NAMES[0] == "left prefrontal"
    assert len(ROI_NAMES) == 16


def test_json_export_round_trip(mont):
    doc = json.loads(mont.to_json())
    assert len(doc["channels"]) == 64
    assert len(doc["rois"]) == 16
    by_label = {c["label"]: c for c in doc["channels"]}
    assert by_label["Oz"]["roi"] == "right occipital"
    assert by_label["Cz"]["pos2d"] == [0.0, 0.0]
    # serialization is deterministic
    assert mont.to_json() == mont.to_json()
