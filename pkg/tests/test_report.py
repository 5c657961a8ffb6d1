import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from attnshift.montage import ROI_NAMES, standard_montage
from attnshift.report import (
    TopomapSpec,
    _TM_CX,
    _ramp_color,
    render_shap_summary,
    render_topomap,
)

SVG_NS = "{http://www.w3.org/2000/svg}"


def const_values(v=0.5):
    return {name: v for name in ROI_NAMES}


def ramp_values():
    return {name: i / (len(ROI_NAMES) - 1) for i, name in enumerate(ROI_NAMES)}


def parse_patches(svg):
    root = ET.fromstring(svg)
    out = {}
    for el in root.iter(SVG_NS + "polygon"):
        if "data-roi" not in el.attrib:
            continue
        pts = [
            tuple(float(t) for t in pair.split(","))
            for pair in el.attrib["points"].split()
        ]
        out[el.attrib["data-roi"]] = (pts, el.attrib["fill"])
    return out


def mirror_name(name):
    if name.startswith("left "):
        return "right " + name[5:]
    if name.startswith("right "):
        return "left " + name[6:]
    return name


def mirrored(points):
    return [(2.0 * _TM_CX - x, y) for x, y in points]


def point_sets_match(a, b, tol=1e-3):
    if len(a) != len(b):
        return False
    remaining = list(b)
    for p in a:
        hit = None
        for i, q in enumerate(remaining):
            if math.hypot(p[0] - q[0], p[1] - q[1]) <= tol:
                hit = i
                break
        if hit is None:
            return False
        remaining.pop(hit)
    return True


class TestTopomap:
    def test_valid_xml_single_root(self):
        svg = render_topomap(TopomapSpec(values=ramp_values(), title="t", band="alpha"))
        root = ET.fromstring(svg)
        assert root.tag == SVG_NS + "svg"
        assert len(parse_patches(svg)) == 16

    def test_constant_values_share_one_fill(self):
        svg = render_topomap(TopomapSpec(values=const_values(0.37)))
        fills = {fill for _, fill in parse_patches(svg).values()}
        assert len(fills) == 1

    def test_byte_identical_rerender(self):
        spec = TopomapSpec(values=ramp_values(), title="same", band="gamma")
        assert render_topomap(spec) == render_topomap(spec)

    def test_scale_endpoints_hit_ramp_ends(self):
        vals = const_values(0.0)
        vals["left prefrontal"] = 1.0
        svg = render_topomap(TopomapSpec(values=vals, vmin=0.0, vmax=1.0))
        patches = parse_patches(svg)
        assert patches["left prefrontal"][1] == _ramp_color(1.0)
        assert patches["right occipital"][1] == _ramp_color(0.0)
        assert _ramp_color(0.0) == "#440154"
        assert _ramp_color(1.0) == "#fde725"

    def test_mirrored_values_mirror_the_rendering(self):
        vals = ramp_values()
        swapped = {mirror_name(n): v for n, v in vals.items()}
        a = parse_patches(render_topomap(TopomapSpec(values=vals)))
        b = parse_patches(render_topomap(TopomapSpec(values=swapped)))

        # fills swap hemispheres for every region
        for name in ROI_NAMES:
            assert a[name][1] == b[mirror_name(name)][1]

        # six lateral pairs are exact geometric mirrors
        strict = (
            "prefrontal", "frontal", "fronto-central",
            "centro-temporal", "parietal", "parietal2",
        )
        for base in strict:
            left = a[f"left {base}"][0]
            right = b[f"right {base}"][0]
            assert point_sets_match(mirrored(left), right)

        # midline patches are their own mirror image
        for name in ("midline frontal", "midline parietal"):
            assert point_sets_match(mirrored(a[name][0]), b[name][0])

        # the occipital pair is the documented exception: Iz belongs to
        # the left region and Oz to the right, both on the midline, so
        # the two hulls are not x-mirrors of each other
        left = a["left occipital"][0]
        right = b["right occipital"][0]
        assert not point_sets_match(mirrored(left), right)

    def test_missing_region_rejected(self):
        vals = ramp_values()
        del vals["left frontal"]
        with pytest.raises(ValueError, match="missing value for region"):
            render_topomap(TopomapSpec(values=vals))

    def test_unknown_region_rejected(self):
        vals = ramp_values()
        vals["left nowhere"] = 0.5
        with pytest.raises(ValueError, match="unexpected region"):
            render_topomap(TopomapSpec(values=vals))

    def test_non_finite_rejected(self):
        vals = ramp_values()
        vals["left frontal"] = float("nan")
        with pytest.raises(ValueError, match="non-finite"):
            render_topomap(TopomapSpec(values=vals))

    def test_unknown_colormap_rejected(self):
        with pytest.raises(ValueError, match="unknown colormap"):
            render_topomap(TopomapSpec(values=ramp_values(), colormap="jet"))

    def test_custom_montage_argument(self):
        svg = render_topomap(TopomapSpec(values=ramp_values()), standard_montage())
        assert len(parse_patches(svg)) == 16


def small_swarm(n=30, d=8, seed=3):
    rng = np.random.default_rng(seed)
    phi = rng.normal(0.0, 0.05, (n, d))
    # distinct importance per column so ordering is unambiguous
    phi *= np.linspace(2.0, 0.2, d)[None, :]
    values = rng.random((n, d))
    names = [f"gamma|roi|left prefrontal|s{i}" for i in range(d)]
    return phi, values, names


class TestShapSummary:
    def test_valid_xml_and_determinism(self):
        phi, values, names = small_swarm()
        a = render_shap_summary(phi, values, names, top_k=5, title="S01")
        b = render_shap_summary(phi, values, names, top_k=5, title="S01")
        assert a == b
        root = ET.fromstring(a)
        assert root.tag == SVG_NS + "svg"

    def test_rows_ordered_by_mean_abs_descending(self):
        phi, values, names = small_swarm()
        svg = render_shap_summary(phi, values, names, top_k=8)
        root = ET.fromstring(svg)
        shown = [
            g.attrib["data-feature"]
            for g in root.iter(SVG_NS + "g")
            if "data-feature" in g.attrib
        ]
        mean_abs = {n: float(np.mean(np.abs(phi[:, j]))) for j, n in enumerate(names)}
        expected = sorted(names, key=lambda n: -mean_abs[n])
        assert shown == expected

    def test_k_one_single_labeled_row(self):
        phi, values, names = small_swarm()
        top = names[int(np.argmax(np.mean(np.abs(phi), axis=0)))]
        svg = render_shap_summary(phi, values, names, top_k=1)
        root = ET.fromstring(svg)
        rows = [g for g in root.iter(SVG_NS + "g") if "data-feature" in g.attrib]
        assert len(rows) == 1
        assert rows[0].attrib["data-feature"] == top
        assert top in svg

    def test_oversized_k_clamps_with_warning(self):
        phi, values, names = small_swarm(d=4)
        with pytest.warns(UserWarning, match="clamping"):
            svg = render_shap_summary(phi, values, names, top_k=10)
        root = ET.fromstring(svg)
        rows = [g for g in root.iter(SVG_NS + "g") if "data-feature" in g.attrib]
        assert len(rows) == 4

    def test_zero_phi_axis_only(self):
        phi = np.zeros((12, 5))
        values = np.random.default_rng(0).random((12, 5))
        names = [f"f{i}" for i in range(5)]
        svg = render_shap_summary(phi, values, names, top_k=3)
        root = ET.fromstring(svg)
        assert list(root.iter(SVG_NS + "circle")) == []
        assert "favor TCSI" in svg

    def test_annotation_present(self):
        phi, values, names = small_swarm()
        svg = render_shap_summary(phi, values, names, top_k=2)
        assert "negative SHAP values favor TCSI" in svg

    def test_long_names_truncated_in_label_not_attr(self):
        phi, values, _ = small_swarm(d=2)
        long = "highbeta|conn|left centro-temporal:right centro-temporal"
        names = [long, "short"]
        svg = render_shap_summary(phi, values, names, top_k=1)
        root = ET.fromstring(svg)
        row = next(g for g in root.iter(SVG_NS + "g") if "data-feature" in g.attrib)
        assert row.attrib["data-feature"] == long
        label = next(t for t in row.iter(SVG_NS + "text"))
        assert label.text.endswith("...")
        assert len(label.text) <= 44

    def test_shape_validation(self):
        phi, values, names = small_swarm()
        with pytest.raises(ValueError, match="same shape"):
            render_shap_summary(phi, values[:, :4], names)
        with pytest.raises(ValueError, match="names length"):
            render_shap_summary(phi, values, names[:-1])
        with pytest.raises(ValueError, match="at least 1"):
            render_shap_summary(phi, values, names, top_k=0)
        with pytest.raises(ValueError, match="2-D"):
            render_shap_summary(phi[0], values[0], names)
