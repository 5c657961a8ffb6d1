"""SVG rendering of scalp topographies and attribution summaries.

Two renderers, both pure functions of their inputs: a region-level
topographic map (one convex patch per region, colored by a scalar),
and a beeswarm-style summary of per-trial attribution values for the
top features. Output is hand-assembled SVG 1.1 so the bytes depend
only on the inputs, never on a plotting backend, clock, or RNG.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .montage import MontageDescriptor, standard_montage

__all__ = [
    "TopomapSpec",
    "render_topomap",
    "render_shap_summary",
]

# Perceptually ordered dark-to-bright ramp (viridis anchor colors),
# interpolated linearly in RGB.
_RAMP = (
    (0x44, 0x01, 0x54),
    (0x46, 0x30, 0x7E),
    (0x3E, 0x4A, 0x89),
    (0x31, 0x68, 0x8E),
    (0x26, 0x82, 0x8E),
    (0x1F, 0x9E, 0x89),
    (0x35, 0xB7, 0x79),
    (0x6D, 0xCD, 0x59),
    (0xB4, 0xDE, 0x2C),
    (0xFD, 0xE7, 0x25),
)

_COLORMAPS = ("viridis",)

# Octagon of this radius is unioned around every electrode before the
# hull is taken, so regions whose electrodes are collinear (the two
# midline regions) still get a visible patch.
_PATCH_PAD = 0.055
_C45 = math.sqrt(0.5)
_OCTAGON = (
    (1.0, 0.0), (_C45, _C45), (0.0, 1.0), (-_C45, _C45),
    (-1.0, 0.0), (-_C45, -_C45), (0.0, -1.0), (_C45, -_C45),
)


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def _ramp_color(t: float) -> str:
    """Hex color at position t in [0, 1] along the built-in ramp."""
    t = min(max(t, 0.0), 1.0)
    pos = t * (len(_RAMP) - 1)
    i = min(int(pos), len(_RAMP) - 2)
    frac = pos - i
    a, b = _RAMP[i], _RAMP[i + 1]
    rgb = tuple(round(ca + frac * (cb - ca)) for ca, cb in zip(a, b))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _convex_hull(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    # Andrew's monotone chain; input always has extent in both axes
    # because every electrode contributes a full octagon.
    pts = sorted(set(points))
    if len(pts) <= 2:
        return list(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _roi_patch(montage: MontageDescriptor, roi_name: str) -> list[tuple[float, float]]:
    roi = montage.roi(roi_name)
    pts = []
    for lab in roi.channels:
        x, y = montage.channel(lab).pos2d
        for dx, dy in _OCTAGON:
            pts.append((x + _PATCH_PAD * dx, y + _PATCH_PAD * dy))
    return _convex_hull(pts)


@dataclass(frozen=True)
class TopomapSpec:
    """Input to :func:`render_topomap`.

    Attributes
    ----------
    values : mapping of str to float
        One finite scalar per region name; must cover exactly the
        montage's regions.
    vmin, vmax : float or None
        Color scale endpoints. None means take the data minimum or
        maximum.
    colormap : str
        Name of the color ramp; only "viridis" is built in.
    title : str
        Figure title text.
    band : str
        Band label shown under the title; empty to omit.
    """

    values: Mapping[str, float]
    vmin: float | None = None
    vmax: float | None = None
    colormap: str = "viridis"
    title: str = ""
    band: str = ""

    def validate(self, montage: MontageDescriptor) -> None:
        if self.colormap not in _COLORMAPS:
            raise ValueError(f"unknown colormap {self.colormap!r}")
        names = {r.name for r in montage.rois}
        for name in names:
            if name not in self.values:
                raise ValueError(f"missing value for region {name!r}")
        for name, v in self.values.items():
            if name not in names:
                raise ValueError(f"unexpected region {name!r}")
            if not math.isfinite(v):
                raise ValueError(f"non-finite value for region {name!r}")


# Fixed layout for the topomap canvas.
_TM_W, _TM_H = 520, 470
_TM_CX, _TM_CY, _TM_R = 215.0, 258.0, 170.0
_TM_BAR_X, _TM_BAR_W = 440.0, 22.0
_TM_BAR_TOP, _TM_BAR_H = 118.0, 280.0
_BAR_SEGMENTS = 64


def _head_to_svg(x: float, y: float) -> tuple[float, float]:
    return _TM_CX + _TM_R * x, _TM_CY - _TM_R * y


def render_topomap(spec: TopomapSpec, montage: MontageDescriptor | None = None) -> str:
    """Render a region-level scalp map as an SVG document string.

    Draws the head outline (unit circle plus a nose marker), one
    convex patch per region around its electrode positions filled by
    the color ramp, the electrode positions themselves, and a color
    bar with numeric ticks. Output bytes are a pure function of the
    spec and montage.

    Parameters
    ----------
    spec : TopomapSpec
        Values, color scale, and labels.
    montage : MontageDescriptor, optional
        Electrode layout; the standard montage when omitted.

    Returns
    -------
    str
        A complete SVG 1.1 document.
    """
    if montage is None:
        montage = standard_montage()
    spec.validate(montage)

    vals = spec.values
    vmin = spec.vmin if spec.vmin is not None else min(vals.values())
    vmax = spec.vmax if spec.vmax is not None else max(vals.values())
    span = vmax - vmin

    def color_of(v: float) -> str:
        t = 0.5 if span <= 0.0 else (v - vmin) / span
        return _ramp_color(t)

    out: list[str] = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_TM_W}" height="{_TM_H}" viewBox="0 0 {_TM_W} {_TM_H}">'
    )
    out.append(f'<rect width="{_TM_W}" height="{_TM_H}" fill="#ffffff"/>')
    if spec.title:
        out.append(
            f'<text x="20" y="30" font-family="sans-serif" font-size="17" '
            f'fill="#111111">{escape(spec.title)}</text>'
        )
    if spec.band:
        out.append(
            f'<text x="20" y="52" font-family="sans-serif" font-size="13" '
            f'fill="#555555">band: {escape(spec.band)}</text>'
        )

    # nose marker, then head circle, then patches and electrodes
    nose_tip = (_TM_CX, _TM_CY - _TM_R - 16.0)
    nose_l = (_TM_CX - 13.0, _TM_CY - _TM_R + 4.0)
    nose_r = (_TM_CX + 13.0, _TM_CY - _TM_R + 4.0)
    nose_pts = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in (nose_l, nose_tip, nose_r))
    out.append(
        f'<polygon points="{nose_pts}" fill="none" stroke="#222222" stroke-width="2"/>'
    )
    out.append(
        f'<circle cx="{_fmt(_TM_CX)}" cy="{_fmt(_TM_CY)}" r="{_fmt(_TM_R)}" '
        f'fill="#fcfcfc" stroke="#222222" stroke-width="2"/>'
    )

    for roi in montage.rois:
        hull = _roi_patch(montage, roi.name)
        pts = " ".join(
            f"{_fmt(px)},{_fmt(py)}"
            for px, py in (_head_to_svg(hx, hy) for hx, hy in hull)
        )
        out.append(
            f'<polygon data-roi={quoteattr(roi.name)} points="{pts}" '
            f'fill="{color_of(vals[roi.name])}" fill-opacity="0.88" '
            f'stroke="#333333" stroke-width="1"/>'
        )

    for ch in montage.channels:
        cx, cy = _head_to_svg(*ch.pos2d)
        out.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="2.2" fill="#1a1a1a"/>'
        )

    # color bar: stacked segments from vmin (bottom) to vmax (top)
    seg_h = _TM_BAR_H / _BAR_SEGMENTS
    for i in range(_BAR_SEGMENTS):
        t = (i + 0.5) / _BAR_SEGMENTS
        y = _TM_BAR_TOP + _TM_BAR_H - (i + 1) * seg_h
        out.append(
            f'<rect x="{_fmt(_TM_BAR_X)}" y="{_fmt(y)}" '
            f'width="{_fmt(_TM_BAR_W)}" height="{_fmt(seg_h + 0.5)}" '
            f'fill="{_ramp_color(t)}"/>'
        )
    out.append(
        f'<rect x="{_fmt(_TM_BAR_X)}" y="{_fmt(_TM_BAR_TOP)}" '
        f'width="{_fmt(_TM_BAR_W)}" height="{_fmt(_TM_BAR_H)}" '
        f'fill="none" stroke="#222222" stroke-width="1"/>'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = vmin + frac * span
        y = _TM_BAR_TOP + _TM_BAR_H * (1.0 - frac)
        x0 = _TM_BAR_X + _TM_BAR_W
        out.append(
            f'<line x1="{_fmt(x0)}" y1="{_fmt(y)}" x2="{_fmt(x0 + 5.0)}" '
            f'y2="{_fmt(y)}" stroke="#222222" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(x0 + 8.0)}" y="{_fmt(y + 4.0)}" '
            f'font-family="sans-serif" font-size="11" '
            f'fill="#111111">{v:.4g}</text>'
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"


# Beeswarm layout constants.
_BS_LEFT = 290.0
_BS_PLOT_W = 430.0
_BS_ROW_H = 26.0
_BS_TOP = 64.0
_BS_BINS = 48
_BS_STEP = 3.2
_BS_MAX_OFF = 9.6
_BS_NAME_CHARS = 44


def _swarm_offsets(xs: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Deterministic vertical offsets that spread overlapping points.

    Points are binned by x position; within a bin they fan out above
    and below the row centerline in input order.
    """
    span = hi - lo
    offsets = np.zeros(len(xs))
    counts: dict[int, int] = {}
    for i, x in enumerate(xs):
        b = 0 if span <= 0.0 else min(int((x - lo) / span * _BS_BINS), _BS_BINS - 1)
        k = counts.get(b, 0)
        counts[b] = k + 1
        level = (k + 1) // 2
        sign = 1.0 if k % 2 == 1 else -1.0
        off = 0.0 if k == 0 else sign * min(level * _BS_STEP, _BS_MAX_OFF)
        offsets[i] = off
    return offsets


def render_shap_summary(
    phi: np.ndarray,
    values: np.ndarray,
    names: Sequence[str],
    top_k: int = 20,
    title: str = "",
) -> str:
    """Render a beeswarm-style attribution summary as an SVG string.

    One row per feature, ordered by mean absolute attribution
    descending; each trial contributes one point at its attribution
    value, colored by the trial's feature value (dark = low, bright =
    high on the built-in ramp). The sign convention is annotated on
    the figure: negative values favor the TCSI class.

    Parameters
    ----------
    phi : ndarray, shape (n_trials, n_features)
        Per-trial attribution values.
    values : ndarray, shape (n_trials, n_features)
        The corresponding feature values, used for point color.
    names : sequence of str
        Feature descriptor per column.
    top_k : int
        Number of rows; clamped to the feature count with a warning
        when larger.
    title : str
        Figure title text.

    Returns
    -------
    str
        A complete SVG 1.1 document.
    """
    phi = np.asarray(phi, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if phi.ndim != 2:
        raise ValueError("phi must be 2-D (trials by features)")
    if values.shape != phi.shape:
        raise ValueError("values must have the same shape as phi")
    if len(names) != phi.shape[1]:
        raise ValueError("names length does not match phi columns")
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    d = phi.shape[1]
    if top_k > d:
        warnings.warn(
            f"top_k {top_k} exceeds the {d} available features; clamping",
            stacklevel=2,
        )
        top_k = d

    mean_abs = np.mean(np.abs(phi), axis=0)
    order = np.argsort(-mean_abs, kind="stable")[:top_k]
    empty = bool(np.all(phi == 0.0))
    n_rows = 0 if empty else len(order)

    xmax = float(np.max(np.abs(phi[:, order]))) if not empty else 1.0
    if xmax <= 0.0:
        xmax = 1.0
    xmax *= 1.05
    lo, hi = -xmax, xmax

    plot_h = max(n_rows, 1) * _BS_ROW_H
    height = _BS_TOP + plot_h + 74.0
    width = _BS_LEFT + _BS_PLOT_W + 60.0

    def x_of(v: float) -> float:
        return _BS_LEFT + (v - lo) / (hi - lo) * _BS_PLOT_W

    out: list[str] = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">'
    )
    out.append(f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>')
    if title:
        out.append(
            f'<text x="20" y="30" font-family="sans-serif" font-size="16" '
            f'fill="#111111">{escape(title)}</text>'
        )

    axis_y = _BS_TOP + plot_h + 8.0
    zero_x = x_of(0.0)
    out.append(
        f'<line x1="{_fmt(zero_x)}" y1="{_fmt(_BS_TOP - 6.0)}" '
        f'x2="{_fmt(zero_x)}" y2="{_fmt(axis_y)}" '
        f'stroke="#999999" stroke-width="1" stroke-dasharray="4 3"/>'
    )

    for r in range(n_rows):
        j = int(order[r])
        cy = _BS_TOP + (r + 0.5) * _BS_ROW_H
        name = names[j]
        label = name if len(name) <= _BS_NAME_CHARS else name[: _BS_NAME_CHARS - 3] + "..."
        out.append(
            f'<g data-feature={quoteattr(name)}>'
            f'<text x="{_fmt(_BS_LEFT - 10.0)}" y="{_fmt(cy + 3.5)}" '
            f'text-anchor="end" font-family="monospace" font-size="10" '
            f'fill="#222222">{escape(label)}</text>'
        )
        col_phi = phi[:, j]
        col_val = values[:, j]
        vlo, vhi = float(np.min(col_val)), float(np.max(col_val))
        vspan = vhi - vlo
        offs = _swarm_offsets(col_phi, lo, hi)
        for i in range(len(col_phi)):
            t = 0.5 if vspan <= 0.0 else (col_val[i] - vlo) / vspan
            out.append(
                f'<circle cx="{_fmt(x_of(float(col_phi[i])))}" '
                f'cy="{_fmt(cy + offs[i])}" r="3" '
                f'fill="{_ramp_color(t)}" fill-opacity="0.8"/>'
            )
        out.append("</g>")

    # x axis with numeric ticks
    out.append(
        f'<line x1="{_fmt(_BS_LEFT)}" y1="{_fmt(axis_y)}" '
        f'x2="{_fmt(_BS_LEFT + _BS_PLOT_W)}" y2="{_fmt(axis_y)}" '
        f'stroke="#222222" stroke-width="1"/>'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = lo + frac * (hi - lo)
        x = _BS_LEFT + frac * _BS_PLOT_W
        out.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(axis_y)}" x2="{_fmt(x)}" '
            f'y2="{_fmt(axis_y + 5.0)}" stroke="#222222" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(x)}" y="{_fmt(axis_y + 18.0)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10" fill="#111111">{v:.3g}</text>'
        )
    out.append(
        f'<text x="{_fmt(_BS_LEFT + 0.5 * _BS_PLOT_W)}" y="{_fmt(axis_y + 36.0)}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'fill="#111111">SHAP value</text>'
    )
    out.append(
        f'<text x="{_fmt(_BS_LEFT + 0.5 * _BS_PLOT_W)}" y="{_fmt(axis_y + 54.0)}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="11" '
        f'fill="#555555">negative SHAP values favor TCSI; '
        f'point color = feature value (dark low, bright high)</text>'
    )

    out.append("</svg>")
    return "\n".join(out) + "\n"
