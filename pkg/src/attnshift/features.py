"""Trials x features matrix over the band-power tensors.

Per band the pool has exactly 505 columns in four categories:

* global (8): mean, sd, min, max, median, IQR, skewness, kurtosis of
  the full channel x frame power matrix.
* intra-roi-spatial (160): per region, six statistics of the four
  time-averaged channel powers (sd, range, mean, variance, skewness,
  kurtosis), plus every channel's time-averaged power attributed to
  its region.
* intra-roi-temporal (208): per region, on the region-mean power
  series: five equal sub-window means, five sub-window sds, the
  least-squares slope over frames, the sd of first differences, and
  the argmax frame position normalized to [0, 1].
* inter-roi (129): Pearson correlation of region-mean series for all
  120 region pairs, hemispheric asymmetry for the 7 left/right pairs,
  and the anterior-posterior gradient (raw and sum-normalized).

Multi-band extraction concatenates the five per-band pools into 2,525
columns. All statistics use population (biased) moments; degenerate
cases (zero variance) yield 0 instead of NaN so the matrix is always
finite.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .montage import MontageDescriptor, standard_montage
from .spectral import BAND_NAMES, BandPowerTensor

__all__ = [
    "FeatureMeta",
    "FeatureMatrix",
    "CATEGORIES",
    "PER_BAND_POOL",
    "build_feature_metas",
    "extract",
    "pearson",
    "write_features",
    "read_features",
]

CAT_GLOBAL = "global"
CAT_SPATIAL = "intra-roi-spatial"
CAT_TEMPORAL = "intra-roi-temporal"
CAT_INTER = "inter-roi"
CATEGORIES = (CAT_GLOBAL, CAT_SPATIAL, CAT_TEMPORAL, CAT_INTER)

PER_BAND_POOL = 505
N_SUBWINDOWS = 5
EPS = 1e-12

_GLOBAL_STATS = ("mean", "sd", "min", "max", "median", "iqr", "skew", "kurt")
_SPATIAL_STATS = ("sd", "range", "mean", "var", "skew", "kurt")
_SPATIAL_SUBTYPE = {
    "sd": "roi-spatial-sd",
    "range": "roi-spatial-range",
    "mean": "roi-low-order",
    "var": "roi-low-order",
    "skew": "roi-high-order",
    "kurt": "roi-high-order",
}


@dataclass(frozen=True)
class FeatureMeta:
    """Identity and provenance of one feature column."""

    id: int
    band: str
    category: str
    subtype: str
    roi_endpoints: tuple[str, ...]
    name: str


@dataclass
class FeatureMatrix:
    """Extracted features plus labels and per-column metadata.

    `degenerate_counts[j]` is the number of trials whose value in
    column j was produced by the degenerate-case rule (zero-variance
    Pearson correlation).
    """

    values: np.ndarray
    metas: list[FeatureMeta]
    labels: np.ndarray
    config: str
    degenerate_counts: np.ndarray

    @property
    def n_trials(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.values.shape[1])


def build_feature_metas(
    bands: tuple[str, ...] = BAND_NAMES, montage: MontageDescriptor | None = None
) -> list[FeatureMeta]:
    """Column metadata for the fixed pool, in extraction order."""
    mont = montage if montage is not None else standard_montage()
    roi_names = tuple(r.name for r in mont.rois)
    metas: list[FeatureMeta] = []

    def add(band, category, subtype, endpoints, name):
        metas.append(
            FeatureMeta(len(metas), band, category, subtype, tuple(endpoints), name)
        )

    for band in bands:
        for stat in _GLOBAL_STATS:
            add(band, CAT_GLOBAL, "global-low-order", (), f"{band}|global|{stat}")
        for roi in roi_names:
            for stat in _SPATIAL_STATS:
                add(
                    band,
                    CAT_SPATIAL,
                    _SPATIAL_SUBTYPE[stat],
                    (roi,),
                    f"{band}|spatial|{roi}|{stat}",
                )
        for ch in mont.channels:
            roi = mont.roi_of(ch.label).name
            add(
                band,
                CAT_SPATIAL,
                "roi-low-order",
                (roi,),
                f"{band}|spatial|{roi}|ch:{ch.label}",
            )
        for roi in roi_names:
            for w in range(N_SUBWINDOWS):
                add(
                    band,
                    CAT_TEMPORAL,
                    "roi-window-low-order",
                    (roi,),
                    f"{band}|temporal|{roi}|win{w}_mean",
                )
            for w in range(N_SUBWINDOWS):
                add(
                    band,
                    CAT_TEMPORAL,
                    "roi-window-low-order",
                    (roi,),
                    f"{band}|temporal|{roi}|win{w}_sd",
                )
            for stat in ("slope", "diff_sd", "argmax_norm"):
                add(
                    band,
                    CAT_TEMPORAL,
                    "roi-temporal-dynamics",
                    (roi,),
                    f"{band}|temporal|{roi}|{stat}",
                )
        for a, b in combinations(range(len(roi_names)), 2):
            add(
                band,
                CAT_INTER,
                "connectivity",
                (roi_names[a], roi_names[b]),
                f"{band}|conn|{roi_names[a]}~{roi_names[b]}",
            )
        for left, right in mont.hemisphere_pairs():
            add(
                band,
                CAT_INTER,
                "hemispheric-asymmetry",
                (left.name, right.name),
                f"{band}|asym|{left.group}",
            )
        add(band, CAT_INTER, "anterior-posterior-gradient", (), f"{band}|gradient|raw")
        add(band, CAT_INTER, "anterior-posterior-gradient", (), f"{band}|gradient|norm")
    return metas


def _guarded_ratio(num: np.ndarray, m2: np.ndarray, power: float) -> np.ndarray:
    out = np.zeros_like(num)
    ok = m2 > 0.0
    np.divide(num, m2**power, out=out, where=ok)
    return out


def _skew_kurt(x: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Population skewness m3/m2^1.5 and kurtosis m4/m2^2; 0 when m2 = 0."""
    mean = x.mean(axis=axis, keepdims=True)
    d = x - mean
    m2 = (d**2).mean(axis=axis)
    m3 = (d**3).mean(axis=axis)
    m4 = (d**4).mean(axis=axis)
    return _guarded_ratio(m3, m2, 1.5), _guarded_ratio(m4, m2, 2.0)


def subwindow_bounds(n_frames: int, n_windows: int = N_SUBWINDOWS) -> list[tuple[int, int]]:
    """Equal sub-window frame ranges; short series reuse frames so every
    window keeps at least one frame."""
    bounds = []
    for w in range(n_windows):
        lo = (w * n_frames) // n_windows
        hi = ((w + 1) * n_frames) // n_windows
        if hi <= lo:
            hi = lo + 1
        bounds.append((lo, hi))
    return bounds


def pearson(x, y) -> float:
    """Sample Pearson correlation, clamped to [-1, 1].

    Zero variance in either input is not an error: the coefficient is
    reported as 0 (the degenerate-case convention used throughout the
    feature pool).
    """
    r, _ = _pearson_flagged(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    return r


def _pearson_flagged(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("pearson expects two equal-length 1-D series of length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float((dx**2).sum())
    syy = float((dy**2).sum())
    if sxx == 0.0 or syy == 0.0:
        return 0.0, True
    r = float((dx * dy).sum()) / float(np.sqrt(sxx * syy))
    return min(1.0, max(-1.0, r)), False


def extract(
    tensors: list[BandPowerTensor],
    labels: np.ndarray,
    montage: MontageDescriptor | None = None,
    bands: tuple[str, ...] = BAND_NAMES,
) -> FeatureMatrix:
    """Build the trials x features matrix from per-trial tensors.

    Parameters
    ----------
    tensors : list of BandPowerTensor
        One per trial, identical shapes and band order.
    labels : array-like
        Per-trial class labels (0 = EI, 1 = TCSI).
    montage : MontageDescriptor, optional
        Defaults to the standard montage.
    bands : tuple of str
        Bands to extract; all five gives the multi-band matrix.

    Returns
    -------
    FeatureMatrix
        Finite values, one column per pooled feature, metadata aligned
        with columns.
    """
    if not tensors:
        raise ValueError("no tensors given")
    mont = montage if montage is not None else standard_montage()
    labels = np.asarray(labels, dtype=np.uint8)
    if labels.shape[0] != len(tensors):
        raise ValueError(
            f"label count {labels.shape[0]} does not match trial count {len(tensors)}"
        )
    ref = tensors[0]
    for t in tensors:
        if t.values.shape != ref.values.shape or t.band_names != ref.band_names:
            raise ValueError("tensors must share shape and band order")
    n = len(tensors)
    n_frames = ref.n_frames
    band_idx = [ref.band_index(b) for b in bands]
    X = np.stack([t.values for t in tensors])  # (n, bands, 64, F)

    roi_names = tuple(r.name for r in mont.rois)
    roi_idx = [np.asarray(mont.roi_channel_indices(name)) for name in roi_names]
    pair_list = list(combinations(range(len(roi_names)), 2))
    hem_pairs = [
        (roi_names.index(l.name), roi_names.index(r.name))
        for l, r in mont.hemisphere_pairs()
    ]
    anterior = [i for i, r in enumerate(mont.rois) if r.anteriority == "anterior"]
    posterior = [i for i, r in enumerate(mont.rois) if r.anteriority == "posterior"]
    bounds = subwindow_bounds(n_frames)
    xc = np.arange(n_frames, dtype=np.float64)
    xc -= xc.mean()
    slope_denom = float((xc**2).sum())

    metas = build_feature_metas(bands, mont)
    values = np.empty((n, len(metas)))
    degenerate = np.zeros(len(metas), dtype=np.int64)
    col = 0

    for bi in band_idx:
        P = X[:, bi]  # (n, 64, F)
        flat = P.reshape(n, -1)
        chan_avg = P.mean(axis=2)  # (n, 64)
        rs = np.stack([P[:, idx, :].mean(axis=1) for idx in roi_idx])  # (16, n, F)
        p_roi = rs.mean(axis=2)  # (16, n)

        # global
        q25, q75 = np.percentile(flat, [25.0, 75.0], axis=1)
        gskew, gkurt = _skew_kurt(flat, axis=1)
        for arr in (
            flat.mean(axis=1),
            flat.std(axis=1),
            flat.min(axis=1),
            flat.max(axis=1),
            np.median(flat, axis=1),
            q75 - q25,
            gskew,
            gkurt,
        ):
            values[:, col] = arr
            col += 1

        # intra-roi spatial: stats of the 4 time-averaged channel powers
        for idx in roi_idx:
            sub = chan_avg[:, idx]  # (n, 4)
            sskew, skurt = _skew_kurt(sub, axis=1)
            for arr in (
                sub.std(axis=1),
                sub.max(axis=1) - sub.min(axis=1),
                sub.mean(axis=1),
                sub.var(axis=1),
                sskew,
                skurt,
            ):
                values[:, col] = arr
                col += 1
        values[:, col : col + 64] = chan_avg
        col += 64

        # intra-roi temporal: stats of the region-mean series
        for r in range(len(roi_names)):
            series = rs[r]  # (n, F)
            for lo, hi in bounds:
                values[:, col] = series[:, lo:hi].mean(axis=1)
                col += 1
            for lo, hi in bounds:
                values[:, col] = series[:, lo:hi].std(axis=1)
                col += 1
            values[:, col] = series @ xc / slope_denom
            col += 1
            values[:, col] = np.diff(series, axis=1).std(axis=1)
            col += 1
            values[:, col] = series.argmax(axis=1) / (n_frames - 1)
            col += 1

        # inter-roi: connectivity, asymmetry, gradient
        centered = rs - rs.mean(axis=2, keepdims=True)
        norms = np.sqrt((centered**2).sum(axis=2))  # (16, n)
        unit = np.zeros_like(centered)
        np.divide(centered, norms[:, :, None], out=unit, where=norms[:, :, None] > 0.0)
        corr = np.clip(np.einsum("anf,bnf->abn", unit, unit), -1.0, 1.0)
        for a, b in pair_list:
            bad = (norms[a] == 0.0) | (norms[b] == 0.0)
            r_ab = corr[a, b].copy()
            r_ab[bad] = 0.0
            values[:, col] = r_ab
            degenerate[col] = int(bad.sum())
            col += 1
        for li, ri in hem_pairs:
            values[:, col] = (p_roi[li] - p_roi[ri]) / (p_roi[li] + p_roi[ri] + EPS)
            col += 1
        ant = p_roi[anterior].mean(axis=0)
        post = p_roi[posterior].mean(axis=0)
        values[:, col] = ant - post
        col += 1
        values[:, col] = (ant - post) / (ant + post + EPS)
        col += 1

    assert col == len(metas)
    if not np.all(np.isfinite(values)):
        raise AssertionError("feature extraction produced non-finite values")
    config = "multi" if tuple(bands) == BAND_NAMES else "+".join(bands)
    return FeatureMatrix(values, metas, labels, config, degenerate)


def write_features(prefix, fm: FeatureMatrix) -> None:
    """Serialize a FeatureMatrix as metadata JSON plus f32 binary."""
    prefix = Path(prefix)
    doc = {
        "config": fm.config,
        "n_trials": fm.n_trials,
        "n_features": fm.n_features,
        "labels": fm.labels.astype(int).tolist(),
        "degenerate_counts": fm.degenerate_counts.astype(int).tolist(),
        "metas": [
            {
                "id": m.id,
                "band": m.band,
                "category": m.category,
                "subtype": m.subtype,
                "roi_endpoints": list(m.roi_endpoints),
                "name": m.name,
            }
            for m in fm.metas
        ],
    }
    prefix.with_suffix(".meta.json").write_text(json.dumps(doc, sort_keys=True) + "\n")
    prefix.with_suffix(".f32").write_bytes(
        np.ascontiguousarray(fm.values, dtype="<f4").tobytes()
    )


def read_features(prefix) -> FeatureMatrix:
    """Read a FeatureMatrix written by :func:`write_features`."""
    prefix = Path(prefix)
    doc = json.loads(prefix.with_suffix(".meta.json").read_text())
    raw = prefix.with_suffix(".f32").read_bytes()
    n, k = doc["n_trials"], doc["n_features"]
    expected = n * k * 4
    if len(raw) != expected:
        raise ValueError(
            f"feature binary has {len(raw)} bytes, expected {expected}"
        )
    values = np.frombuffer(raw, dtype="<f4").reshape(n, k).astype(np.float64)
    metas = [
        FeatureMeta(
            m["id"],
            m["band"],
            m["category"],
            m["subtype"],
            tuple(m["roi_endpoints"]),
            m["name"],
        )
        for m in doc["metas"]
    ]
    return FeatureMatrix(
        values,
        metas,
        np.asarray(doc["labels"], dtype=np.uint8),
        doc["config"],
        np.asarray(doc["degenerate_counts"], dtype=np.int64),
    )


def write_features_csv(path, fm: FeatureMatrix) -> None:
    """CSV export for inspection: label column plus one column per feature."""
    with open(path, "w") as fh:
        fh.write("label," + ",".join(m.name for m in fm.metas) + "\n")
        for i in range(fm.n_trials):
            row = ",".join(f"{v:.9g}" for v in fm.values[i])
            fh.write(f"{int(fm.labels[i])},{row}\n")
