"""64-channel electrode layout and its 16-region grouping.

The montage is a fixed constant: 64 electrodes of the standard BioSemi
64 cap in connector order, partitioned into 16 regions of interest
(ROIs) of 4 channels each. Seven region groups span left/right
hemisphere pairs; frontal and parietal rows additionally carry a
midline region. Everything downstream (feature naming, asymmetry
pairing, topographic rendering) keys off this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

__all__ = [
    "Channel",
    "Roi",
    "MontageDescriptor",
    "standard_montage",
    "CHANNEL_LABELS",
    "ROI_NAMES",
    "GROUP_NAMES",
]

# Connector order (two 32-way banks), with flat 2-D head projection:
# vertex at the origin, nose toward +y, left hemisphere x < 0. Radius of
# the 10% ring is 0.8; the below-ring row (P9/P10/Iz) sits at 0.98 so
# every electrode stays inside the unit disc. Coordinates affect
# rendering only; the sign of x and the unit-disc bound are what the
# rest of the package relies on.
_CHANNEL_TABLE = (
    ("Fp1", -0.247214, 0.760845),
    ("AF7", -0.470228, 0.647214),
    ("AF3", -0.235114, 0.623607),
    ("F1", -0.161803, 0.417557),
    ("F3", -0.323607, 0.435114),
    ("F5", -0.48541, 0.452671),
    ("F7", -0.647214, 0.470228),
    ("FT7", -0.760845, 0.247214),
    ("FC5", -0.570634, 0.23541),
    ("FC3", -0.380423, 0.223607),
    ("FC1", -0.190211, 0.211803),
    ("C1", -0.2, 0.0),
    ("C3", -0.4, 0.0),
    ("C5", -0.6, 0.0),
    ("T7", -0.8, 0.0),
    ("TP7", -0.760845, -0.247214),
    ("CP5", -0.570634, -0.23541),
    ("CP3", -0.380423, -0.223607),
    ("CP1", -0.190211, -0.211803),
    ("P1", -0.161803, -0.417557),
    ("P3", -0.323607, -0.435114),
    ("P5", -0.48541, -0.452671),
    ("P7", -0.647214, -0.470228),
    ("P9", -0.792837, -0.57603),
    ("PO7", -0.470228, -0.647214),
    ("PO3", -0.235114, -0.623607),
    ("O1", -0.247214, -0.760845),
    ("Iz", 0.0, -0.98),
    ("Oz", 0.0, -0.8),
    ("POz", 0.0, -0.6),
    ("Pz", 0.0, -0.4),
    ("CPz", 0.0, -0.2),
    ("Fpz", 0.0, 0.8),
    ("Fp2", 0.247214, 0.760845),
    ("AF8", 0.470228, 0.647214),
    ("AF4", 0.235114, 0.623607),
    ("AFz", 0.0, 0.6),
    ("Fz", 0.0, 0.4),
    ("F2", 0.161803, 0.417557),
    ("F4", 0.323607, 0.435114),
    ("F6", 0.48541, 0.452671),
    ("F8", 0.647214, 0.470228),
    ("FT8", 0.760845, 0.247214),
    ("FC6", 0.570634, 0.23541),
    ("FC4", 0.380423, 0.223607),
    ("FC2", 0.190211, 0.211803),
    ("FCz", 0.0, 0.2),
    ("Cz", 0.0, 0.0),
    ("C2", 0.2, 0.0),
    ("C4", 0.4, 0.0),
    ("C6", 0.6, 0.0),
    ("T8", 0.8, 0.0),
    ("TP8", 0.760845, -0.247214),
    ("CP6", 0.570634, -0.23541),
    ("CP4", 0.380423, -0.223607),
    ("CP2", 0.190211, -0.211803),
    ("P2", 0.161803, -0.417557),
    ("P4", 0.323607, -0.435114),
    ("P6", 0.48541, -0.452671),
    ("P8", 0.647214, -0.470228),
    ("P10", 0.792837, -0.57603),
    ("PO8", 0.470228, -0.647214),
    ("PO4", 0.235114, -0.623607),
    ("O2", 0.247214, -0.760845),
)

CHANNEL_LABELS = tuple(row[0] for row in _CHANNEL_TABLE)

# Region rows: group -> (left 4, right 4, midline 4 or None). Oz and Iz
# sit on the positional midline but belong to the right/left occipital
# regions respectively, so region membership is stated explicitly
# rather than derived from coordinates.
_ROI_TABLE = (
    ("prefrontal",
     ("Fp1", "AF7", "AF3", "F1"), ("Fp2", "AF8", "AF4", "F2"), None),
    ("frontal",
     ("F3", "F5", "F7", "FT7"), ("F4", "F6", "F8", "FT8"),
     ("Fpz", "AFz", "Fz", "FCz")),
    ("fronto-central",
     ("FC5", "FC3", "FC1", "C1"), ("FC6", "FC4", "FC2", "C2"), None),
    ("centro-temporal",
     ("C3", "C5", "T7", "TP7"), ("C4", "C6", "T8", "TP8"), None),
    ("parietal1",
     ("CP5", "CP3", "CP1", "P1"), ("CP6", "CP4", "CP2", "P2"),
     ("Cz", "CPz", "Pz", "POz")),
    ("parietal2",
     ("P3", "P5", "P7", "P9"), ("P4", "P6", "P8", "P10"), None),
    ("occipital",
     ("PO7", "PO3", "O1", "Iz"), ("PO8", "PO4", "O2", "Oz"), None),
)

GROUP_NAMES = tuple(row[0] for row in _ROI_TABLE)

_ANTERIOR_GROUPS = frozenset({"prefrontal", "frontal", "fronto-central"})
_POSTERIOR_GROUPS = frozenset({"parietal1", "parietal2", "occipital"})

# Lateral parietal1 regions drop the "1" in their display names.
_REGION_BASENAME = {"parietal1": "parietal"}


@dataclass(frozen=True)
class Channel:
    """One electrode: label, fixed index 0..63, and 2-D head position."""

    label: str
    index: int
    pos2d: tuple[float, float]


@dataclass(frozen=True)
class Roi:
    """One region of interest: 4 channels sharing a scalp neighborhood.

    Attributes
    ----------
    name : str
        Region name, e.g. "left prefrontal" or "midline parietal".
    channels : tuple of str
        The 4 member channel labels.
    hemisphere : str
        "left", "right", or "midline".
    group : str
        Row name shared with the mirrored region, e.g. "prefrontal".
    anteriority : str
        "anterior", "posterior", or "central"; drives the
        anterior-posterior gradient feature.
    """

    name: str
    channels: tuple[str, ...]
    hemisphere: str
    group: str
    anteriority: str


def _anteriority(group: str) -> str:
    if group in _ANTERIOR_GROUPS:
        return "anterior"
    if group in _POSTERIOR_GROUPS:
        return "posterior"
    return "central"


def _build_rois() -> tuple[Roi, ...]:
    rois = []
    for group, left, right, mid in _ROI_TABLE:
        base = _REGION_BASENAME.get(group, group)
        ant = _anteriority(group)
        rois.append(Roi(f"left {base}", left, "left", group, ant))
        rois.append(Roi(f"right {base}", right, "right", group, ant))
        if mid is not None:
            rois.append(Roi(f"midline {base}", mid, "midline", group, ant))
    return tuple(rois)


class MontageDescriptor:
    """The fixed 64-channel montage and its 16-region partition.

    Immutable constant data; safe to share across threads and
    processes. Obtain via :func:`standard_montage`.
    """

    def __init__(self) -> None:
        self.channels = tuple(
            Channel(lab, i, (x, y))
            for i, (lab, x, y) in enumerate(_CHANNEL_TABLE)
        )
        self.rois = _build_rois()
        self._by_label = {c.label: c for c in self.channels}
        self._roi_by_name = {r.name: r for r in self.rois}
        self._roi_of_channel = {}
        for roi in self.rois:
            for lab in roi.channels:
                self._roi_of_channel[lab] = roi

    def channel(self, label: str) -> Channel:
        """Look up a channel by label; raises KeyError if unknown."""
        try:
            return self._by_label[label]
        except KeyError:
            raise KeyError(f"unknown channel label: {label!r}") from None

    def channel_index(self, label: str) -> int:
        """Index of a channel in the fixed montage order."""
        return self.channel(label).index

    def roi(self, name: str) -> Roi:
        """Look up a region by name; raises KeyError if unknown."""
        try:
            return self._roi_by_name[name]
        except KeyError:
            raise KeyError(f"unknown region name: {name!r}") from None

    def roi_of(self, channel_label: str) -> Roi:
        """The unique region containing a channel label.

        Parameters
        ----------
        channel_label : str
            One of the 64 montage labels.

        Returns
        -------
        Roi
            The containing region.

        Raises
        ------
        KeyError
            If the label is not part of the montage.
        """
        try:
            return self._roi_of_channel[channel_label]
        except KeyError:
            raise KeyError(
                f"unknown channel label: {channel_label!r}"
            ) from None

    def roi_channel_indices(self, name: str) -> tuple[int, ...]:
        """Montage indices of a region's 4 channels, in region order."""
        return tuple(self.channel_index(c) for c in self.roi(name).channels)

    def hemisphere_pairs(self) -> list[tuple[Roi, Roi]]:
        """The 7 (left, right) region pairs, one per group row.

        Midline regions have no mirror and never appear in a pair.
        """
        pairs = []
        for group, _left, _right, _mid in _ROI_TABLE:
            base = _REGION_BASENAME.get(group, group)
            pairs.append((self.roi(f"left {base}"), self.roi(f"right {base}")))
        return pairs

    def to_json(self) -> str:
        """Serialize labels, indices, positions, and region membership."""
        doc = {
            "channels": [
                {
                    "label": c.label,
                    "index": c.index,
                    "pos2d": [c.pos2d[0], c.pos2d[1]],
                    "roi": self.roi_of(c.label).name,
                }
                for c in self.channels
            ],
            "rois": [
                {
                    "name": r.name,
                    "channels": list(r.channels),
                    "hemisphere": r.hemisphere,
                    "group": r.group,
                    "anteriority": r.anteriority,
                }
                for r in self.rois
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2)


_MONTAGE = None


def standard_montage() -> MontageDescriptor:
    """The fixed 64-channel, 16-region montage (cached singleton)."""
    global _MONTAGE
    if _MONTAGE is None:
        _MONTAGE = MontageDescriptor()
    return _MONTAGE


ROI_NAMES = tuple(r.name for r in _build_rois())
