"""Synthetic multi-subject EEG trial sets with controllable separability.

Each trial is a sum of per-channel pink noise, a 10 Hz rhythm shared by
all channels, and one band-limited noise component per frequency band.
Every subject draws a private signature of (region, band, sign) triples;
within signature regions the matching band component is scaled by
(1 + sign*delta) on self-initiated (TCSI) trials and (1 - sign*delta)
on instructed (EI) trials. Signatures are independent across subjects,
so cross-subject transfer carries no class information by construction
(an optional shared-signature mode inverts that for positive controls).
Generation is a pure function of the config.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .montage import ROI_NAMES, standard_montage
from .spectral import BANDS, BAND_NAMES

__all__ = [
    "GenConfig",
    "TrialSet",
    "LABEL_EI",
    "LABEL_TCSI",
    "generate",
    "write_trialset",
    "read_trialset",
    "write_dataset",
    "read_dataset",
]

LABEL_EI = 0
LABEL_TCSI = 1

# component amplitudes (root-mean-square, arbitrary microvolt-like units)
PINK_AMP = 10.0
RHYTHM_AMP = 4.0
BAND_AMP = 3.0
RHYTHM_HZ = 10.0


@dataclass(frozen=True)
class GenConfig:
    """Generator parameters.

    Attributes
    ----------
    n_subjects : int
        Number of synthetic participants.
    trials_min, trials_max : int
        Per-subject trial count is drawn uniformly from this range.
    class_balance : float
        Target fraction of TCSI trials; the realized count is clamped
        so both classes keep at least 2 trials.
    fs : float
        Sampling rate in Hz; must exceed 80 so 40 Hz stays below Nyquist.
    duration_s : float
        Segment length in seconds (the -2.0 s .. -0.5 s window).
    delta : float
        Separability: signature band amplitudes scale by (1 +- delta).
    signature_size : int
        Number of distinct (region, band) pairs per subject signature.
    seed : int
        Root RNG seed; generation is deterministic given the config.
    shared_signature : bool
        Give every subject the same signature (cross-subject positive
        control) instead of independent private ones.
    """

    n_subjects: int = 15
    trials_min: int = 40
    trials_max: int = 120
    class_balance: float = 0.5
    fs: float = 256.0
    duration_s: float = 1.5
    delta: float = 0.3
    signature_size: int = 4
    seed: int = 0
    shared_signature: bool = False

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.fs))

    def validate(self) -> None:
        if self.n_subjects < 1:
            raise ValueError(f"n_subjects must be >= 1, got {self.n_subjects}")
        if not 4 <= self.trials_min <= self.trials_max:
            raise ValueError(
                f"trial range must satisfy 4 <= min <= max, got "
                f"{self.trials_min}..{self.trials_max}"
            )
        if not 0.0 <= self.class_balance <= 1.0:
            raise ValueError(
                f"class_balance must lie in [0, 1], got {self.class_balance}"
            )
        if self.fs <= 2 * BANDS[-1].hi_hz:
            raise ValueError(
                f"fs must exceed {2 * BANDS[-1].hi_hz} Hz to cover the "
                f"{BANDS[-1].name} band, got {self.fs}"
            )
        if abs(self.duration_s * self.fs - round(self.duration_s * self.fs)) > 1e-6:
            raise ValueError(
                f"duration_s * fs must be an integer sample count, got "
                f"{self.duration_s * self.fs}"
            )
        if self.delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if not 1 <= self.signature_size <= len(ROI_NAMES) * len(BAND_NAMES):
            raise ValueError(
                f"signature_size must lie in 1..{len(ROI_NAMES) * len(BAND_NAMES)}, "
                f"got {self.signature_size}"
            )


@dataclass(eq=False)
class TrialSet:
    """All trials of one subject.

    `data` is (n_trials, 64, n_samples) float32 in montage channel
    order; `labels` is (n_trials,) uint8 with 0 = EI and 1 = TCSI.
    `signature` is generation-side ground truth (region, band, sign)
    and is not part of the serialized payload.
    """

    subject_id: str
    labels: np.ndarray
    data: np.ndarray
    fs: float
    signature: tuple[tuple[str, str, int], ...] | None = field(default=None)

    @property
    def n_trials(self) -> int:
        return int(self.labels.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrialSet):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and float(self.fs) == float(other.fs)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.data, other.data)
        )


def _unit_power_filters(n: int, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """Spectral filters with unit expected mean-square output.

    Returns the pink filter (1/sqrt(f), flat below 1 Hz) and the five
    brick-wall band filters, each scaled so filtered standard white
    noise has expected mean square 1.
    """
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    weight = np.full(freqs.shape, 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0

    def normalized(shape: np.ndarray) -> np.ndarray:
        ms = float((weight * shape * shape).sum()) / n
        return shape / np.sqrt(ms)

    pink = normalized(1.0 / np.sqrt(np.maximum(freqs, 1.0)))
    bands = np.stack(
        [
            normalized(((freqs >= b.lo_hz) & (freqs < b.hi_hz)).astype(np.float64))
            for b in BANDS
        ]
    )
    return pink, bands


def _draw_signature(
    rng: np.random.Generator, size: int
) -> tuple[tuple[str, str, int], ...]:
    n_pairs = len(ROI_NAMES) * len(BAND_NAMES)
    pairs = rng.choice(n_pairs, size=size, replace=False)
    signs = rng.integers(0, 2, size=size) * 2 - 1
    return tuple(
        (ROI_NAMES[p // len(BAND_NAMES)], BAND_NAMES[p % len(BAND_NAMES)], int(s))
        for p, s in zip(pairs, signs)
    )


def _signature_scales(
    signature: tuple[tuple[str, str, int], ...], delta: float
) -> dict[int, np.ndarray]:
    """Per-label (5 bands x 64 channels) amplitude scale matrices."""
    mont = standard_montage()
    scales = {
        LABEL_EI: np.ones((len(BAND_NAMES), 64)),
        LABEL_TCSI: np.ones((len(BAND_NAMES), 64)),
    }
    for roi_name, band_name, sign in signature:
        bi = BAND_NAMES.index(band_name)
        idx = list(mont.roi_channel_indices(roi_name))
        scales[LABEL_TCSI][bi, idx] = 1.0 + sign * delta
        scales[LABEL_EI][bi, idx] = 1.0 - sign * delta
    return scales


def _generate_subject(
    seq: np.random.SeedSequence,
    subject_id: str,
    cfg: GenConfig,
    signature: tuple[tuple[str, str, int], ...] | None,
) -> TrialSet:
    rng = np.random.default_rng(seq)
    n = int(rng.integers(cfg.trials_min, cfg.trials_max + 1))
    n_tcsi = min(max(int(round(cfg.class_balance * n)), 2), n - 2)
    labels = np.zeros(n, dtype=np.uint8)
    labels[:n_tcsi] = LABEL_TCSI
    labels = labels[rng.permutation(n)]
    if signature is None:
        signature = _draw_signature(rng, cfg.signature_size)

    n_samples = cfg.n_samples
    pink_f, band_f = _unit_power_filters(n_samples, cfg.fs)
    scales = _signature_scales(signature, cfg.delta)
    t = np.arange(n_samples) / cfg.fs

    data = np.empty((n, 64, n_samples), dtype=np.float32)
    for i in range(n):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        pink_white = rng.standard_normal((64, n_samples))
        band_white = rng.standard_normal((len(BAND_NAMES), 64, n_samples))
        pink = np.fft.irfft(np.fft.rfft(pink_white, axis=1) * pink_f, n=n_samples, axis=1)
        comps = np.fft.irfft(
            np.fft.rfft(band_white, axis=2) * band_f[:, None, :], n=n_samples, axis=2
        )
        rhythm = np.sin(2.0 * np.pi * RHYTHM_HZ * t + phase)
        scale = scales[int(labels[i])]
        trial = (
            PINK_AMP * pink
            + RHYTHM_AMP * rhythm
            + BAND_AMP * np.einsum("bcs,bc->cs", comps, scale)
        )
        data[i] = trial.astype(np.float32)
    return TrialSet(subject_id, labels, data, float(cfg.fs), signature)


def generate(cfg: GenConfig) -> list[TrialSet]:
    """Generate one TrialSet per subject, deterministically from cfg.

    Parameters
    ----------
    cfg : GenConfig
        Validated generator parameters.

    Returns
    -------
    list of TrialSet
        cfg.n_subjects trial sets with independent RNG streams.
    """
    cfg.validate()
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.n_subjects + 1)
    shared = None
    if cfg.shared_signature:
        shared = _draw_signature(np.random.default_rng(children[-1]), cfg.signature_size)
    width = max(2, len(str(cfg.n_subjects)))
    return [
        _generate_subject(children[i], f"S{i + 1:0{width}d}", cfg, shared)
        for i in range(cfg.n_subjects)
    ]


_EEGB_MAGIC = b"EEGB"


def write_trialset(path, ts: TrialSet) -> None:
    """Write one subject's trials in the EEGB binary format."""
    n, n_channels, n_samples = ts.data.shape
    sid = ts.subject_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_EEGB_MAGIC)
        fh.write(struct.pack("<H", 1))
        fh.write(struct.pack("<IHI", n, n_channels, n_samples))
        fh.write(struct.pack("<f", ts.fs))
        fh.write(struct.pack("<H", len(sid)))
        fh.write(sid)
        for i in range(n):
            fh.write(struct.pack("<B", int(ts.labels[i])))
            fh.write(np.ascontiguousarray(ts.data[i], dtype="<f4").tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    buf = fh.read(count)
    if len(buf) != count:
        raise ValueError(
            f"truncated trial file at {what}: expected {count} bytes, got {len(buf)}"
        )
    return buf


def read_trialset(path) -> TrialSet:
    """Read an EEGB file back into a TrialSet (bit-exact round trip)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _EEGB_MAGIC:
            raise ValueError(f"bad magic: expected {_EEGB_MAGIC!r}, got {magic!r}")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
        if version != 1:
            raise ValueError(f"unsupported trial file version: {version}")
        n, n_channels, n_samples = struct.unpack("<IHI", _read_exact(fh, 10, "shape"))
        (fs,) = struct.unpack("<f", _read_exact(fh, 4, "fs"))
        (sid_len,) = struct.unpack("<H", _read_exact(fh, 2, "subject id length"))
        sid = _read_exact(fh, sid_len, "subject id").decode("utf-8")
        labels = np.empty(n, dtype=np.uint8)
        data = np.empty((n, n_channels, n_samples), dtype=np.float32)
        frame_bytes = n_channels * n_samples * 4
        for i in range(n):
            (label,) = struct.unpack("<B", _read_exact(fh, 1, f"trial {i} label"))
            if label not in (LABEL_EI, LABEL_TCSI):
                raise ValueError(f"trial {i} has invalid label byte {label}")
            labels[i] = label
            data[i] = np.frombuffer(
                _read_exact(fh, frame_bytes, f"trial {i} data"), dtype="<f4"
            ).reshape(n_channels, n_samples)
        trailing = fh.read(1)
        if trailing:
            raise ValueError("trial file has trailing bytes past the declared payload")
    return TrialSet(sid, labels, data, float(fs))


def write_dataset(directory, trialsets: list[TrialSet], cfg: GenConfig | None = None) -> Path:
    """Write per-subject EEGB files plus a JSON manifest; returns manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for ts in trialsets:
        fname = f"{ts.subject_id}.eegb"
        write_trialset(directory / fname, ts)
        entries.append(
            {
                "subject_id": ts.subject_id,
                "file": fname,
                "n_trials": ts.n_trials,
                "n_channels": int(ts.data.shape[1]),
                "n_samples": int(ts.data.shape[2]),
                "fs": float(ts.fs),
            }
        )
    manifest = {
        "format": "EEGB",
        "version": 1,
        "subjects": entries,
        "gen_config": asdict(cfg) if cfg is not None else None,
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def read_dataset(directory) -> list[TrialSet]:
    """Read every subject listed in a dataset directory's manifest."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in {directory}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != "EEGB":
        raise ValueError(f"unrecognized dataset format: {manifest.get('format')!r}")
    return [read_trialset(directory / e["file"]) for e in manifest["subjects"]]
