"""Band-power time series from raw trial segments.

Each 64-channel trial segment is short-time Fourier transformed with a
Hann window (default 0.25 s window, 0.125 s hop) and reduced to five
canonical band-power series: theta 4-7, alpha 8-12, low beta 13-20,
high beta 20-30, and gamma 30-40 Hz. Per-bin powers are normalized so
that their sum over the full 0..Nyquist range equals the mean square of
the windowed frame; the band value is the mean over bins whose center
frequency falls in the half-open interval [lo, hi), so shared edges
(e.g. 20 Hz) are counted once.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BandDef",
    "StftConfig",
    "BandPowerTensor",
    "BANDS",
    "BAND_NAMES",
    "SEGMENT_START_S",
    "stft_power",
    "band_power",
    "time_avg_topography",
    "write_bandpower",
    "read_bandpower",
]


@dataclass(frozen=True)
class BandDef:
    """A named frequency band with edges in Hz (half-open [lo, hi))."""

    name: str
    lo_hz: float
    hi_hz: float


BANDS = (
    BandDef("theta", 4.0, 7.0),
    BandDef("alpha", 8.0, 12.0),
    BandDef("lowbeta", 13.0, 20.0),
    BandDef("highbeta", 20.0, 30.0),
    BandDef("gamma", 30.0, 40.0),
)

BAND_NAMES = tuple(b.name for b in BANDS)

# analysis segment covers -2.0 s .. -0.5 s relative to the shift onset
SEGMENT_START_S = -2.0


@dataclass(frozen=True)
class StftConfig:
    """Short-time Fourier transform parameters in seconds."""

    window_s: float = 0.25
    hop_s: float = 0.125


DEFAULT_STFT = StftConfig()


@dataclass(frozen=True)
class BandPowerTensor:
    """Band-power series for one trial.

    Attributes
    ----------
    values : ndarray
        Shape (5 bands, 64 channels, F frames), all entries >= 0.
    frame_times : ndarray
        Frame-center times in seconds relative to the shift onset.
    fs : float
        Sampling rate of the source segment in Hz.
    window_samples, hop_samples : int
        STFT parameters actually used, in samples.
    band_names : tuple of str
        Band order of axis 0.
    """

    values: np.ndarray
    frame_times: np.ndarray
    fs: float
    window_samples: int
    hop_samples: int
    band_names: tuple[str, ...] = BAND_NAMES

    @property
    def n_frames(self) -> int:
        return self.values.shape[2]

    def band_index(self, band: str) -> int:
        try:
            return self.band_names.index(band)
        except ValueError:
            raise KeyError(f"unknown band name: {band!r}") from None


def _hann(n: int) -> np.ndarray:
    # periodic Hann window
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _window_params(fs: float, cfg: StftConfig) -> tuple[int, int]:
    w = int(round(cfg.window_s * fs))
    hop = int(round(cfg.hop_s * fs))
    if w < 2 or hop < 1:
        raise ValueError(
            f"degenerate STFT config: window {w} samples, hop {hop} samples"
        )
    return w, hop


def stft_power(
    data: np.ndarray, fs: float, cfg: StftConfig = DEFAULT_STFT
) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame, per-bin spectral power for every channel.

    Parameters
    ----------
    data : ndarray
        Channels x samples segment; samples >= window length.
    fs : float
        Sampling rate in Hz.
    cfg : StftConfig
        Window and hop lengths in seconds.

    Returns
    -------
    power : ndarray
        Shape (channels, F, bins). Bin powers are normalized so the sum
        over all bins equals the mean square of the Hann-windowed frame
        (one-sided spectrum with doubled interior bins).
    freqs : ndarray
        Bin center frequencies in Hz, 0..fs/2.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"expected 2-D channels x samples data, got {data.ndim}-D")
    n = data.shape[1]
    w, hop = _window_params(fs, cfg)
    if n < w:
        raise ValueError(f"segment too short: {n} samples < window {w}")
    frames = np.lib.stride_tricks.sliding_window_view(data, w, axis=1)[:, ::hop, :]
    spec = np.fft.rfft(frames * _hann(w), axis=2)
    scale = np.full(spec.shape[2], 2.0)
    scale[0] = 1.0
    if w % 2 == 0:
        scale[-1] = 1.0
    power = (spec.real**2 + spec.imag**2) * (scale / (w * w))
    freqs = np.fft.rfftfreq(w, 1.0 / fs)
    return power, freqs


def band_power(
    trial_data: np.ndarray,
    fs: float,
    cfg: StftConfig = DEFAULT_STFT,
    t_start: float = SEGMENT_START_S,
    bands: tuple[BandDef, ...] = BANDS,
) -> BandPowerTensor:
    """Reduce a trial segment to its five band-power time series.

    Parameters
    ----------
    trial_data : ndarray
        Channels x samples segment.
    fs : float
        Sampling rate in Hz; must cover the highest band edge (Nyquist).
    cfg : StftConfig
        STFT window/hop in seconds.
    t_start : float
        Segment start time in seconds relative to the shift onset.
    bands : tuple of BandDef
        Band definitions; each value is the mean bin power over bins
        with center frequency in [lo, hi).

    Returns
    -------
    BandPowerTensor
        values shaped (n_bands, channels, F) with
        F = floor((N - W) / hop) + 1 >= 3.
    """
    for b in bands:
        if b.hi_hz > fs / 2.0:
            raise ValueError(
                f"band {b.name} upper edge {b.hi_hz} Hz exceeds Nyquist {fs / 2.0} Hz"
            )
    power, freqs = stft_power(trial_data, fs, cfg)
    w, hop = _window_params(fs, cfg)
    n_frames = power.shape[1]
    if n_frames < 3:
        raise ValueError(
            f"segment yields only {n_frames} frames; at least 3 required "
            f"(need N >= {w + 2 * hop} samples)"
        )
    out = np.empty((len(bands), power.shape[0], n_frames))
    for i, b in enumerate(bands):
        mask = (freqs >= b.lo_hz) & (freqs < b.hi_hz)
        if not mask.any():
            raise ValueError(
                f"band {b.name} [{b.lo_hz}, {b.hi_hz}) Hz captures no FFT bins "
                f"at resolution {fs / w} Hz"
            )
        out[i] = power[:, :, mask].mean(axis=2)
    starts = np.arange(n_frames) * hop
    frame_times = t_start + (starts + w / 2.0) / fs
    return BandPowerTensor(out, frame_times, float(fs), w, hop, tuple(b.name for b in bands))


def time_avg_topography(tensor: BandPowerTensor, band: str) -> np.ndarray:
    """Per-channel mean power over frames for one band (64-vector)."""
    return tensor.values[tensor.band_index(band)].mean(axis=1)


_BPW_MAGIC = b"BPW1"


def write_bandpower(path, tensor: BandPowerTensor) -> None:
    """Dump one tensor to a binary debugging file (magic "BPW1")."""
    vals = np.ascontiguousarray(tensor.values, dtype=np.float64)
    times = np.ascontiguousarray(tensor.frame_times, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(_BPW_MAGIC)
        fh.write(struct.pack("<HHHI", 1, vals.shape[0], vals.shape[1], vals.shape[2]))
        fh.write(struct.pack("<dII", tensor.fs, tensor.window_samples, tensor.hop_samples))
        for name in tensor.band_names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(vals.tobytes())
        fh.write(times.tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    buf = fh.read(count)
    if len(buf) != count:
        raise ValueError(
            f"truncated band-power file at {what}: expected {count} bytes, got {len(buf)}"
        )
    return buf


def read_bandpower(path) -> BandPowerTensor:
    """Read a tensor written by :func:`write_bandpower`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _BPW_MAGIC:
            raise ValueError(f"bad magic: expected {_BPW_MAGIC!r}, got {magic!r}")
        version, n_bands, n_channels, n_frames = struct.unpack(
            "<HHHI", _read_exact(fh, 10, "header")
        )
        if version != 1:
            raise ValueError(f"unsupported band-power file version: {version}")
        fs, w, hop = struct.unpack("<dII", _read_exact(fh, 16, "stft params"))
        names = []
        for i in range(n_bands):
            (length,) = struct.unpack("<H", _read_exact(fh, 2, f"band name {i}"))
            names.append(_read_exact(fh, length, f"band name {i}").decode("utf-8"))
        count = n_bands * n_channels * n_frames
        vals = np.frombuffer(
            _read_exact(fh, count * 8, "values"), dtype="<f8"
        ).reshape(n_bands, n_channels, n_frames)
        times = np.frombuffer(_read_exact(fh, n_frames * 8, "frame times"), dtype="<f8")
    return BandPowerTensor(vals.copy(), times.copy(), fs, w, hop, tuple(names))
