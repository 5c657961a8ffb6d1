import numpy as np
import pytest

from attnshift.spectral import (
    BANDS,
    BAND_NAMES,
    BandDef,
    StftConfig,
    band_power,
    read_bandpower,
    stft_power,
    time_avg_topography,
    write_bandpower,
)

FS = 256.0


def test_band_definitions():
    edges = {(b.name, b.lo_hz, b.hi_hz) for b in BANDS}
    assert edges == {
        ("theta", 4.0, 7.0),
        ("alpha", 8.0, 12.0),
        ("lowbeta", 13.0, 20.0),
        ("highbeta", 20.0, 30.0),
        ("gamma", 30.0, 40.0),
    }
    assert BAND_NAMES == ("theta", "alpha", "lowbeta", "highbeta", "gamma")


@pytest.mark.parametrize(
    "n,window_s,hop_s,expected",
    [
        (384, 0.25, 0.125, 11),
        (384, 0.25, 0.25, 6),
        (512, 0.25, 0.125, 15),
        (160, 0.25, 0.0625, 7),
        (257, 0.25, 0.125, 7),
    ],
)
def test_frame_count_formula(n, window_s, hop_s, expected):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((2, n))
    cfg = StftConfig(window_s=window_s, hop_s=hop_s)
    t = band_power(data, FS, cfg)
    w = int(round(window_s * FS))
    hop = int(round(hop_s * FS))
    assert t.n_frames == (n - w) // hop + 1 == expected
    assert t.values.shape == (5, 2, expected)


def test_pure_alpha_sinusoid_dominates():
    t = np.arange(384) / FS
    x = np.sin(2 * np.pi * 10.0 * t)[None, :]
    tensor = band_power(x, FS)
    alpha = tensor.values[tensor.band_index("alpha"), 0]
    for name in ("theta", "lowbeta", "highbeta", "gamma"):
        other = tensor.values[tensor.band_index(name), 0]
        assert np.all(alpha > 10.0 * other)


def test_zero_signal_is_exactly_zero():
    tensor = band_power(np.zeros((64, 384)), FS)
    assert np.all(tensor.values == 0.0)


def test_parseval_total_power_matches_windowed_mean_square():
    # independent route: time-domain mean square of each windowed frame
    rng = np.random.default_rng(3)
    data = rng.standard_normal((4, 384))
    power, _ = stft_power(data, FS)
    w, hop = 64, 32
    hann = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(w) / w)
    for ch in range(4):
        for f in range(power.shape[1]):
            frame = data[ch, f * hop : f * hop + w] * hann
            ms = np.mean(frame * frame)
            total = power[ch, f].sum()
            assert abs(total - ms) <= 0.05 * ms


def test_power_scales_quadratically():
    rng = np.random.default_rng(4)
    data = rng.standard_normal((8, 384))
    t1 = band_power(data, FS)
    t3 = band_power(3.0 * data, FS)
    assert np.allclose(t3.values, 9.0 * t1.values, rtol=1e-9, atol=0.0)


def test_all_values_nonnegative():
    rng = np.random.default_rng(5)
    tensor = band_power(rng.standard_normal((64, 384)), FS)
    assert np.all(tensor.values >= 0.0)


def test_frame_times_inside_analysis_window():
    rng = np.random.default_rng(6)
    tensor = band_power(rng.standard_normal((2, 384)), FS)
    assert tensor.n_frames == 11
    assert np.all(tensor.frame_times >= -2.0)
    assert np.all(tensor.frame_times <= -0.5)
    assert np.all(np.diff(tensor.frame_times) > 0)


def test_topography_constant_and_single_frame():
    rng = np.random.default_rng(7)
    tensor = band_power(rng.standard_normal((64, 384)), FS)
    const = tensor.values.copy()
    const[:] = 2.5
    flat = type(tensor)(
        const, tensor.frame_times, tensor.fs, tensor.window_samples, tensor.hop_samples
    )
    assert np.all(time_avg_topography(flat, "alpha") == 2.5)
    one = type(tensor)(
        tensor.values[:, :, :1],
        tensor.frame_times[:1],
        tensor.fs,
        tensor.window_samples,
        tensor.hop_samples,
    )
    # a single-frame mean is that frame itself; slicing keeps 3 frames
    # out of contract here so build the object directly
    np.testing.assert_array_equal(
        time_avg_topography(one, "gamma"), tensor.values[4, :, 0]
    )


def test_topography_matches_two_loop_oracle():
    rng = np.random.default_rng(8)
    tensor = band_power(rng.standard_normal((64, 384)), FS)
    got = time_avg_topography(tensor, "theta")
    bi = tensor.band_index("theta")
    for ch in range(64):
        acc = 0.0
        for f in range(tensor.n_frames):
            acc += tensor.values[bi, ch, f]
        assert abs(got[ch] - acc / tensor.n_frames) <= 1e-12


def test_unknown_band_rejected():
    rng = np.random.default_rng(9)
    tensor = band_power(rng.standard_normal((2, 384)), FS)
    with pytest.raises(KeyError):
        time_avg_topography(tensor, "delta")


def test_band_above_nyquist_rejected():
    data = np.zeros((2, 384))
    with pytest.raises(ValueError, match="Nyquist"):
        band_power(data, 64.0)


def test_short_segment_rejected():
    with pytest.raises(ValueError, match="too short"):
        band_power(np.zeros((2, 32)), FS)
    with pytest.raises(ValueError, match="at least 3"):
        band_power(np.zeros((2, 70)), FS)


def test_bandpower_file_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    tensor = band_power(rng.standard_normal((64, 384)), FS)
    path = tmp_path / "t.bpw"
    write_bandpower(path, tensor)
    back = read_bandpower(path)
    np.testing.assert_array_equal(back.values, tensor.values)
    np.testing.assert_array_equal(back.frame_times, tensor.frame_times)
    assert back.fs == tensor.fs
    assert back.band_names == tensor.band_names
    assert (back.window_samples, back.hop_samples) == (64, 32)


def test_bandpower_file_bad_magic(tmp_path):
    path = tmp_path / "bad.bpw"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError, match="bad magic"):
        read_bandpower(path)


def test_bandpower_file_truncated(tmp_path):
    rng = np.random.default_rng(11)
    tensor = band_power(rng.standard_normal((4, 384)), FS)
    path = tmp_path / "t.bpw"
    write_bandpower(path, tensor)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(ValueError, match="expected"):
        read_bandpower(path)


def test_custom_band_with_no_bins_rejected():
    data = np.zeros((2, 384))
    with pytest.raises(ValueError, match="no FFT bins"):
        band_power(data, FS, bands=(BandDef("sliver", 5.0, 6.0),))
