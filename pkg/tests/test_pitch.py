import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import sine
from harmovoc.dsp import StftConfig, Waveform
from harmovoc.pitch import F0Contour, PitchConfig, estimate_f0, f0_features, read_f0_csv, write_f0_csv

CFG = StftConfig()


def harmonic(f0, n_harm=4, dur=0.5, sr=22050):
    t = np.arange(int(dur * sr)) / sr
    return 0.3 * sum(np.sin(2 * np.pi * k * f0 * t) / k for k in range(1, n_harm + 1))


def test_sine_220():
    c = estimate_f0(Waveform(sine(220.0)), CFG)
    assert len(c) == 11025 // 256 + 1
    assert c.voiced.mean() >= 0.9
    assert np.median(np.abs(c.f0_hz[c.voiced] - 220.0)) <= 3.0


def test_silence_unvoiced():
    c = estimate_f0(Waveform(np.zeros(11025)), CFG)
    assert not c.voiced.any() and not c.f0_hz.any()


def test_white_noise_mostly_unvoiced():
    y = 0.3 * np.random.default_rng(7).standard_normal(11025)
    c = estimate_f0(Waveform(y), CFG)
    assert (~c.voiced).mean() >= 0.8


def test_contour_rejects_f0_on_unvoiced():
    with pytest.raises(ValueError):
        F0Contour(np.array([100.0, 5.0]), np.array([True, False]))


def test_rate_mismatch_and_short_input():
    with pytest.raises(ValueError):
        estimate_f0(Waveform(sine(220.0, sr=44100), 44100), CFG)
    with pytest.raises(ValueError):
        estimate_f0(Waveform(np.ones(100)), CFG)


def test_invalid_pitch_config():
    with pytest.raises(ValueError):
        estimate_f0(Waveform(sine(220.0)), CFG, PitchConfig(f0_floor=600.0, f0_ceil=500.0))


def test_features():
    c = F0Contour(np.array([0.0, 60.0, 240.0, 1000.0]), np.array([False, True, True, True]))
    f = f0_features(c)
    np.testing.assert_array_equal(f[0], [0.0, 0.0])
    np.testing.assert_array_equal(f[1], [1.0, 0.0])
    assert f[2, 1] == pytest.approx(np.log2(4) / np.log2(500 / 60), abs=1e-12)
    assert f[2, 1] == pytest.approx(0.6542, abs=5e-4)
    assert f[3, 1] == 1.0


@pytest.mark.parametrize("g", [0.1, 0.35, 1.0])
def test_amplitude_invariance(g):
    y = harmonic(180.0)
    a = estimate_f0(Waveform(y), CFG)
    b = estimate_f0(Waveform(g * y), CFG)
    np.testing.assert_array_equal(a.voiced, b.voiced)
    assert np.max(np.abs(a.f0_hz - b.f0_hz)) <= 0.1


@given(st.floats(80.0, 400.0), st.integers(3, 6))
def test_octave_sanity(f0, n_harm):
    c = estimate_f0(Waveform(harmonic(f0, n_harm)), CFG)
    v = c.f0_hz[c.voiced]
    assert v.size > 0
    bad = np.mean((v < 0.9 * f0) | (v > 1.1 * f0))
    assert bad < 0.1


def test_deterministic():
    y = Waveform(harmonic(150.0))
    a, b = estimate_f0(y, CFG), estimate_f0(y, CFG)
    assert a.f0_hz.tobytes() == b.f0_hz.tobytes()


def test_csv_round_trip(tmp_path):
    c = F0Contour(np.array([0.0, 123.456789, 200.0]), np.array([False, True, True]))
    write_f0_csv(tmp_path / "x.csv", c)
    assert (tmp_path / "x.csv").read_text().splitlines()[0] == "frame,f0_hz,voiced"
    r = read_f0_csv(tmp_path / "x.csv")
    np.testing.assert_array_equal(r.f0_hz, c.f0_hz)
    np.testing.assert_array_equal(r.voiced, c.voiced)
