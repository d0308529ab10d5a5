import numpy as np
import pytest

from harmovoc.config import ConfigError, RunConfig, load_config, parse_config
from harmovoc.dsp import Waveform
from harmovoc.errors import WavFormatError
from harmovoc.wavio import read_wav, write_wav


def test_defaults():
    c = parse_config("")
    assert c == RunConfig()
    assert c.model.F == 513 and c.train.lr == 2e-4


def test_parse_values():
    c = parse_config("""
    # comment
    stft.fft_size = 512
    stft.win_size = 512   # trailing
    stft.hop = 128
    model.d = 16
    train.steps = 7
    loss.lambda_adv = 0
    pitch.voicing_threshold = 0.5
    mrstft.resolutions = 256:64:256, 512:128:512
    """)
    assert c.stft.fft_size == 512 and c.model.F == 257 and c.model.d == 16
    assert c.train.steps == 7 and c.loss.lambda_adv == 0.0
    assert c.train.stft == c.stft and c.train.pitch.voicing_threshold == 0.5
    assert c.mrstft.resolutions == ((256, 64, 256), (512, 128, 512))


@pytest.mark.parametrize("text", ["foo.bar = 1", "model.nope = 1", "model.d = x", "model.d",
                                  "stft.hop = 4096", "model.F = 100", "mrstft.resolutions = 1:2",
                                  "stft.center = maybe"])
def test_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_missing(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.cfg")


def test_wav_round_trip(tmp_path, rng):
    y = Waveform(rng.uniform(-0.9, 0.9, 1000))
    write_wav(tmp_path / "f.wav", y)
    r = read_wav(tmp_path / "f.wav", 22050)
    np.testing.assert_array_equal(r.samples, y.samples.astype(np.float32))
    write_wav(tmp_path / "i.wav", y, "pcm16")
    r = read_wav(tmp_path / "i.wav")
    assert np.max(np.abs(r.samples - y.samples)) <= 1 / 32768


def test_wav_errors(tmp_path):
    from scipy.io import wavfile
    wavfile.write(tmp_path / "s.wav", 22050, np.zeros((10, 2), np.int16))
    with pytest.raises(WavFormatError):
        read_wav(tmp_path / "s.wav")
    wavfile.write(tmp_path / "d.wav", 22050, np.zeros(10, np.float64))
    with pytest.raises(WavFormatError):
        read_wav(tmp_path / "d.wav")
    write_wav(tmp_path / "r.wav", Waveform(np.zeros(10), 44100))
    with pytest.raises(WavFormatError):
        read_wav(tmp_path / "r.wav", 22050)
    (tmp_path / "junk.wav").write_bytes(b"not a wav")
    with pytest.raises(WavFormatError):
        read_wav(tmp_path / "junk.wav")
