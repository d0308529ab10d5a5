"""STFT analysis, overlap-add synthesis, and mel / cepstral transforms.

Everything here is float64 and pure.  The adjoint routines
(:func:`stft_adjoint`, :func:`istft_adjoint`) back-propagate a gradient
through the corresponding linear map and are used by the losses.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from .errors import NumericDegenerateError
from .kernels import overlap_add

LOG_EPS = 1e-10


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 1024
    win_size: int = 1024
    hop: int = 256
    window: str = "periodic_hann"
    center: bool = True
    sample_rate: int = 22050

    def __post_init__(self):
        if not (1 <= self.hop <= self.win_size <= self.fft_size):
            raise ValueError(
                f"need 1 <= hop <= win_size <= fft_size, got {self.hop}/{self.win_size}/{self.fft_size}")
        if self.fft_size % 2:
            raise ValueError("fft_size must be even")
        if self.window != "periodic_hann":
            raise ValueError(f"unsupported window {self.window!r}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def pad(self) -> int:
        return self.fft_size // 2 if self.center else 0

    def n_frames(self, n_samples: int) -> int:
        if self.center:
            return n_samples // self.hop + 1
        return (n_samples - self.fft_size) // self.hop + 1


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = 22050

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("waveform must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.size


@dataclass
class ComplexSpectrogram:
    real: np.ndarray
    imag: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        self.real = np.asarray(self.real, dtype=np.float64)
        self.imag = np.asarray(self.imag, dtype=np.float64)
        if self.real.shape != self.imag.shape or self.real.ndim != 2:
            raise ValueError(f"real/imag shape mismatch: {self.real.shape} vs {self.imag.shape}")
        if self.real.shape[1] != self.config.n_bins:
            raise ValueError(f"expected {self.config.n_bins} bins, got {self.real.shape[1]}")

    @classmethod
    def from_complex(cls, z: np.ndarray, config: StftConfig) -> ComplexSpectrogram:
        return cls(z.real.copy(), z.imag.copy(), config)

    @property
    def shape(self):
        return self.real.shape

    def to_complex(self) -> np.ndarray:
        return self.real + 1j * self.imag

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.real, self.imag)


@dataclass
class MelFilterbank:
    weights: np.ndarray
    f_min: float
    f_max: float


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window, ``w[k] = 0.5 (1 - cos(2 pi k / n))``."""
    if n < 1:
        raise ValueError("window length must be >= 1")
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


@lru_cache(maxsize=32)
def _analysis_window(cfg: StftConfig) -> np.ndarray:
    # window centred inside the FFT frame when win_size < fft_size
    w = np.zeros(cfg.fft_size)
    start = (cfg.fft_size - cfg.win_size) // 2
    w[start:start + cfg.win_size] = hann_window(cfg.win_size)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=64)
def _pad_index(n: int, pad: int) -> np.ndarray:
    if n == 1:
        idx = np.zeros(n + 2 * pad, dtype=np.int64)
    else:
        idx = np.pad(np.arange(n), pad, mode="reflect")
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=64)
def _window_sum(cfg: StftConfig, n_frames: int) -> np.ndarray:
    w2 = _analysis_window(cfg) ** 2
    total = cfg.fft_size + (n_frames - 1) * cfg.hop
    out = overlap_add(np.tile(w2, (n_frames, 1)), cfg.hop, total)
    out.setflags(write=False)
    return out


def _as_samples(y) -> np.ndarray:
    if isinstance(y, Waveform):
        return y.samples
    return np.asarray(y, dtype=np.float64)


def frames_of(x: np.ndarray, n: int, hop: int, n_frames: int) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(x, n)[::hop]
    return view[:n_frames]


def _padded(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    if not cfg.center:
        return x
    return x[_pad_index(x.size, cfg.pad)]


def stft_complex(y, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """One-sided STFT as a complex ``(T, F)`` array."""
    x = _as_samples(y)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("signal must be a non-empty 1-D sequence")
    if not cfg.center and x.size < max(2, cfg.fft_size):
        raise ValueError(f"signal of {x.size} samples too short for uncentred framing")
    xp = _padded(x, cfg)
    n_frames = cfg.n_frames(x.size)
    fr = frames_of(xp, cfg.fft_size, cfg.hop, n_frames) * _analysis_window(cfg)
    return np.fft.rfft(fr, axis=1)


def stft(y, cfg: StftConfig = StftConfig()) -> ComplexSpectrogram:
    return ComplexSpectrogram.from_complex(stft_complex(y, cfg), cfg)


def _synth_norm(cfg: StftConfig, n_frames: int, out_len: int) -> tuple[np.ndarray, slice]:
    wsum = _window_sum(cfg, n_frames)
    region = slice(cfg.pad, cfg.pad + out_len)
    denom = wsum[region]
    if denom.size < out_len or np.any(denom < 1e-12):
        raise NumericDegenerateError(
            "window-square overlap sum vanishes inside the output region; framing is not COLA")
    return denom, region


def istft_samples(z: np.ndarray, cfg: StftConfig, out_len: int) -> np.ndarray:
    """Inverse of :func:`stft_complex` for a complex ``(T, F)`` array."""
    n_frames = z.shape[0]
    denom, region = _synth_norm(cfg, n_frames, out_len)
    fr = np.fft.irfft(z, cfg.fft_size, axis=1) * _analysis_window(cfg)
    total = cfg.fft_size + (n_frames - 1) * cfg.hop
    return overlap_add(fr, cfg.hop, total)[region] / denom


def istft(spec: ComplexSpectrogram, out_len: int) -> Waveform:
    """Windowed overlap-add with squared-window normalisation."""
    return Waveform(istft_samples(spec.to_complex(), spec.config, out_len), spec.config.sample_rate)


# --- adjoints -----------------------------------------------------------------

def _rfft_adjoint(g: np.ndarray, n: int) -> np.ndarray:
    """Adjoint of ``x -> rfft(x)`` viewed as a real map onto (Re, Im) pairs."""
    h = g.copy()
    h[:, 1:(n // 2)] *= 0.5
    return n * np.fft.irfft(h, n, axis=1)


def _irfft_adjoint(g: np.ndarray, n: int) -> np.ndarray:
    z = np.fft.rfft(g, axis=1) / n
    z[:, 1:(n // 2)] *= 2.0
    return z


def stft_adjoint(g: np.ndarray, cfg: StftConfig, n_samples: int) -> np.ndarray:
    """Pull a gradient on the complex STFT (``dRe + 1j*dIm``) back to samples."""
    n_frames = g.shape[0]
    fr = _rfft_adjoint(g, cfg.fft_size) * _analysis_window(cfg)
    total = cfg.fft_size + (n_frames - 1) * cfg.hop
    gp = overlap_add(fr, cfg.hop, total)
    if not cfg.center:
        out = np.zeros(n_samples)
        m = min(total, n_samples)
        out[:m] = gp[:m]
        return out
    idx = _pad_index(n_samples, cfg.pad)
    m = min(total, idx.size)
    return np.bincount(idx[:m], weights=gp[:m], minlength=n_samples)


def istft_adjoint(g: np.ndarray, cfg: StftConfig, n_frames: int) -> np.ndarray:
    """Pull a gradient on the ISTFT output samples back to the complex spectrum."""
    out_len = g.size
    denom, region = _synth_norm(cfg, n_frames, out_len)
    total = cfg.fft_size + (n_frames - 1) * cfg.hop
    gp = np.zeros(total)
    gp[region] = g / denom
    fr = frames_of(gp, cfg.fft_size, cfg.hop, n_frames) * _analysis_window(cfg)
    return _irfft_adjoint(fr, cfg.fft_size)


# --- mel / cepstrum -----------------------------------------------------------

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: StftConfig = StftConfig(), n_mels: int = 80,
                   f_min: float = 0.0, f_max: float | None = None) -> MelFilterbank:
    """Triangular filters with centres evenly spaced on the HTK mel scale."""
    nyq = cfg.sample_rate / 2
    if f_max is None:
        f_max = nyq
    if n_mels < 1:
        raise ValueError("n_mels must be >= 1")
    if n_mels > cfg.n_bins:
        raise ValueError(f"n_mels={n_mels} exceeds the {cfg.n_bins} available bins")
    if not (0 <= f_min < f_max <= nyq):
        raise ValueError(f"need 0 <= f_min < f_max <= {nyq}")
    freqs = np.linspace(0.0, nyq, cfg.n_bins)
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    weights = np.maximum(0.0, np.minimum(up, down))
    return MelFilterbank(weights, float(f_min), float(f_max))


def mel_energies(spec: ComplexSpectrogram, fb: MelFilterbank) -> np.ndarray:
    if spec.shape[1] != fb.weights.shape[1]:
        raise ValueError(f"spectrum has {spec.shape[1]} bins, filterbank expects {fb.weights.shape[1]}")
    power = spec.real ** 2 + spec.imag ** 2
    return power @ fb.weights.T


def mel_cepstrum(spec: ComplexSpectrogram, fb: MelFilterbank, n_coeffs: int = 14) -> np.ndarray:
    """Orthonormal DCT-II of log mel energies; coefficient 0 is kept."""
    n_mels = fb.weights.shape[0]
    if not 1 <= n_coeffs <= n_mels:
        raise ValueError(f"n_coeffs must be in [1, {n_mels}]")
    logE = np.log(mel_energies(spec, fb) + LOG_EPS)
    return dct(logE, type=2, norm="ortho", axis=1)[:, :n_coeffs]
