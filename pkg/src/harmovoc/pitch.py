"""Frame-aligned F0 estimation by normalised autocorrelation."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dsp import StftConfig, Waveform, frames_of, hann_window
from .kernels import nccf

RMS_GATE = 1e-4


@dataclass(frozen=True)
class PitchConfig:
    f0_floor: float = 60.0
    f0_ceil: float = 500.0
    voicing_threshold: float = 0.45
    frame_window: int = 2048

    def validate(self, sample_rate: int) -> None:
        if not (0 < self.f0_floor < self.f0_ceil < sample_rate / 2):
            raise ValueError("need 0 < f0_floor < f0_ceil < sample_rate/2")
        if not 0 < self.voicing_threshold < 1:
            raise ValueError("voicing_threshold must lie in (0, 1)")
        if self.frame_window < 2:
            raise ValueError("frame_window too small")


@dataclass
class F0Contour:
    f0_hz: np.ndarray
    voiced: np.ndarray
    hop: int = 256
    sample_rate: int = 22050

    def __post_init__(self):
        self.f0_hz = np.asarray(self.f0_hz, dtype=np.float64)
        self.voiced = np.asarray(self.voiced, dtype=bool)
        if self.f0_hz.shape != self.voiced.shape or self.f0_hz.ndim != 1:
            raise ValueError("f0_hz and voiced must be 1-D of equal length")
        if np.any(self.f0_hz[~self.voiced] != 0):
            raise ValueError("unvoiced frames must carry f0 = 0")

    def __len__(self):
        return self.f0_hz.size


def estimate_f0(y: Waveform, stft_cfg: StftConfig = StftConfig(),
                pcfg: PitchConfig = PitchConfig()) -> F0Contour:
    """One estimate per STFT frame, centred at ``t * hop``.

    Each frame is Hann-tapered before the normalised cross-correlation so
    that signal near the frame edges weighs less in the voicing decision.
    """
    sr = stft_cfg.sample_rate
    if y.sample_rate != sr:
        raise ValueError(f"waveform at {y.sample_rate} Hz, STFT config at {sr} Hz")
    pcfg.validate(sr)
    x = y.samples
    win = pcfg.frame_window
    if x.size < win:
        raise ValueError(f"waveform of {x.size} samples is shorter than frame_window={win}")

    n_frames = x.size // stft_cfg.hop + 1
    half = win // 2
    xp = np.pad(x, (half, half))
    frames = frames_of(xp, win, stft_cfg.hop, n_frames)
    rms = np.sqrt(np.mean(frames ** 2, axis=1))

    lag_lo = max(1, int(np.floor(sr / pcfg.f0_ceil)))
    lag_hi = min(win - 2, int(np.ceil(sr / pcfg.f0_floor)))
    # one extra lag either side so edge peaks can be refined
    r = nccf(frames * hann_window(win), lag_lo - 1, lag_hi + 1)

    f0 = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    for t in range(n_frames):
        if rms[t] < RMS_GATE:
            continue
        inner = r[t, 1:-1]
        i = int(np.argmax(inner)) + 1
        peak = r[t, i]
        if peak < pcfg.voicing_threshold:
            continue
        a, b, c = r[t, i - 1], peak, r[t, i + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom < 0 else 0.0
        lag = lag_lo - 1 + i + float(np.clip(shift, -0.5, 0.5))
        hz = sr / lag
        if pcfg.f0_floor <= hz <= pcfg.f0_ceil:
            f0[t] = hz
            voiced[t] = True
    return F0Contour(f0, voiced, stft_cfg.hop, sr)


def f0_features(c: F0Contour, pcfg: PitchConfig = PitchConfig()) -> np.ndarray:
    """``[voiced, normalised log2 f0]`` per frame."""
    out = np.zeros((len(c), 2))
    v = c.voiced
    out[v, 0] = 1.0
    span = np.log2(pcfg.f0_ceil / pcfg.f0_floor)
    out[v, 1] = np.clip(np.log2(c.f0_hz[v] / pcfg.f0_floor) / span, 0.0, 1.0)
    return out


def write_f0_csv(path, c: F0Contour) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "f0_hz", "voiced"])
        for t in range(len(c)):
            w.writerow([t, repr(float(c.f0_hz[t])), int(c.voiced[t])])


def read_f0_csv(path, hop: int = 256, sample_rate: int = 22050) -> F0Contour:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    f0 = [float(r["f0_hz"]) for r in rows]
    voiced = [int(r["voiced"]) != 0 for r in rows]
    return F0Contour(np.array(f0), np.array(voiced), hop, sample_rate)
