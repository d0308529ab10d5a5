"""Mono WAV reading and writing (16-bit PCM or 32-bit IEEE float)."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .dsp import Waveform
from .errors import WavFormatError


def read_wav(path, expected_rate: int | None = None) -> Waveform:
    try:
        rate, data = wavfile.read(str(path))
    except ValueError as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    if data.ndim != 1:
        raise WavFormatError(f"{path}: expected mono, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise WavFormatError(f"{path}: unsupported sample type {data.dtype} (need int16 or float32)")
    if expected_rate is not None and rate != expected_rate:
        raise WavFormatError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    return Waveform(samples, int(rate))


def write_wav(path, wav: Waveform, subtype: str = "float") -> None:
    """``subtype`` is ``"float"`` (32-bit IEEE) or ``"pcm16"``."""
    x = np.asarray(wav.samples)
    if subtype == "float":
        data = x.astype("<f4")
    elif subtype == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    else:
        raise ValueError(f"unknown subtype {subtype!r}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(str(path), int(wav.sample_rate), data)
