"""Objective metrics (F0 RMSE, V/UV error, MCD), mel residuals, Griffin-Lim."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dsp import (LOG_EPS, ComplexSpectrogram, MelFilterbank, StftConfig, Waveform,
                  frames_of, mel_cepstrum, mel_energies, mel_filterbank, stft, _analysis_window)
from .errors import UndefinedMetricError
from .kernels import overlap_add
from .pitch import F0Contour, PitchConfig, estimate_f0

MCD_SCALE = 10.0 / np.log(10.0) * np.sqrt(2.0)
MCD_ORDER = 13


@dataclass
class MetricsReport:
    f0_rmse: float
    vuv_error: float
    mcd: float
    residual_mel: np.ndarray
    n_frames_compared: int

    CSV_HEADER = ("utt_id", "f0_rmse_hz", "vuv_error_pct", "mcd_db", "n_frames")

    def csv_row(self, utt_id: str) -> list:
        return [utt_id, repr(self.f0_rmse), repr(self.vuv_error), repr(self.mcd), self.n_frames_compared]


def _check_pair(ref: F0Contour, est: F0Contour) -> None:
    if len(ref) != len(est):
        raise ValueError(f"contour lengths differ: {len(ref)} vs {len(est)}")


def f0_rmse(ref: F0Contour, est: F0Contour) -> tuple[float, int]:
    """RMSE over frames voiced in both contours, and the number of such frames."""
    _check_pair(ref, est)
    both = ref.voiced & est.voiced
    n = int(both.sum())
    if n == 0:
        raise UndefinedMetricError("no jointly voiced frames")
    d = ref.f0_hz[both] - est.f0_hz[both]
    return float(np.sqrt(np.mean(d * d))), n


def vuv_error(ref: F0Contour, est: F0Contour) -> float:
    _check_pair(ref, est)
    if len(ref) == 0:
        raise ValueError("empty contours")
    return 100.0 * float(np.mean(ref.voiced != est.voiced))


def mcd_from_cepstra(c_ref: np.ndarray, c_est: np.ndarray) -> float:
    """Mean frame-wise mel-cepstral distance in dB over coefficients 1..13."""
    if c_ref.shape != c_est.shape:
        raise ValueError("cepstra shapes differ")
    d = c_ref[:, 1:MCD_ORDER + 1] - c_est[:, 1:MCD_ORDER + 1]
    return float(MCD_SCALE * np.mean(np.sqrt(np.sum(d * d, axis=1))))


def _same_length(ref: Waveform, est: Waveform) -> None:
    if len(ref) != len(est):
        raise ValueError(f"length mismatch: {len(ref)} vs {len(est)}")
    if ref.sample_rate != est.sample_rate:
        raise ValueError("sample rates differ")


def mcd(ref: Waveform, est: Waveform, cfg: StftConfig = StftConfig(),
        fb: MelFilterbank | None = None) -> float:
    _same_length(ref, est)
    fb = fb or mel_filterbank(cfg, 80)
    c1 = mel_cepstrum(stft(ref, cfg), fb, MCD_ORDER + 1)
    c2 = mel_cepstrum(stft(est, cfg), fb, MCD_ORDER + 1)
    return mcd_from_cepstra(c1, c2)


def residual_mel_energy(ref: Waveform, est: Waveform, cfg: StftConfig = StftConfig(),
                        fb: MelFilterbank | None = None) -> np.ndarray:
    """Per-frame L2 distance between log mel energies."""
    _same_length(ref, est)
    fb = fb or mel_filterbank(cfg, 80)
    e1 = np.log(mel_energies(stft(ref, cfg), fb) + LOG_EPS)
    e2 = np.log(mel_energies(stft(est, cfg), fb) + LOG_EPS)
    return np.sqrt(np.sum((e1 - e2) ** 2, axis=1))


# --- Griffin-Lim ------------------------------------------------------------------
#
# Iterations run on the padded signal with plain least-squares overlap-add so
# each step is an exact projection; that is what makes the convergence trace
# monotone.  Only the final waveform is trimmed.

def _gl_stft(xp: np.ndarray, cfg: StftConfig, n_frames: int) -> np.ndarray:
    return np.fft.rfft(frames_of(xp, cfg.fft_size, cfg.hop, n_frames) * _analysis_window(cfg), axis=1)


def _gl_istft(z: np.ndarray, cfg: StftConfig, wsum: np.ndarray) -> np.ndarray:
    fr = np.fft.irfft(z, cfg.fft_size, axis=1) * _analysis_window(cfg)
    out = overlap_add(fr, cfg.hop, wsum.size)
    ok = wsum > 1e-12
    out[ok] /= wsum[ok]
    out[~ok] = 0.0
    return out


@dataclass
class GriffinLimResult:
    waveform: Waveform
    convergence: list


def griffin_lim(mag: np.ndarray, cfg: StftConfig = StftConfig(), iters: int = 32, seed: int = 0,
                n_samples: int | None = None, init_phase: np.ndarray | None = None) -> GriffinLimResult:
    """Alternating projections from a magnitude spectrogram.

    ``convergence[i]`` is the spectral convergence after iteration ``i``.
    """
    mag = np.asarray(mag, dtype=np.float64)
    if np.any(mag < 0):
        raise ValueError("magnitude must be non-negative")
    if not cfg.center:
        raise ValueError("griffin_lim expects centred framing")
    n_frames = mag.shape[0]
    if n_samples is None:
        n_samples = (n_frames - 1) * cfg.hop
    total = cfg.fft_size + (n_frames - 1) * cfg.hop
    if not np.any(mag > 0):
        return GriffinLimResult(Waveform(np.zeros(n_samples), cfg.sample_rate), [])

    wsum = overlap_add(np.tile(_analysis_window(cfg) ** 2, (n_frames, 1)), cfg.hop, total)
    if init_phase is None:
        rng = np.random.default_rng(seed)
        phase = rng.uniform(-np.pi, np.pi, mag.shape)
    else:
        phase = np.asarray(init_phase, dtype=np.float64)
    ref_norm = np.linalg.norm(mag)
    trace = []
    for _ in range(iters):
        xp = _gl_istft(mag * np.exp(1j * phase), cfg, wsum)
        z = _gl_stft(xp, cfg, n_frames)
        phase = np.angle(z)
        trace.append(float(np.linalg.norm(np.abs(z) - mag) / ref_norm))
    xp = _gl_istft(mag * np.exp(1j * phase), cfg, wsum)
    y = xp[cfg.pad:cfg.pad + n_samples]
    if y.size < n_samples:
        y = np.pad(y, (0, n_samples - y.size))
    return GriffinLimResult(Waveform(y, cfg.sample_rate), trace)


def evaluate_pair(ref: Waveform, est: Waveform, stft_cfg: StftConfig = StftConfig(),
                  pcfg: PitchConfig = PitchConfig(), n_mels: int = 80,
                  allow_unvoiced: bool = False) -> MetricsReport:
    """All objective metrics for one reference/estimate pair.

    With ``allow_unvoiced`` a pair without jointly voiced frames reports
    ``f0_rmse = nan`` instead of raising.
    """
    _same_length(ref, est)
    fb = mel_filterbank(stft_cfg, n_mels)
    c_ref = estimate_f0(ref, stft_cfg, pcfg)
    c_est = estimate_f0(est, stft_cfg, pcfg)
    try:
        rmse, n = f0_rmse(c_ref, c_est)
    except UndefinedMetricError:
        if not allow_unvoiced:
            raise
        rmse, n = float("nan"), 0
    return MetricsReport(
        f0_rmse=rmse,
        vuv_error=vuv_error(c_ref, c_est),
        mcd=mcd(ref, est, stft_cfg, fb),
        residual_mel=residual_mel_energy(ref, est, stft_cfg, fb),
        n_frames_compared=n,
    )


def write_metrics_csv(path, rows: list[tuple[str, MetricsReport]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MetricsReport.CSV_HEADER)
        for utt, rep in rows:
            w.writerow(rep.csv_row(utt))


def write_residual_csv(path, residual: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "residual"])
        for t, r in enumerate(residual):
            w.writerow([t, repr(float(r))])
