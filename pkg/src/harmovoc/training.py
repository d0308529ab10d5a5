"""Synthetic corpus, AdamW, and the deterministic toy-scale training loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dsp import StftConfig, Waveform, stft
from .errors import NonFiniteGradientError, TrainingDiverged
from .losses import (LossReport, LossWeights, MrStftConfig, MrStftReference, adv_grads,
                     adv_losses, disc_backward, disc_forward, init_disc_params, mr_stft_loss,
                     phase_loss, total_loss)
from .model import (ModelConfig, ParamSet, init_params, input_features, model_backward,
                    model_forward, waveform_grad_to_spectrum)
from .pitch import F0Contour, PitchConfig, estimate_f0

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e4


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2e-4
    beta1: float = 0.8
    beta2: float = 0.99
    weight_decay: float = 0.01
    batch_size: int = 16
    steps: int = 500
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    adam_eps: float = 1e-8
    grad_clip: float = 10.0
    crop_seconds: float = 0.5
    stft: StftConfig = field(default_factory=StftConfig)
    pitch: PitchConfig = field(default_factory=PitchConfig)
    mrstft: MrStftConfig = field(default_factory=MrStftConfig)


@dataclass
class OptState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def fresh(cls, p: ParamSet) -> OptState:
        return cls({k: np.zeros_like(t) for k, t in p.tensors.items()},
                   {k: np.zeros_like(t) for k, t in p.tensors.items()}, 0)


@dataclass
class SynthClip:
    waveform: Waveform
    true_f0: F0Contour
    voiced_spans: list


# --- synthetic corpus ------------------------------------------------------------

def _band_noise(rng, n: int, sr: int, lo: float = 1000.0, hi: float = 6000.0) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / sr)
    spec[(f < lo) | (f > hi)] = 0.0
    x = np.fft.irfft(spec, n)
    return x / np.sqrt(np.mean(x * x))


def _span_layout(rng, n_frames: int, hop: int, sr: int) -> list[tuple[int, int, bool]]:
    """Alternating (start_frame, end_frame, voiced) spans covering the clip."""
    lo, hi = int(0.12 * sr / hop), int(0.3 * sr / hop)
    voiced = bool(rng.integers(2))
    spans, start = [], 0
    while start < n_frames:
        end = min(n_frames, start + int(rng.integers(lo, hi + 1)))
        if n_frames - end < lo // 2:
            end = n_frames
        spans.append((start, end, voiced))
        start, voiced = end, not voiced
    if not any(v for _, _, v in spans):
        spans = [(s, e, not v) for s, e, v in spans]
    return spans


def synth_clip(rng, dur: float, sr: int = 22050, hop: int = 256) -> SynthClip:
    n = int(round(dur * sr))
    n_frames = n // hop + 1
    y = np.zeros(n)
    f0_track = np.zeros(n)
    spans = _span_layout(rng, n_frames, hop, sr)
    fade = int(0.005 * sr)
    for s, e, voiced in spans:
        # boundaries sit half a hop past a frame centre
        a = 0 if s == 0 else s * hop - hop // 2
        b = n if e == n_frames else min(n, e * hop - hop // 2)
        m = b - a
        if m <= 0:
            continue
        if voiced:
            f_a, f_b = rng.uniform(120.0, 320.0, 2)
            u = np.arange(m) / max(m - 1, 1)
            f0 = f_a + (f_b - f_a) * 0.5 * (1.0 - np.cos(np.pi * u))
            phase = 2.0 * np.pi * np.cumsum(f0) / sr + rng.uniform(0, 2 * np.pi)
            n_harm = int(rng.integers(4, 9))
            seg = sum(np.sin(k * phase) / k for k in range(1, n_harm + 1))
            seg *= rng.uniform(0.4, 0.7) / np.max(np.abs(seg))
            f0_track[a:b] = f0
        else:
            seg = 0.1 * _band_noise(rng, m, sr)
        ramp = np.ones(m)
        k = min(fade, m // 2)
        if k > 0:
            r = 0.5 * (1 - np.cos(np.pi * np.arange(k) / k))
            if a > 0:
                ramp[:k] = r
            if b < n:
                ramp[m - k:] = r[::-1]
        y[a:b] = seg * ramp
    y = np.clip(y, -0.9, 0.9)  # noise peaks are the only thing that can reach it
    centres = np.minimum(np.arange(n_frames) * hop, n - 1)
    f0_frames = f0_track[centres]
    voiced_frames = f0_frames > 0
    contour = F0Contour(np.where(voiced_frames, f0_frames, 0.0), voiced_frames, hop, sr)
    return SynthClip(Waveform(y, sr), contour, [(s, e) for s, e, v in spans if v])


def synth_dataset(n_clips: int, dur: float, seed: int, sample_rate: int = 22050,
                  hop: int = 256) -> list[SynthClip]:
    """Harmonic voiced spans alternating with band-limited noise, seeded."""
    if n_clips < 1:
        raise ValueError("n_clips must be >= 1")
    if dur < 0.25:
        raise ValueError("clip duration must be >= 0.25 s")
    rng = np.random.default_rng(seed)
    return [synth_clip(rng, dur, sample_rate, hop) for _ in range(n_clips)]


# --- optimiser -------------------------------------------------------------------

def adamw_step(p: ParamSet, state: OptState, cfg: TrainConfig) -> None:
    """One AdamW update with decoupled weight decay, in place."""
    for name, g in p.grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)
    state.step += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, theta in p.tensors.items():
        g = p.grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps) + cfg.weight_decay * theta
        theta -= cfg.lr * update


def clip_grad_norm(p: ParamSet, max_norm: float) -> float:
    norm = p.grad_norm()
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in p.grads.values():
            g *= scale
    return norm


def snap_float32(p: ParamSet, state: OptState) -> None:
    """Round parameters and moments to float32 so checkpoints are lossless."""
    for d in (p.tensors, state.m, state.v):
        for t in d.values():
            t[...] = t.astype(np.float32)


# --- training loop -----------------------------------------------------------------

@dataclass
class _Item:
    y: np.ndarray
    target: object
    features: np.ndarray
    contour: F0Contour
    ref: MrStftReference


class Trainer:
    """Holds generator/discriminator parameters and optimiser state."""

    def __init__(self, data: list, mcfg: ModelConfig, tcfg: TrainConfig):
        if not data:
            raise ValueError("training data is empty")
        if mcfg.F != tcfg.stft.n_bins:
            raise ValueError(f"model F={mcfg.F} does not match STFT bins {tcfg.stft.n_bins}")
        self.data = [c.waveform if isinstance(c, SynthClip) else c for c in data]
        self.mcfg = mcfg
        self.tcfg = tcfg
        self.params = init_params(mcfg)
        self.state = OptState.fresh(self.params)
        self.disc = init_disc_params(tcfg.seed + 1)
        self.disc_state = OptState.fresh(self.disc)
        self.rng = np.random.default_rng(tcfg.seed)
        self.history: list[LossReport] = []
        self._order: list[int] = []
        self._cache: dict = {}
        sr = tcfg.stft.sample_rate
        self.crop = int(round(tcfg.crop_seconds * sr))
        for w in self.data:
            if w.sample_rate != sr:
                raise ValueError(f"clip at {w.sample_rate} Hz, training at {sr} Hz")

    def _next_clip(self) -> int:
        if not self._order:
            self._order = list(self.rng.permutation(len(self.data)))
        return int(self._order.pop(0))

    def _item(self, idx: int, offset: int) -> _Item:
        key = (idx, offset)
        if key not in self._cache:
            w = self.data[idx]
            n = min(self.crop, len(w))
            y = w.samples[offset:offset + n]
            cfg = self.tcfg.stft
            S = stft(y, cfg)
            contour = estimate_f0(Waveform(y, w.sample_rate), cfg, self.tcfg.pitch)
            self._cache[key] = _Item(y, S, input_features(S), contour,
                                     MrStftReference.build(y, self.tcfg.mrstft, w.sample_rate))
        return self._cache[key]

    def _sample_batch(self) -> list[_Item]:
        hop = self.tcfg.stft.hop
        items = []
        for _ in range(self.tcfg.batch_size):
            idx = self._next_clip()
            slack = len(self.data[idx]) - self.crop
            offset = int(self.rng.integers(0, slack // hop + 1)) * hop if slack > 0 else 0
            items.append(self._item(idx, offset))
        return items

    def step(self) -> LossReport:
        t = self.tcfg
        w = t.weights
        use_adv = w.lambda_adv > 0
        batch = self._sample_batch()
        B = len(batch)
        p = self.params
        p.zero_grad()
        self.disc.zero_grad()
        sums = np.zeros(4)
        fakes = []
        for it in batch:
            S_hat, y_hat, rec = model_forward(it.features, it.contour, p, it.y.size, t.stft, t.pitch)
            l_stft, g_wave = mr_stft_loss(y_hat, it.ref)
            l_phase, g_spec = phase_loss(S_hat, it.target)
            g_wave = w.lambda_stft * g_wave
            l_g = l_d = 0.0
            if use_adv:
                fake, frec = disc_forward(y_hat, self.disc)
                real, rrec = disc_forward(it.y, self.disc)
                l_d, l_g = adv_losses(real, fake)
                d_r, d_f, g_f = adv_grads(real, fake)
                scratch = self.disc.copy()
                g_wave = g_wave + w.lambda_adv * disc_backward(frec, g_f, scratch)
                fakes.append((rrec, d_r, frec, d_f))
            g = w.lambda_phase * g_spec + waveform_grad_to_spectrum(g_wave, rec)
            model_backward(rec, g / B, p, accumulate=True)
            sums += (l_stft, l_phase, l_g, l_d)
        l_stft, l_phase, l_g, l_d = sums / B
        report = total_loss(l_stft, l_phase, l_g, l_d, w)
        step_no = len(self.history) + 1
        if not np.isfinite(report.total) or report.total > DIVERGENCE_LIMIT:
            raise TrainingDiverged(step_no, report.total)

        clip_grad_norm(p, t.grad_clip)
        adamw_step(p, self.state, t)
        snap_float32(p, self.state)
        if use_adv:
            for rrec, d_r, frec, d_f in fakes:
                disc_backward(rrec, d_r / B, self.disc)
                disc_backward(frec, d_f / B, self.disc)
            clip_grad_norm(self.disc, t.grad_clip)
            adamw_step(self.disc, self.disc_state, t)
        self.history.append(report)
        return report

    def run(self, steps: int | None = None, callback=None) -> list[LossReport]:
        n = self.tcfg.steps if steps is None else steps
        for _ in range(n):
            rep = self.step()
            if callback is not None:
                callback(len(self.history), rep)
        return self.history


def train(data: list, mcfg: ModelConfig, tcfg: TrainConfig = TrainConfig(), callback=None):
    """Run ``tcfg.steps`` generator updates; returns ``(params, history)``."""
    tr = Trainer(data, mcfg, tcfg)
    tr.run(callback=callback)
    return tr.params, tr.history
