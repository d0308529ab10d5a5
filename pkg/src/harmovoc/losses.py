"""Training objectives with hand-derived gradients.

Every loss returns ``(value, gradient)``; spectral gradients are shaped
``(T, F, 2)`` over the (real, imag) planes, waveform gradients are 1-D.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .dsp import ComplexSpectrogram, StftConfig, Waveform, stft_adjoint, stft_complex
from .errors import NumericDegenerateError
from .model import ParamSet

MAG_EPS = 1e-5
PHASE_MASK = 1e-6


@dataclass(frozen=True)
class LossWeights:
    lambda_stft: float = 1.0
    lambda_adv: float = 0.1
    lambda_phase: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{f.name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class MrStftConfig:
    resolutions: tuple = ((512, 128, 512), (1024, 256, 1024), (2048, 512, 2048))

    def __post_init__(self):
        if not self.resolutions:
            raise ValueError("at least one resolution required")
        for fft, hop, win in self.resolutions:
            StftConfig(fft_size=fft, win_size=win, hop=hop)

    def stft_configs(self, sample_rate: int = 22050) -> list[StftConfig]:
        return [StftConfig(fft_size=f, win_size=w, hop=h, sample_rate=sample_rate)
                for f, h, w in self.resolutions]


@dataclass
class LossReport:
    l_stft: float = 0.0
    l_phase: float = 0.0
    l_adv_g: float = 0.0
    l_adv_d: float = 0.0
    total: float = 0.0

    CSV_HEADER = ("step", "l_stft", "l_phase", "l_adv_g", "l_adv_d", "total")

    def csv_row(self, step: int) -> list:
        return [step, repr(self.l_stft), repr(self.l_phase), repr(self.l_adv_g),
                repr(self.l_adv_d), repr(self.total)]


# --- MR-STFT ------------------------------------------------------------------

@dataclass
class MrStftReference:
    """Reference magnitudes per resolution, reusable across loss calls."""
    configs: list
    mags: list = field(default_factory=list)
    n_samples: int = 0

    @classmethod
    def build(cls, y, cfg: MrStftConfig = MrStftConfig(), sample_rate: int | None = None):
        x = y.samples if isinstance(y, Waveform) else np.asarray(y, dtype=np.float64)
        sr = sample_rate or (y.sample_rate if isinstance(y, Waveform) else 22050)
        configs = cfg.stft_configs(sr)
        mags = []
        for c in configs:
            m = np.abs(stft_complex(x, c))
            if not np.any(m > 0):
                raise NumericDegenerateError("reference signal has zero STFT magnitude")
            mags.append(m)
        return cls(configs, mags, x.size)


def mr_stft_loss(y_hat, y, cfg: MrStftConfig = MrStftConfig()) -> tuple[float, np.ndarray]:
    """Mean over resolutions of spectral convergence + mean |log-magnitude| error.

    ``y`` may be a :class:`MrStftReference` to skip recomputing the target.
    """
    xh = y_hat.samples if isinstance(y_hat, Waveform) else np.asarray(y_hat, dtype=np.float64)
    if isinstance(y, MrStftReference):
        ref = y
    else:
        if isinstance(y, Waveform) and isinstance(y_hat, Waveform) and y.sample_rate != y_hat.sample_rate:
            raise ValueError("sample rates differ")
        ref = MrStftReference.build(y, cfg)
    if xh.size != ref.n_samples:
        raise ValueError(f"length mismatch: {xh.size} vs {ref.n_samples}")

    total = 0.0
    grad = np.zeros(xh.size)
    R = len(ref.configs)
    for c, M in zip(ref.configs, ref.mags):
        Z = stft_complex(xh, c)
        Mh = np.abs(Z)
        diff = M - Mh
        num = np.sqrt(np.sum(diff * diff))
        den = np.sqrt(np.sum(M * M))
        sc = num / den
        logd = np.log(M + MAG_EPS) - np.log(Mh + MAG_EPS)
        lm = np.mean(np.abs(logd))
        total += sc + lm

        dM = -np.sign(logd) / (logd.size * (Mh + MAG_EPS))
        if num > 0:
            dM -= diff / (num * den)
        unit = np.divide(Z, Mh, out=np.zeros_like(Z), where=Mh > 0)
        grad += stft_adjoint(dM * unit, c, xh.size)
    return total / R, grad / R


# --- phase --------------------------------------------------------------------

def phase_loss(S_hat: ComplexSpectrogram, S: ComplexSpectrogram,
               eps: float = 1e-8) -> tuple[float, np.ndarray]:
    """Mean squared distance between unit-normalised spectra.

    Bins where either magnitude is below 1e-6 have no defined phase and are
    masked out; the mean still divides by ``T * F``.
    """
    if S_hat.shape != S.shape:
        raise ValueError(f"shape mismatch: {S_hat.shape} vs {S.shape}")
    zh = S_hat.to_complex()
    z = S.to_complex()
    rh = np.abs(zh)
    r = np.abs(z)
    mask = (r >= PHASE_MASK) & (rh >= PHASE_MASK)
    u = zh / np.maximum(rh, eps)
    v = z / np.maximum(r, eps)
    n = zh.size
    value = float(np.sum(np.abs(v - u)[mask] ** 2) / n)

    # d/dzh of -2 Re(conj(v) u), u = zh/|zh|
    g = np.zeros_like(zh)
    um, vm, rm = u[mask], v[mask], rh[mask]
    g[mask] = -2.0 * (vm - np.real(np.conj(vm) * um) * um) / rm / n
    return value, np.stack([g.real, g.imag], axis=-1)


# --- discriminator --------------------------------------------------------------

DISC_CHANNELS = (8, 16, 16)
DISC_STRIDE = 4
LEAK = 0.2


def init_disc_params(seed: int = 0, channels=DISC_CHANNELS) -> ParamSet:
    rng = np.random.default_rng(seed)
    tensors = {}
    for s in range(2):
        c_in = 1
        for i, c_out in enumerate(channels):
            fan_in = DISC_STRIDE * c_in
            a = np.sqrt(1.0 / fan_in)
            tensors[f"disc.s{s}.c{i}.w"] = rng.uniform(-a, a, (fan_in, c_out)).astype(np.float32)
            tensors[f"disc.s{s}.c{i}.b"] = np.zeros(c_out)
            c_in = c_out
        a = np.sqrt(1.0 / c_in)
        tensors[f"disc.s{s}.out.w"] = rng.uniform(-a, a, (c_in, 1)).astype(np.float32)
        tensors[f"disc.s{s}.out.b"] = np.zeros(1)
    return ParamSet(tensors)


@dataclass
class DiscRecord:
    n_samples: int
    inputs: list      # per scale, per layer: layer input (L, C)
    pre: list         # per scale, per layer: pre-activation
    n_layers: int


def _n_layers(p: ParamSet) -> int:
    return sum(1 for n in p if n.startswith("disc.s0.c") and n.endswith(".w"))


def disc_forward(y, p: ParamSet) -> tuple[np.ndarray, DiscRecord]:
    """Scores of the raw and 2x average-pooled scales, concatenated."""
    x = y.samples if isinstance(y, Waveform) else np.asarray(y, dtype=np.float64)
    if x.size < 256:
        raise ValueError("discriminator window must be >= 256 samples")
    n_layers = _n_layers(p)
    scales = [x, 0.5 * (x[0:x.size // 2 * 2:2] + x[1:x.size // 2 * 2:2])]
    scores, inputs, pre = [], [], []
    for s, h in enumerate(scales):
        h = h[:, None]
        ins, pres = [], []
        for i in range(n_layers):
            L = h.shape[0] // DISC_STRIDE
            hr = h[:L * DISC_STRIDE].reshape(L, DISC_STRIDE * h.shape[1])
            u = hr @ p[f"disc.s{s}.c{i}.w"] + p[f"disc.s{s}.c{i}.b"]
            ins.append(h)
            pres.append(u)
            h = np.where(u > 0, u, LEAK * u)
        ins.append(h)
        scores.append((h @ p[f"disc.s{s}.out.w"] + p[f"disc.s{s}.out.b"])[:, 0])
        inputs.append(ins)
        pre.append(pres)
    rec = DiscRecord(x.size, inputs, pre, n_layers)
    return np.concatenate(scores), rec


def disc_backward(rec: DiscRecord, d_scores: np.ndarray, p: ParamSet, accumulate: bool = True) -> np.ndarray:
    """Back-propagate score gradients; returns d/d(input samples)."""
    n0 = rec.inputs[0][-1].shape[0]
    parts = [d_scores[:n0], d_scores[n0:]]
    dx_scales = []
    for s in range(2):
        ins, pres = rec.inputs[s], rec.pre[s]
        g = parts[s][:, None]
        _acc(p, f"disc.s{s}.out.w", ins[-1].T @ g, accumulate)
        _acc(p, f"disc.s{s}.out.b", g.sum(axis=0), accumulate)
        dh = g @ p[f"disc.s{s}.out.w"].T
        for i in reversed(range(rec.n_layers)):
            u = pres[i]
            du = dh * np.where(u > 0, 1.0, LEAK)
            h = ins[i]
            L = u.shape[0]
            hr = h[:L * DISC_STRIDE].reshape(L, DISC_STRIDE * h.shape[1])
            _acc(p, f"disc.s{s}.c{i}.w", hr.T @ du, accumulate)
            _acc(p, f"disc.s{s}.c{i}.b", du.sum(axis=0), accumulate)
            dhr = du @ p[f"disc.s{s}.c{i}.w"].T
            dh = np.zeros_like(h)
            dh[:L * DISC_STRIDE] = dhr.reshape(L * DISC_STRIDE, h.shape[1])
        dx_scales.append(dh[:, 0])
    dx = dx_scales[0].copy()
    half = dx_scales[1]
    dx[0:2 * half.size:2] += 0.5 * half
    dx[1:2 * half.size:2] += 0.5 * half
    return dx


def _acc(p: ParamSet, name: str, val: np.ndarray, accumulate: bool) -> None:
    if accumulate:
        p.grads[name] += val
    else:
        p.grads[name][...] = val


def adv_losses(real_scores, fake_scores) -> tuple[float, float]:
    """Least-squares GAN objectives ``(l_d, l_g)``."""
    r = np.asarray(real_scores, dtype=np.float64)
    f = np.asarray(fake_scores, dtype=np.float64)
    if r.size == 0 or f.size == 0:
        raise ValueError("score sequences must be non-empty")
    l_d = float(np.mean((r - 1.0) ** 2) + np.mean(f ** 2))
    l_g = float(np.mean((f - 1.0) ** 2))
    return l_d, l_g


def adv_grads(real_scores, fake_scores):
    """Gradients ``(dl_d/dr, dl_d/df, dl_g/df)``."""
    r = np.asarray(real_scores, dtype=np.float64)
    f = np.asarray(fake_scores, dtype=np.float64)
    return 2.0 * (r - 1.0) / r.size, 2.0 * f / f.size, 2.0 * (f - 1.0) / f.size


def total_loss(l_stft: float, l_phase: float, l_adv_g: float = 0.0, l_adv_d: float = 0.0,
               w: LossWeights = LossWeights()) -> LossReport:
    total = w.lambda_stft * l_stft + w.lambda_adv * l_adv_g + w.lambda_phase * l_phase
    return LossReport(l_stft=float(l_stft), l_phase=float(l_phase), l_adv_g=float(l_adv_g),
                      l_adv_d=float(l_adv_d), total=float(total))
