"""Encoder, F0-keyed harmonic attention, and complex-spectrum decoder.

Forward passes return a :class:`ForwardRecord` holding every intermediate
that :func:`model_backward` needs; there is no autodiff framework.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import ComplexSpectrogram, StftConfig, Waveform, istft_adjoint, istft_samples
from .errors import InvalidStateError
from .kernels import conv_time, conv_time_backward
from .pitch import F0Contour, PitchConfig, f0_features

MAG_FLOOR = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    d: int = 64
    F: int = 513
    n_enc_blocks: int = 2
    kernel: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("kernel must be a positive odd width")
        if self.F < 2 or self.n_enc_blocks < 0:
            raise ValueError("invalid F / n_enc_blocks")


class ParamSet:
    """Named float64 tensors with same-shape gradient buffers."""

    def __init__(self, tensors: dict[str, np.ndarray]):
        self.tensors = {k: np.array(v, dtype=np.float64) for k, v in tensors.items()}
        self.grads = {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    def names(self) -> list[str]:
        return list(self.tensors)

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def copy(self) -> ParamSet:
        out = ParamSet(self.tensors)
        for k, g in self.grads.items():
            out.grads[k][...] = g
        return out

    def equals(self, other: ParamSet) -> bool:
        return (self.names() == other.names()
                and all(np.array_equal(self[k], other[k]) for k in self))

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(np.sum(g * g) for g in self.grads.values())))


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[tuple[int, ...], int]]:
    """name -> (shape, fan_in).  Fan-in 0 marks a bias."""
    d, F, k = cfg.d, cfg.F, cfg.kernel
    shapes = {
        "enc.in.w": ((F, d), F),
        "enc.in.b": ((d,), 0),
    }
    for i in range(cfg.n_enc_blocks):
        shapes[f"enc.block{i}.w"] = ((k, d, d), k * d)
        shapes[f"enc.block{i}.b"] = ((d,), 0)
    shapes.update({
        # no bias: a shared key offset only shifts each logit row, which softmax ignores
        "f0_proj.w": ((2, d), 2),
        "attn.Wq": ((d, d), d),
        "attn.Wk": ((d, d), d),
        "attn.Wv": ((d, d), d),
        "dec.block.w": ((k, d, d), k * d),
        "dec.block.b": ((d,), 0),
        "dec.out.w": ((d, 2 * F), d),
        "dec.out.b": ((2 * F,), 0),
    })
    return shapes


def init_params(cfg: ModelConfig) -> ParamSet:
    """Uniform(-a, a) weights with ``a = sqrt(1/fan_in)``; zero biases.

    Draws are rounded to float32 so a checkpoint round trip is lossless.
    """
    rng = np.random.default_rng(cfg.seed)
    tensors = {}
    for name, (shape, fan_in) in param_shapes(cfg).items():
        if fan_in == 0:
            tensors[name] = np.zeros(shape)
        else:
            a = np.sqrt(1.0 / fan_in)
            tensors[name] = rng.uniform(-a, a, size=shape).astype(np.float32).astype(np.float64)
    return ParamSet(tensors)


def config_from_params(p: ParamSet, seed: int = 0) -> ModelConfig:
    F = p["enc.in.w"].shape[0]
    k, d, _ = p["dec.block.w"].shape
    n_blocks = sum(1 for n in p if n.startswith("enc.block") and n.endswith(".w"))
    return ModelConfig(d=d, F=F, n_enc_blocks=n_blocks, kernel=k, seed=seed)


def input_features(spec: ComplexSpectrogram) -> np.ndarray:
    """Log-magnitude encoder input, ``log(|S| + 1e-5)``."""
    return np.log(spec.magnitude() + MAG_FLOOR)


# --- forward ------------------------------------------------------------------

@dataclass
class EncoderRecord:
    X: np.ndarray
    Z: list          # residual stream before each block, Z[-1] = H
    A: list          # tanh activations per block

    @property
    def H(self) -> np.ndarray:
        return self.Z[-1]


@dataclass
class AttentionRecord:
    A: np.ndarray
    H: np.ndarray
    F_emb: np.ndarray
    H_tilde: np.ndarray   # raw attended output A (H Wv)
    H_out: np.ndarray     # voiced-gated output
    feats: np.ndarray
    voiced: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray


@dataclass
class DecoderRecord:
    H_in: np.ndarray
    act: np.ndarray
    D: np.ndarray


@dataclass
class ForwardRecord:
    enc: EncoderRecord
    attn: AttentionRecord
    dec: DecoderRecord
    stft_cfg: StftConfig
    out_len: int


def encoder_forward(X: np.ndarray, p: ParamSet) -> EncoderRecord:
    if not np.all(np.isfinite(X)):
        raise ValueError("encoder input contains non-finite values")
    z = X @ p["enc.in.w"] + p["enc.in.b"]
    Z, A = [z], []
    i = 0
    while f"enc.block{i}.w" in p:
        a = np.tanh(conv_time(z, p[f"enc.block{i}.w"], p[f"enc.block{i}.b"]))
        z = z + a
        A.append(a)
        Z.append(z)
        i += 1
    return EncoderRecord(X, Z, A)


def softmax_rows(L: np.ndarray) -> np.ndarray:
    e = np.exp(L - L.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def harmonic_attention(H: np.ndarray, feats: np.ndarray, voiced: np.ndarray, p: ParamSet,
                       F_emb: np.ndarray | None = None) -> AttentionRecord:
    """F0-keyed attention over encoded frames; unvoiced rows pass through.

    ``F_emb`` may be supplied directly to bypass the learned F0 projection.
    """
    voiced = np.asarray(voiced, dtype=bool)
    if H.shape[0] != feats.shape[0] or H.shape[0] != voiced.shape[0]:
        raise ValueError("H, feats and voiced must share the frame axis")
    d = H.shape[1]
    if F_emb is None:
        F_emb = feats @ p["f0_proj.w"]
    Q = H @ p["attn.Wq"]
    K = F_emb @ p["attn.Wk"]
    V = H @ p["attn.Wv"]
    A = softmax_rows(Q @ K.T / np.sqrt(d))
    H_tilde = A @ V
    H_out = np.where(voiced[:, None], H_tilde, H)
    return AttentionRecord(A, H, F_emb, H_tilde, H_out, feats, voiced, Q, K, V)


def decoder_forward_record(H_in: np.ndarray, p: ParamSet) -> tuple[DecoderRecord, np.ndarray]:
    act = np.tanh(conv_time(H_in, p["dec.block.w"], p["dec.block.b"]))
    D = H_in + act
    out = D @ p["dec.out.w"] + p["dec.out.b"]
    return DecoderRecord(H_in, act, D), out


def decoder_forward(H_tilde: np.ndarray, p: ParamSet, cfg: StftConfig | None = None) -> ComplexSpectrogram:
    _, out = decoder_forward_record(H_tilde, p)
    F = p["dec.out.w"].shape[1] // 2
    if cfg is None:
        cfg = StftConfig(fft_size=2 * (F - 1), win_size=2 * (F - 1), hop=(F - 1) // 2)
    return ComplexSpectrogram(out[:, :F], out[:, F:], cfg)


def model_forward(y_features: np.ndarray, contour: F0Contour, p: ParamSet, out_len: int,
                  stft_cfg: StftConfig = StftConfig(), pcfg: PitchConfig = PitchConfig()):
    """Features -> (predicted spectrum, waveform, forward record)."""
    if len(contour) != y_features.shape[0]:
        raise ValueError(f"contour has {len(contour)} frames, features have {y_features.shape[0]}")
    F = p["dec.out.w"].shape[1] // 2
    if F != stft_cfg.n_bins or y_features.shape[1] != F:
        raise ValueError("feature / parameter bin count does not match the STFT config")
    enc = encoder_forward(y_features, p)
    attn = harmonic_attention(enc.H, f0_features(contour, pcfg), contour.voiced, p)
    dec, out = decoder_forward_record(attn.H_out, p)
    spec = ComplexSpectrogram(out[:, :F], out[:, F:], stft_cfg)
    y = istft_samples(spec.to_complex(), stft_cfg, out_len)
    return spec, Waveform(y, stft_cfg.sample_rate), ForwardRecord(enc, attn, dec, stft_cfg, out_len)


def waveform_grad_to_spectrum(g_wave: np.ndarray, rec: ForwardRecord) -> np.ndarray:
    """Gradient on the output samples -> ``(T, F, 2)`` gradient on (Re, Im)."""
    z = istft_adjoint(g_wave, rec.stft_cfg, rec.attn.A.shape[0])
    return np.stack([z.real, z.imag], axis=-1)


# --- backward -----------------------------------------------------------------

def _check_record(rec: ForwardRecord, p: ParamSet) -> None:
    d = p["attn.Wq"].shape[0]
    T = rec.attn.A.shape[0]
    n_blocks = sum(1 for n in p if n.startswith("enc.block") and n.endswith(".w"))
    ok = (rec.enc.X.shape[1] == p["enc.in.w"].shape[0]
          and rec.enc.H.shape == (T, d)
          and rec.dec.D.shape == (T, d)
          and len(rec.enc.A) == n_blocks)
    if not ok:
        raise InvalidStateError("forward record does not match parameter shapes")


def model_backward(rec: ForwardRecord, dL_dS: np.ndarray, p: ParamSet, accumulate: bool = False) -> None:
    """Reverse-mode gradients of the forward composition into ``p.grads``.

    ``dL_dS`` is ``(T, F, 2)``: gradient w.r.t. the real and imaginary planes.
    """
    _check_record(rec, p)
    T = rec.attn.A.shape[0]
    F = p["dec.out.w"].shape[1] // 2
    if dL_dS.shape != (T, F, 2):
        raise InvalidStateError(f"gradient shape {dL_dS.shape} does not match record ({T}, {F}, 2)")
    g = {}
    dO = np.concatenate([dL_dS[..., 0], dL_dS[..., 1]], axis=1)

    dec = rec.dec
    g["dec.out.w"] = dec.D.T @ dO
    g["dec.out.b"] = dO.sum(axis=0)
    dD = dO @ p["dec.out.w"].T
    dU = dD * (1.0 - dec.act ** 2)
    dH_in, g["dec.block.w"], g["dec.block.b"] = conv_time_backward(dec.H_in, p["dec.block.w"], dU)
    dH_out = dD + dH_in

    at = rec.attn
    v = at.voiced[:, None]
    dR = np.where(v, dH_out, 0.0)
    dH = np.where(v, 0.0, dH_out)
    dA = dR @ at.V.T
    dV = at.A.T @ dR
    dLg = at.A * (dA - np.sum(dA * at.A, axis=1, keepdims=True))
    scale = 1.0 / np.sqrt(at.H.shape[1])
    dQ = dLg @ at.K * scale
    dK = dLg.T @ at.Q * scale
    g["attn.Wq"] = at.H.T @ dQ
    g["attn.Wk"] = at.F_emb.T @ dK
    g["attn.Wv"] = at.H.T @ dV
    dH = dH + dQ @ p["attn.Wq"].T + dV @ p["attn.Wv"].T
    dF = dK @ p["attn.Wk"].T
    g["f0_proj.w"] = at.feats.T @ dF

    enc = rec.enc
    dz = dH
    for i in reversed(range(len(enc.A))):
        dU = dz * (1.0 - enc.A[i] ** 2)
        dzi, g[f"enc.block{i}.w"], g[f"enc.block{i}.b"] = conv_time_backward(
            enc.Z[i], p[f"enc.block{i}.w"], dU)
        dz = dz + dzi
    g["enc.in.w"] = enc.X.T @ dz
    g["enc.in.b"] = dz.sum(axis=0)

    for name, val in g.items():
        if accumulate:
            p.grads[name] += val
        else:
            p.grads[name][...] = val
