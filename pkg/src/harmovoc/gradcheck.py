"""Finite-difference verification of the hand-written backward passes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import ComplexSpectrogram, StftConfig, stft
from .losses import LossWeights, MrStftConfig, MrStftReference, mr_stft_loss, phase_loss
from .model import (ModelConfig, ParamSet, init_params, input_features, model_backward,
                    model_forward, waveform_grad_to_spectrum)
from .pitch import F0Contour, PitchConfig

LOSS_SPECS = ("quadratic", "phase", "mrstft", "composite")


@dataclass
class ToyProblem:
    stft_cfg: StftConfig
    mr_cfg: MrStftConfig
    features: np.ndarray
    contour: F0Contour
    target: ComplexSpectrogram
    ref: MrStftReference
    out_len: int


def toy_problem(F: int, T: int = 6, seed: int = 0) -> ToyProblem:
    fft = 2 * (F - 1)
    hop = max(1, fft // 4)
    cfg = StftConfig(fft_size=fft, win_size=fft, hop=hop)
    out_len = (T - 1) * hop
    rng = np.random.default_rng(seed)
    while True:
        y = rng.standard_normal(out_len)
        S = stft(y, cfg)
        if S.magnitude().min() > 0.1:
            break
    voiced = np.zeros(T, dtype=bool)
    voiced[: (T + 1) // 2] = True
    rng.shuffle(voiced)
    f0 = np.where(voiced, rng.uniform(80.0, 400.0, T), 0.0)
    contour = F0Contour(f0, voiced, hop, cfg.sample_rate)
    mr = MrStftConfig(((max(4, fft // 2), max(1, hop // 2), max(4, fft // 2)),
                       (fft, hop, fft),
                       (2 * fft, 2 * hop, 2 * fft)))
    return ToyProblem(cfg, mr, input_features(S), contour, S,
                      MrStftReference.build(y, mr), out_len)


def loss_and_spectrum_grad(prob: ToyProblem, p: ParamSet, loss_spec: str,
                           weights: LossWeights = LossWeights(lambda_adv=0.0)):
    S_hat, y_hat, rec = model_forward(prob.features, prob.contour, p, prob.out_len,
                                      prob.stft_cfg, PitchConfig())
    if loss_spec == "quadratic":
        L = 0.5 * float(np.sum(S_hat.real ** 2 + S_hat.imag ** 2))
        return L, np.stack([S_hat.real, S_hat.imag], axis=-1), rec
    L = 0.0
    g = np.zeros(S_hat.shape + (2,))
    if loss_spec in ("phase", "composite"):
        lam = 1.0 if loss_spec == "phase" else weights.lambda_phase
        lp, gp = phase_loss(S_hat, prob.target)
        L += lam * lp
        g += lam * gp
    if loss_spec in ("mrstft", "composite"):
        lam = 1.0 if loss_spec == "mrstft" else weights.lambda_stft
        ls, gw = mr_stft_loss(y_hat, prob.ref)
        L += lam * ls
        g += lam * waveform_grad_to_spectrum(gw, rec)
    if loss_spec not in LOSS_SPECS:
        raise ValueError(f"unknown loss spec {loss_spec!r}; choose from {LOSS_SPECS}")
    return L, g, rec


def relative_error(ga: float, gn: float) -> float:
    return abs(ga - gn) / max(abs(ga), abs(gn), 1e-8)


def check_gradients(cfg: ModelConfig, loss_spec: str = "composite", T: int = 6,
                    n_coords: int = 200, eps: float = 1e-5, seed: int = 0,
                    details: bool = False):
    """Max relative error between backward and central differences.

    Samples ``n_coords`` coordinates per tensor (all of them when the
    tensor is smaller).  With ``details=True`` also returns the per-tensor
    maxima.
    """
    if T * cfg.d * cfg.F > 100_000:
        raise ValueError("check_gradients is meant for toy sizes (T*d*F <= 1e5)")
    prob = toy_problem(cfg.F, T, seed)
    p = init_params(cfg)
    _, g, rec = loss_and_spectrum_grad(prob, p, loss_spec)
    model_backward(rec, g, p)
    rng = np.random.default_rng(seed + 1)
    worst = {}
    for name in p.names():
        theta = p[name]
        flat = theta.reshape(-1)
        n = flat.size
        idx = np.arange(n) if n <= n_coords else rng.choice(n, n_coords, replace=False)
        ga = p.grads[name].reshape(-1)
        err = 0.0
        for i in idx:
            old = flat[i]
            flat[i] = old + eps
            lp = loss_and_spectrum_grad(prob, p, loss_spec)[0]
            flat[i] = old - eps
            lm = loss_and_spectrum_grad(prob, p, loss_spec)[0]
            flat[i] = old
            err = max(err, relative_error(ga[i], (lp - lm) / (2 * eps)))
        worst[name] = err
    m = max(worst.values())
    return (m, worst) if details else m
