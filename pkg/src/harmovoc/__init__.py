"""Prosody-guided complex-spectrum vocoder toolkit (numpy, optional numba)."""
from .dsp import (ComplexSpectrogram, MelFilterbank, StftConfig, Waveform, hann_window, istft,
                  mel_cepstrum, mel_energies, mel_filterbank, stft)
from .evaluation import (MetricsReport, evaluate_pair, f0_rmse, griffin_lim, mcd,
                         residual_mel_energy, vuv_error)
from .losses import LossReport, LossWeights, MrStftConfig, adv_losses, mr_stft_loss, phase_loss, total_loss
from .model import (ModelConfig, ParamSet, decoder_forward, encoder_forward, harmonic_attention,
                    init_params, model_backward, model_forward)
from .pitch import F0Contour, PitchConfig, estimate_f0, f0_features
from .training import OptState, SynthClip, TrainConfig, adamw_step, synth_dataset, train

__version__ = "0.1.0"
