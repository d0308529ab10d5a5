"""Flat ``key = value`` run configuration.

Keys are dotted by section: ``stft.hop``, ``pitch.f0_floor``, ``model.d``,
``train.lr``, ``loss.lambda_adv``, ``mrstft.resolutions``.  Resolutions are
written ``fft:hop:win`` and comma separated.  ``#`` starts a comment.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .dsp import StftConfig
from .losses import LossWeights, MrStftConfig
from .model import ModelConfig
from .pitch import PitchConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    pitch: PitchConfig = field(default_factory=PitchConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    @property
    def loss(self) -> LossWeights:
        return self.train.weights

    @property
    def mrstft(self) -> MrStftConfig:
        return self.train.mrstft


_SECTIONS = {
    "stft": StftConfig,
    "pitch": PitchConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "loss": LossWeights,
}
_NESTED = {"weights", "stft", "pitch", "mrstft"}


def _convert(raw: str, typ, key: str):
    try:
        if typ is bool or typ == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if typ is int or typ == "int":
            return int(raw)
        if typ is float or typ == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ}") from None


def _parse_resolutions(raw: str):
    out = []
    for part in raw.split(","):
        bits = part.strip().split(":")
        if len(bits) != 3:
            raise ConfigError(f"mrstft.resolutions: expected fft:hop:win, got {part.strip()!r}")
        try:
            out.append(tuple(int(b) for b in bits))
        except ValueError:
            raise ConfigError(f"mrstft.resolutions: non-integer entry {part.strip()!r}") from None
    return tuple(out)


def parse_config(text: str) -> RunConfig:
    values: dict[str, dict] = {k: {} for k in _SECTIONS}
    resolutions = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "mrstft.resolutions":
            resolutions = _parse_resolutions(raw)
            continue
        section, _, name = key.partition(".")
        cls = _SECTIONS.get(section)
        if cls is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        ftypes = {f.name: f.type for f in dataclasses.fields(cls) if f.name not in _NESTED}
        if name not in ftypes:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[section][name] = _convert(raw, ftypes[name], key)
    try:
        stft_cfg = StftConfig(**values["stft"])
        pitch_cfg = PitchConfig(**values["pitch"])
        pitch_cfg.validate(stft_cfg.sample_rate)
        model_vals = {"F": stft_cfg.n_bins, **values["model"]}
        model_cfg = ModelConfig(**model_vals)
        weights = LossWeights(**values["loss"])
        mr = MrStftConfig(resolutions) if resolutions else MrStftConfig()
        train_cfg = TrainConfig(**values["train"], weights=weights, stft=stft_cfg,
                                pitch=pitch_cfg, mrstft=mr)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if model_cfg.F != stft_cfg.n_bins:
        raise ConfigError(f"model.F={model_cfg.F} does not match stft bins {stft_cfg.n_bins}")
    return RunConfig(stft_cfg, pitch_cfg, model_cfg, train_cfg)


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(p.read_text())
