"""The four separation models behind one small interface.

Every model maps a mixture waveform to a one-part estimate:

    training_loss(mixture, target) -> scalar tensor (model's native loss)
    separate(mixture) -> estimated waveform, same length as the input

Spectrogram models work on magnitude masks and reuse the mixture phase
for synthesis; time-domain models map waveforms end to end.
"""
from __future__ import annotations

from dataclasses import asdict

from .base import SeparationModel
from .conv_tasnet import ConvTasNet, ConvTasNetConfig
from .res_unet import ResUNet, ResUNetConfig
from .spec_unet import SpecUNet, SpecUNetConfig
from .wave_unet import WaveUNet, WaveUNetConfig

MODEL_KINDS = {
    "spec_unet": (SpecUNet, SpecUNetConfig),
    "res_unet": (ResUNet, ResUNetConfig),
    "wave_unet": (WaveUNet, WaveUNetConfig),
    "conv_tasnet": (ConvTasNet, ConvTasNetConfig),
}


def build_model(kind: str, config=None, **overrides) -> SeparationModel:
    """Construct a model by kind name, optionally overriding config fields."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r} (have {sorted(MODEL_KINDS)})")
    cls, cfg_cls = MODEL_KINDS[kind]
    if config is None:
        config = cfg_cls(**overrides)
    elif overrides:
        config = cfg_cls(**{**asdict(config), **overrides})
    return cls(config)


def config_class(kind: str):
    return MODEL_KINDS[kind][1]


__all__ = [
    "ConvTasNet",
    "ConvTasNetConfig",
    "MODEL_KINDS",
    "ResUNet",
    "ResUNetConfig",
    "SeparationModel",
    "SpecUNet",
    "SpecUNetConfig",
    "WaveUNet",
    "WaveUNetConfig",
    "build_model",
    "config_class",
]
