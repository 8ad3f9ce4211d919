"""septrain: toy-scale separation models, the training recipe, and the
pretrain/fine-tune transfer harness, over rendered choral corpora."""

from .data import SegmentSampler, SeparationDataset, split_ids
from .dsp import StftSpec
from .finetune import finetune
from .losses import mae, mse, neg_si_sdr
from .models import (
    ConvTasNet,
    ConvTasNetConfig,
    ResUNet,
    ResUNetConfig,
    SpecUNet,
    SpecUNetConfig,
    WaveUNet,
    WaveUNetConfig,
    build_model,
)
from .schedule import EarlyStopper, PlateauScheduler
from .separate import load_part_models, separate_waveform, write_estimates
from .train import TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "ConvTasNet",
    "ConvTasNetConfig",
    "EarlyStopper",
    "PlateauScheduler",
    "ResUNet",
    "ResUNetConfig",
    "SegmentSampler",
    "SeparationDataset",
    "SpecUNet",
    "SpecUNetConfig",
    "StftSpec",
    "TrainConfig",
    "WaveUNet",
    "WaveUNetConfig",
    "build_model",
    "finetune",
    "load_checkpoint",
    "load_part_models",
    "mae",
    "mse",
    "neg_si_sdr",
    "save_checkpoint",
    "separate_waveform",
    "split_ids",
    "train",
    "write_estimates",
]
