"""choralforge: synthesize expressive multi-voice choral corpora from
symbolic scores and evaluate source-separation output with median SDR."""

from .dataset import DatasetManifest, MixPolicy, build_dataset, extract_segments, mix, split
from .errors import (
    BankError,
    ChoralforgeError,
    ConfigError,
    MonophonyError,
    RenderError,
    ScoreParseError,
)
from .evalkit import (
    SdrReport,
    Spectrogram,
    StftConfig,
    istft,
    median_sdr,
    oracle_separate,
    sdr,
    si_sdr,
    stft,
)
from .expression import (
    ExpressionConfig,
    ExpressiveNote,
    ExpressivePerformance,
    Phrase,
    make_performance,
)
from .range_transform import (
    PitchRange,
    TransposeSet,
    expand_augmentations,
    octave_fit,
    transpose,
)
from .sampler import RenderConfig, SampleBank, SampleZone, load_bank, render_score, test_bank
from .score_io import Note, Score, VoicePart, parse_midi, parse_text_score, write_midi

__version__ = "0.1.0"

__all__ = [
    "BankError",
    "ChoralforgeError",
    "ConfigError",
    "DatasetManifest",
    "ExpressionConfig",
    "ExpressiveNote",
    "ExpressivePerformance",
    "MixPolicy",
    "MonophonyError",
    "Note",
    "Phrase",
    "PitchRange",
    "RenderConfig",
    "RenderError",
    "SampleBank",
    "SampleZone",
    "Score",
    "ScoreParseError",
    "SdrReport",
    "Spectrogram",
    "StftConfig",
    "TransposeSet",
    "VoicePart",
    "build_dataset",
    "expand_augmentations",
    "extract_segments",
    "istft",
    "load_bank",
    "make_performance",
    "median_sdr",
    "mix",
    "octave_fit",
    "oracle_separate",
    "parse_midi",
    "parse_text_score",
    "render_score",
    "sdr",
    "si_sdr",
    "split",
    "stft",
    "test_bank",
    "transpose",
    "write_midi",
]
