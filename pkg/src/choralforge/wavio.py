"""Mono WAV read/write and linear resampling helpers."""
from __future__ import annotations

import numpy as np
from scipy.io import wavfile

_INT_SCALES = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def read_wav(path) -> tuple[int, np.ndarray]:
    """Read a WAV file as (sample_rate, float32 mono in [-1, 1])."""
    rate, data = wavfile.read(path)
    if data.dtype in _INT_SCALES:
        audio = data.astype(np.float32) / _INT_SCALES[data.dtype]
    elif data.dtype == np.uint8:
        audio = (data.astype(np.float32) - 128.0) / 128.0
    else:
        audio = data.astype(np.float32)
    if audio.ndim == 2:
        audio = audio.mean(axis=1)
    return int(rate), audio


def write_wav(path, sample_rate: int, audio: np.ndarray) -> None:
    """Write mono float32 WAV (IEEE float, no clipping applied)."""
    wavfile.write(path, sample_rate, np.asarray(audio, dtype=np.float32))


def resample_linear(audio: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Resample by linear interpolation; identity when rates match."""
    if rate_in == rate_out:
        return np.asarray(audio, dtype=np.float32)
    n_out = int(round(len(audio) * rate_out / rate_in))
    t_out = np.arange(n_out) * (rate_in / rate_out)
    return np.interp(t_out, np.arange(len(audio)), audio).astype(np.float32)
