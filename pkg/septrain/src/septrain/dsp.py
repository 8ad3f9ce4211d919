"""STFT analysis/synthesis shared by the spectrogram-domain models."""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class StftSpec:
    window_size: int = 2048
    fft_size: int = 2048
    hop: int = 441

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1


def stft(wave: torch.Tensor, spec: StftSpec = StftSpec()) -> torch.Tensor:
    """[B, T] -> complex [B, bins, frames], no centering (frame k starts at k*hop)."""
    window = torch.hann_window(spec.window_size, device=wave.device, dtype=wave.dtype)
    return torch.stft(
        wave,
        n_fft=spec.fft_size,
        hop_length=spec.hop,
        win_length=spec.window_size,
        window=window,
        center=False,
        return_complex=True,
    )


def istft(complex_spec: torch.Tensor, length: int, spec: StftSpec = StftSpec()) -> torch.Tensor:
    """Weighted overlap-add inverse of `stft` (window-squared normalization)."""
    real = torch.fft.irfft(complex_spec, n=spec.fft_size, dim=1)[:, : spec.window_size, :]
    window = torch.hann_window(spec.window_size, device=real.device, dtype=real.dtype)
    weighted = real * window[None, :, None]
    n_frames = real.shape[-1]
    span = (n_frames - 1) * spec.hop + spec.window_size
    out = F.fold(
        weighted,
        output_size=(1, span),
        kernel_size=(1, spec.window_size),
        stride=(1, spec.hop),
    ).reshape(real.shape[0], span)
    norm = F.fold(
        (window**2).expand(n_frames, -1).T.unsqueeze(0),
        output_size=(1, span),
        kernel_size=(1, spec.window_size),
        stride=(1, spec.hop),
    ).reshape(1, span)
    out = out / norm.clamp_min(1e-12)
    if span >= length:
        return out[:, :length]
    return F.pad(out, (0, length - span))
