from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..dsp import istft, stft
from ..losses import mae


class SeparationModel(nn.Module):
    """Common surface: native training loss plus waveform-to-waveform inference."""

    kind: str = ""

    def training_loss(self, mixture: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    @torch.no_grad()
    def separate(self, mixture: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


class SpectrogramMaskModel(SeparationModel):
    """Shared plumbing for models that predict a magnitude mask.

    Training compares the masked mixture magnitude against the target
    magnitude (mean absolute error); inference applies the mask to the
    complex mixture spectrogram, reusing its phase. Subclasses implement
    `mask` and expose the analysis settings as `config.stft`. The conv
    stacks see log-compressed magnitudes (raw STFT magnitudes span too
    wide a dynamic range to learn from directly); the mask still
    multiplies the raw magnitude.
    """

    @staticmethod
    def compress(magnitude: torch.Tensor) -> torch.Tensor:
        return torch.log1p(magnitude)

    def mask(self, magnitude: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def training_loss(self, mixture: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
        cfg = self.config.stft
        mix_mag = stft(mixture, cfg).abs()
        target_mag = stft(target, cfg).abs()
        mask = self.mask(mix_mag.unsqueeze(1)).squeeze(1)
        return mae(mask * mix_mag, target_mag)

    @torch.no_grad()
    def separate(self, mixture: torch.Tensor) -> torch.Tensor:
        # pad one window on each side (plus hop alignment) so short inputs
        # fit and the overlap-add edges stay out of the returned region
        cfg = self.config.stft
        length = mixture.shape[-1]
        pad = cfg.window_size
        total = length + 2 * pad
        total += (-(total - cfg.window_size)) % cfg.hop
        x = F.pad(mixture, (pad, total - length - pad))
        mix_spec = stft(x, cfg)
        mask = self.mask(mix_spec.abs().unsqueeze(1)).squeeze(1)
        out = istft(mix_spec * mask, total, cfg)
        return out[..., pad : pad + length]
