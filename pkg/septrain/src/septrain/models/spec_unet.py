"""U-Net over magnitude spectrograms producing a multiplicative mask."""
from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..dsp import StftSpec
from .base import SpectrogramMaskModel


@dataclass(frozen=True)
class SpecUNetConfig:
    down_blocks: int = 7
    up_blocks: int = 7
    base_channels: int = 16
    max_channels: int = 512
    dropout: float = 0.5  # first three decoder blocks
    stft: StftSpec = field(default_factory=StftSpec)

    def __post_init__(self):
        if self.down_blocks != self.up_blocks:
            raise ValueError("encoder/decoder depth must match for skip connections")

    def channels(self) -> list[int]:
        return [min(self.base_channels << i, self.max_channels) for i in range(self.down_blocks)]


class SpecUNet(SpectrogramMaskModel):
    """Strided 5x5 conv encoder, transposed-conv decoder, sigmoid mask output.

    Loss is mean absolute error between the masked mixture magnitude and
    the target magnitude; synthesis reuses the mixture phase.
    """

    kind = "spec_unet"

    def __init__(self, config: SpecUNetConfig = SpecUNetConfig()):
        super().__init__()
        self.config = config
        chans = config.channels()
        self.down = nn.ModuleList()
        c_in = 1
        for c_out in chans:
            self.down.append(
                nn.Sequential(
                    nn.Conv2d(c_in, c_out, kernel_size=5, stride=2, padding=2),
                    nn.BatchNorm2d(c_out),
                    nn.LeakyReLU(0.2),
                )
            )
            c_in = c_out
        self.up = nn.ModuleList()
        for i in reversed(range(len(chans))):
            c_out = chans[i - 1] if i > 0 else 1
            skip = chans[i] if i < len(chans) - 1 else 0  # no skip into the bottom block
            layers = [
                nn.ConvTranspose2d(
                    chans[i] + skip, c_out, kernel_size=5, stride=2, padding=2, output_padding=1
                )
            ]
            if i > 0:
                layers += [nn.BatchNorm2d(c_out), nn.ReLU()]
                if i >= len(chans) - 3 and config.dropout > 0:
                    layers.append(nn.Dropout(config.dropout))
            self.up.append(nn.Sequential(*layers))

    def _pad(self, mag: torch.Tensor) -> tuple[torch.Tensor, tuple[int, int]]:
        step = 1 << self.config.down_blocks
        f, t = mag.shape[-2], mag.shape[-1]
        pad_f = (-f) % step
        pad_t = (-t) % step
        return F.pad(mag, (0, pad_t, 0, pad_f)), (f, t)

    def mask(self, magnitude: torch.Tensor) -> torch.Tensor:
        """[B, 1, bins, frames] magnitude -> mask of the same shape in [0, 1]."""
        x, (f, t) = self._pad(self.compress(magnitude))
        skips = []
        for block in self.down:
            skips.append(x)
            x = block(x)
        for i, block in enumerate(self.up):
            if i > 0:
                x = torch.cat([x, skips[len(skips) - i]], dim=1)
            x = block(x)
        return torch.sigmoid(x)[..., :f, :t]

    forward = mask
