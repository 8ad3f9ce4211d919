"""Residual U-Net variant: residual conv blocks in both halves.

Ten residual encoder blocks (the first six downsample, the rest deepen the
bottleneck at constant resolution) and six residual decoder blocks back to
full resolution, so the mask shape matches the input spectrogram.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..dsp import StftSpec
from .base import SpectrogramMaskModel


@dataclass(frozen=True)
class ResUNetConfig:
    down_blocks: int = 10
    up_blocks: int = 6
    base_channels: int = 16
    max_channels: int = 384
    stft: StftSpec = field(default_factory=StftSpec)

    def __post_init__(self):
        if self.up_blocks > self.down_blocks:
            raise ValueError("cannot upsample more than was downsampled")


class ResBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1, transpose: bool = False):
        super().__init__()
        if transpose:
            conv1 = nn.ConvTranspose2d(c_in, c_out, 3, stride=stride, padding=1, output_padding=1)
        else:
            conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1)
        self.body = nn.Sequential(
            conv1,
            nn.BatchNorm2d(c_out),
            nn.LeakyReLU(0.2),
            nn.Conv2d(c_out, c_out, 3, padding=1),
            nn.BatchNorm2d(c_out),
        )
        if transpose:
            shortcut = nn.ConvTranspose2d(c_in, c_out, 1, stride=stride, output_padding=1)
        elif stride != 1 or c_in != c_out:
            shortcut = nn.Conv2d(c_in, c_out, 1, stride=stride)
        else:
            shortcut = nn.Identity()
        self.shortcut = shortcut
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        return self.act(self.body(x) + self.shortcut(x))


class ResUNet(SpectrogramMaskModel):
    kind = "res_unet"

    def __init__(self, config: ResUNetConfig = ResUNetConfig()):
        super().__init__()
        self.config = config
        n_strided = config.up_blocks
        chans, c = [], config.base_channels
        for i in range(config.down_blocks):
            chans.append(c)
            if i < n_strided - 1:
                c = min(c * 2, config.max_channels)
        self.down = nn.ModuleList()
        c_in = 1
        for i, c_out in enumerate(chans):
            stride = 2 if i < n_strided else 1
            self.down.append(ResBlock(c_in, c_out, stride=stride))
            c_in = c_out
        self.up = nn.ModuleList()
        for i in reversed(range(n_strided)):
            c_out = chans[i - 1] if i > 0 else config.base_channels
            skip = chans[i] if i < n_strided - 1 else 0
            self.up.append(ResBlock(c_in + skip, c_out, stride=2, transpose=True))
            c_in = c_out
        self.head = nn.Conv2d(c_in, 1, 1)

    def _pad(self, mag):
        step = 1 << self.config.up_blocks
        f, t = mag.shape[-2], mag.shape[-1]
        return F.pad(mag, (0, (-t) % step, 0, (-f) % step)), (f, t)

    def mask(self, magnitude: torch.Tensor) -> torch.Tensor:
        x, (f, t) = self._pad(self.compress(magnitude))
        n_strided = self.config.up_blocks
        skips = []
        for i, block in enumerate(self.down):
            if i < n_strided:
                skips.append(x)
            x = block(x)
        for i, block in enumerate(self.up):
            if i > 0:
                x = torch.cat([x, skips[n_strided - i]], dim=1)
            x = block(x)
        return torch.sigmoid(self.head(x))[..., :f, :t]

    forward = mask
