"""Time-domain U-Net: decimating conv encoder, interpolating decoder."""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..losses import mse
from .base import SeparationModel


@dataclass(frozen=True)
class WaveUNetConfig:
    down_layers: int = 6
    up_layers: int = 6
    min_channels: int = 32
    max_channels: int = 1024
    first_kernel: int = 15
    kernel: int = 5

    def __post_init__(self):
        if self.down_layers != self.up_layers:
            raise ValueError("encoder/decoder depth must match for skip connections")

    def channels(self) -> list[int]:
        # 32 -> 1024 doubling across the six layers (scaled for toy widths)
        return [min(self.min_channels << i, self.max_channels) for i in range(self.down_layers)]


class WaveUNet(SeparationModel):
    """Waveform in, waveform out, trained with mean squared error."""

    kind = "wave_unet"

    def __init__(self, config: WaveUNetConfig = WaveUNetConfig()):
        super().__init__()
        self.config = config
        chans = config.channels()
        self.down = nn.ModuleList()
        c_in = 1
        for i, c_out in enumerate(chans):
            k = config.first_kernel if i == 0 else config.kernel
            self.down.append(nn.Conv1d(c_in, c_out, k, padding=k // 2))
            c_in = c_out
        self.bottleneck = nn.Conv1d(c_in, c_in, config.kernel, padding=config.kernel // 2)
        self.up = nn.ModuleList()
        for i in reversed(range(len(chans))):
            skip = chans[i]
            c_out = chans[i - 1] if i > 0 else config.min_channels
            self.up.append(nn.Conv1d(c_in + skip, c_out, config.kernel, padding=config.kernel // 2))
            c_in = c_out
        self.head = nn.Conv1d(c_in + 1, 1, 1)  # final layer sees the input again

    def forward(self, wave: torch.Tensor) -> torch.Tensor:
        """[B, T] -> [B, T]; the input is padded to a decimation-safe length."""
        step = 1 << self.config.down_layers
        length = wave.shape[-1]
        x = F.pad(wave.unsqueeze(1), (0, (-length) % step))
        source = x
        skips = []
        for conv in self.down:
            x = F.leaky_relu(conv(x), 0.2)
            skips.append(x)
            x = x[..., ::2]
        x = F.leaky_relu(self.bottleneck(x), 0.2)
        for i, conv in enumerate(self.up):
            x = F.interpolate(x, scale_factor=2, mode="linear", align_corners=False)
            x = torch.cat([x, skips[len(skips) - 1 - i]], dim=1)
            x = F.leaky_relu(conv(x), 0.2)
        out = self.head(torch.cat([x, source], dim=1))
        return out.squeeze(1)[..., :length]

    def training_loss(self, mixture: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
        return mse(self(mixture), target)

    @torch.no_grad()
    def separate(self, mixture: torch.Tensor) -> torch.Tensor:
        return self(mixture)
