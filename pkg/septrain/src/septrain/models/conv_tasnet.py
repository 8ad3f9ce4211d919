"""Learned-basis time-domain separator with a dilated temporal conv mask net.

Hyperparameter names follow the usual convention: N encoder filters of
length L, bottleneck width B, conv width H, kernel P, X blocks per repeat,
R repeats. Single-source output; trained with negative SI-SDR.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..losses import neg_si_sdr
from .base import SeparationModel


@dataclass(frozen=True)
class ConvTasNetConfig:
    N: int = 512
    L: int = 20
    B: int = 128
    H: int = 512
    P: int = 3
    R: int = 3
    X: int = 8

    def __post_init__(self):
        for name in ("N", "L", "B", "H", "P", "R", "X"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.L % 2:
            raise ValueError("L must be even (stride is L/2)")


class GlobalLayerNorm(nn.Module):
    """Normalize over channels and time with per-channel affine."""

    def __init__(self, channels: int, eps: float = 1e-8):
        super().__init__()
        self.gamma = nn.Parameter(torch.ones(1, channels, 1))
        self.beta = nn.Parameter(torch.zeros(1, channels, 1))
        self.eps = eps

    def forward(self, x):
        mean = x.mean(dim=(1, 2), keepdim=True)
        var = x.var(dim=(1, 2), keepdim=True, unbiased=False)
        return self.gamma * (x - mean) / torch.sqrt(var + self.eps) + self.beta


class TemporalBlock(nn.Module):
    def __init__(self, B: int, H: int, P: int, dilation: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv1d(B, H, 1),
            nn.PReLU(),
            GlobalLayerNorm(H),
            nn.Conv1d(H, H, P, dilation=dilation, padding=dilation * (P - 1) // 2, groups=H),
            nn.PReLU(),
            GlobalLayerNorm(H),
            nn.Conv1d(H, B, 1),
        )

    def forward(self, x):
        return x + self.net(x)


class ConvTasNet(SeparationModel):
    kind = "conv_tasnet"

    def __init__(self, config: ConvTasNetConfig = ConvTasNetConfig()):
        super().__init__()
        self.config = config
        c = config
        self.encoder = nn.Conv1d(1, c.N, c.L, stride=c.L // 2, bias=False)
        self.input_norm = GlobalLayerNorm(c.N)
        self.bottleneck = nn.Conv1d(c.N, c.B, 1)
        self.tcn = nn.Sequential(
            *[TemporalBlock(c.B, c.H, c.P, 2**x) for _ in range(c.R) for x in range(c.X)]
        )
        self.mask_head = nn.Sequential(nn.PReLU(), nn.Conv1d(c.B, c.N, 1))
        self.decoder = nn.ConvTranspose1d(c.N, 1, c.L, stride=c.L // 2, bias=False)

    def forward(self, wave: torch.Tensor) -> torch.Tensor:
        """[B, T] -> [B, T]."""
        c = self.config
        length = wave.shape[-1]
        stride = c.L // 2
        # pad so at least one encoder frame fits and frames tile exactly
        padded = max(length, c.L)
        padded += (-(padded - c.L)) % stride
        x = F.pad(wave.unsqueeze(1), (0, padded - length))
        latent = F.relu(self.encoder(x))
        mask = torch.sigmoid(self.mask_head(self.tcn(self.bottleneck(self.input_norm(latent)))))
        out = self.decoder(latent * mask)
        return out.squeeze(1)[..., :length]

    def training_loss(self, mixture: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
        return neg_si_sdr(self(mixture), target)

    @torch.no_grad()
    def separate(self, mixture: torch.Tensor) -> torch.Tensor:
        return self(mixture)
