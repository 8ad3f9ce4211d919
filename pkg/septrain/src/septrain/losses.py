"""Training losses: MAE on magnitudes, MSE on waveforms, negative SI-SDR."""
from __future__ import annotations

import torch
import torch.nn.functional as F

_EPS = 1e-8


def mae(estimate: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return F.l1_loss(estimate, target)


def mse(estimate: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return F.mse_loss(estimate, target)


def neg_si_sdr(estimate: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Negative scale-invariant SDR, averaged over the batch ([B, T] inputs)."""
    scale = (estimate * target).sum(-1, keepdim=True) / (
        (target * target).sum(-1, keepdim=True) + _EPS
    )
    projection = scale * target
    ratio = (projection**2).sum(-1) / ((estimate - projection) ** 2).sum(-1).clamp_min(_EPS)
    return (-10.0 * torch.log10(ratio + _EPS)).mean()
