"""The training recipe: segment sampling, Adam, plateau decay, early stop.

One model is trained per voice part. Checkpoints hold the model kind and
config so they can be rebuilt without the original script arguments.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .data import SegmentSampler, SeparationDataset, fixed_validation_set
from .models import SeparationModel, build_model, config_class
from .schedule import EarlyStopper, PlateauScheduler


@dataclass(frozen=True)
class TrainConfig:
    batch: int = 8
    lr: float = 1e-3
    finetune_lr: float = 1e-4
    steps_per_epoch: int = 700
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    plateau_factor: float = 0.65
    plateau_patience: int = 3
    early_stop_patience: int = 10
    max_epochs: int = 300
    segment_s: float = 2.0
    valid_segments: int = 32
    device: str = "cpu"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.finetune_lr < self.lr:
            raise ValueError("fine-tune lr must be positive and below the pretrain lr")
        for name in ("batch", "steps_per_epoch", "max_epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def toy(cls, **overrides) -> "TrainConfig":
        """Desk-scale profile; published defaults stay the documented baseline."""
        base = dict(steps_per_epoch=50, max_epochs=8, valid_segments=16)
        base.update(overrides)
        return cls(**base)


# model widths used by the --toy CLI profile (dropout off: desk-scale runs
# are optimization-limited, not overfitting-limited)
TOY_WIDTHS = {
    "spec_unet": {"base_channels": 4, "max_channels": 64, "dropout": 0.0},
    "res_unet": {"base_channels": 2, "max_channels": 32},
    "wave_unet": {"min_channels": 4, "max_channels": 64},
    "conv_tasnet": {"N": 32, "L": 20, "B": 16, "H": 32, "P": 3, "R": 1, "X": 4},
}


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float
    lr: float

    def to_dict(self):
        return asdict(self)


def _to_batch(arrays: tuple[np.ndarray, np.ndarray], device: str):
    mixture, target = arrays
    return (
        torch.from_numpy(np.ascontiguousarray(mixture)).to(device),
        torch.from_numpy(np.ascontiguousarray(target)).to(device),
    )


def save_checkpoint(path, model: SeparationModel, part: str, extra: Optional[dict] = None):
    """Atomic write: temp file then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "kind": model.kind,
        "config": asdict(model.config),
        "part": part,
        "model_state": model.state_dict(),
    }
    if extra:
        payload.update(extra)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(path, device: str = "cpu") -> tuple[SeparationModel, dict]:
    payload = torch.load(path, map_location=device, weights_only=False)
    cfg_cls = config_class(payload["kind"])
    cfg_doc = dict(payload["config"])
    # nested dataclasses come back as dicts
    if "stft" in cfg_doc and isinstance(cfg_doc["stft"], dict):
        from .dsp import StftSpec

        cfg_doc["stft"] = StftSpec(**cfg_doc["stft"])
    if "betas" in cfg_doc:
        cfg_doc["betas"] = tuple(cfg_doc["betas"])
    model = build_model(payload["kind"], cfg_cls(**cfg_doc))
    model.load_state_dict(payload["model_state"])
    model.to(device)
    return model, payload


def _validation_loss(model: SeparationModel, valid, device: str) -> float:
    mixture, target = valid
    model.eval()
    with torch.no_grad():
        total, count = 0.0, 0
        batch = 8
        for lo in range(0, len(mixture), batch):
            m = torch.from_numpy(mixture[lo : lo + batch]).to(device)
            t = torch.from_numpy(target[lo : lo + batch]).to(device)
            total += float(model.training_loss(m, t)) * len(m)
            count += len(m)
    model.train()
    return total / count


def train(
    model: SeparationModel,
    dataset: SeparationDataset,
    part: str,
    cfg: TrainConfig,
    out_dir,
    lr: Optional[float] = None,
    valid_split: str = "valid",
) -> tuple[Path, list[EpochRecord]]:
    """Run the recipe; returns (best checkpoint path, per-epoch history).

    Validation uses a frozen segment bank from `valid_split` (falling back
    to held-out draws from the train split when that split is empty). The
    best-validation checkpoint wins; training aborts on non-finite loss.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.seed)
    device = cfg.device
    model.to(device)
    model.train()

    sampler = SegmentSampler(dataset, part, "train", cfg.segment_s, seed=cfg.seed)
    if not dataset.by_split(valid_split):
        valid_split = "train"
    valid = fixed_validation_set(
        dataset, part, valid_split, cfg.segment_s, cfg.valid_segments, seed=cfg.seed + 1
    )

    opt = torch.optim.Adam(model.parameters(), lr=lr or cfg.lr, betas=cfg.betas, eps=cfg.eps)
    scheduler = PlateauScheduler(opt, factor=cfg.plateau_factor, patience=cfg.plateau_patience)
    stopper = EarlyStopper(patience=cfg.early_stop_patience)

    ckpt_path = out_dir / f"{model.kind}_{part}.pt"
    history: list[EpochRecord] = []
    best_valid = math.inf
    batches = sampler.batches(cfg.batch)

    for epoch in range(cfg.max_epochs):
        running = 0.0
        for _ in range(cfg.steps_per_epoch):
            mixture, target = _to_batch(next(batches), device)
            opt.zero_grad()
            loss = model.training_loss(mixture, target)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch} (part {part})"
                )
            loss.backward()
            opt.step()
            running += float(loss.detach())
        train_loss = running / cfg.steps_per_epoch
        valid_loss = _validation_loss(model, valid, device)
        history.append(EpochRecord(epoch, train_loss, valid_loss, scheduler.lr))
        if valid_loss < best_valid:
            best_valid = valid_loss
            save_checkpoint(
                ckpt_path, model, part, extra={"epoch": epoch, "valid_loss": valid_loss}
            )
        scheduler.step(valid_loss)
        if stopper.step(valid_loss):
            break

    if not ckpt_path.exists():  # every epoch diverged upward; keep the last state
        save_checkpoint(ckpt_path, model, part)
    (out_dir / f"history_{model.kind}_{part}.json").write_text(
        json.dumps([r.to_dict() for r in history], indent=2) + "\n"
    )
    return ckpt_path, history
