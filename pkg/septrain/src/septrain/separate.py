"""Inference: write per-part estimates in the evaluation directory layout."""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import torch

from .data import Piece, SeparationDataset, read_wav, write_wav
from .models import SeparationModel
from .train import load_checkpoint


def load_part_models(checkpoint_dir, device: str = "cpu") -> dict[str, SeparationModel]:
    """Load every `<kind>_<part>.pt` checkpoint in a directory, keyed by part."""
    checkpoint_dir = Path(checkpoint_dir)
    models = {}
    for path in sorted(checkpoint_dir.glob("*.pt")):
        model, payload = load_checkpoint(path, device)
        model.eval()
        models[payload["part"]] = model
    if not models:
        raise ValueError(f"no checkpoints (*.pt) in {checkpoint_dir}")
    return models


def separate_waveform(
    models: dict[str, SeparationModel], mixture: np.ndarray, device: str = "cpu"
) -> dict[str, np.ndarray]:
    """Estimates for one mixture; every output has the mixture's length."""
    batch = torch.from_numpy(np.ascontiguousarray(mixture, dtype=np.float32)).unsqueeze(0)
    batch = batch.to(device)
    out = {}
    for part, model in models.items():
        est = model.separate(batch)
        out[part] = est.squeeze(0).cpu().numpy().astype(np.float32)
    return out


def write_estimates(
    models: dict[str, SeparationModel],
    dataset: SeparationDataset,
    out_dir,
    pieces: Optional[Iterable[Piece]] = None,
    device: str = "cpu",
) -> list[str]:
    """`estimates/<id>/<part>.wav` for each piece, consumable by the eval CLI."""
    out_dir = Path(out_dir)
    done = []
    for piece in pieces if pieces is not None else dataset.pieces:
        mixture = read_wav(piece.mixture_path)
        estimates = separate_waveform(models, mixture, device)
        piece_dir = out_dir / piece.id
        piece_dir.mkdir(parents=True, exist_ok=True)
        for part, audio in estimates.items():
            write_wav(piece_dir / f"{part}.wav", dataset.sample_rate, audio)
        done.append(piece.id)
    return done
