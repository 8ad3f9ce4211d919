"""Transfer protocol: ratio-split a target corpus, fine-tune, evaluate.

The evaluation side goes through the dataset toolkit's own CLI (`choralforge
eval`) against a derived manifest whose test split holds the evaluation
pieces, so the reported numbers use exactly the median-SDR protocol.
"""
from __future__ import annotations

import json
import os
import subprocess
from pathlib import Path
from typing import Optional

from .data import SeparationDataset, split_ids
from .models import build_model
from .separate import load_part_models, write_estimates
from .train import TrainConfig, train

EVAL_CLI = "choralforge"


def derive_split_manifest(manifest_path, train_ids: list[str], out_path) -> Path:
    """Copy a manifest with splits rewritten (train ids -> train, rest -> test).

    Audio paths are re-based relative to the new manifest's directory, so the
    original files are referenced in place.
    """
    manifest_path = Path(manifest_path)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    doc = json.loads(manifest_path.read_text())
    old_root, new_root = manifest_path.parent, out_path.parent
    train_set = set(train_ids)

    def rebase(rel: str) -> str:
        return os.path.relpath(old_root / rel, new_root)

    for row in doc["pieces"]:
        row["split"] = "train" if row["id"] in train_set else "test"
        row["mixture"] = rebase(row["mixture"])
        row["stems"] = {part: rebase(rel) for part, rel in row["stems"].items()}
    out_path.write_text(json.dumps(doc, indent=2) + "\n")
    return out_path


def run_eval_cli(manifest_path, estimates_dir, metric: str = "sdr") -> dict:
    """Invoke the median-SDR evaluation command and parse its JSON result."""
    proc = subprocess.run(
        [
            EVAL_CLI,
            "--format",
            "json",
            "eval",
            str(manifest_path),
            "--estimates",
            str(estimates_dir),
            "--metric",
            metric,
        ],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"{EVAL_CLI} eval failed ({proc.returncode}): {proc.stderr or proc.stdout}")
    return json.loads(proc.stdout)


def finetune(
    checkpoint_dir: Optional[str],
    manifest_path,
    ratio: float,
    cfg: TrainConfig,
    out_dir,
    model_kind: str = "spec_unet",
    model_overrides: Optional[dict] = None,
    parts: Optional[list[str]] = None,
    label: Optional[str] = None,
    lr: Optional[float] = None,
) -> dict:
    """Fine-tune (or train from scratch when checkpoint_dir is None).

    Splits the target pieces by `ratio` with cfg.seed, trains each part at
    the fine-tune learning rate (scratch runs default to the full training
    rate instead), writes estimates for the evaluation pieces and returns
    the parsed evaluation report plus run metadata.
    """
    out_dir = Path(out_dir)
    source = SeparationDataset.load(manifest_path)
    train_ids, eval_ids = split_ids([p.id for p in source.pieces], ratio, seed=cfg.seed)
    if not train_ids:
        raise ValueError(f"ratio {ratio} leaves no training piece for {len(source.pieces)} ids")

    derived = derive_split_manifest(manifest_path, train_ids, out_dir / "target_manifest.json")
    dataset = SeparationDataset.load(derived)
    part_names = parts or dataset.parts
    if lr is None:
        lr = cfg.finetune_lr if checkpoint_dir else cfg.lr

    pretrained = load_part_models(checkpoint_dir) if checkpoint_dir else {}
    ckpt_dir = out_dir / "checkpoints"
    for part in part_names:
        if checkpoint_dir:
            if part not in pretrained:
                raise ValueError(f"no pretrained checkpoint for part {part!r}")
            model = pretrained[part]
        else:
            model = build_model(model_kind, **(model_overrides or {}))
        train(model, dataset, part, cfg, ckpt_dir, lr=lr, valid_split="train")

    models = load_part_models(ckpt_dir, device=cfg.device)
    est_dir = out_dir / "estimates"
    eval_pieces = [p for p in dataset.pieces if p.id in set(eval_ids)]
    write_estimates(models, dataset, est_dir, pieces=eval_pieces, device=cfg.device)

    report = run_eval_cli(derived, est_dir)
    result = {
        "pretrain": label or (str(checkpoint_dir) if checkpoint_dir else "none"),
        "ratio": ratio,
        "train_pieces": len(train_ids),
        "eval_pieces": len(eval_ids),
        "average_median": report["average_median"],
        "parts": report["parts"],
        "checkpoints": str(ckpt_dir),
    }
    (out_dir / "result.json").write_text(json.dumps(result, indent=2) + "\n")
    return result
