# One-off calibration run for the transfer-ordering experiment (deleted
# after freezing the test). Mirrors tests/test_transfer.py exactly.
import json
import subprocess
import random
import sys
import time
from pathlib import Path

import torch

sys.path.insert(0, "tests")
from conftest import PART_RANGES, random_score_text

from septrain.data import SeparationDataset
from septrain.finetune import finetune
from septrain.models import build_model
from septrain.train import TOY_WIDTHS, TrainConfig, train

ROOT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("/tmp/transfer_cal2")
VOWELS_A = ["a", "o"]
VOWELS_B = ["i", "u"]
PRETRAIN = dict(steps_per_epoch=50, max_epochs=6, valid_segments=16, seed=0)  # 300 steps
FINETUNE = dict(steps_per_epoch=25, max_epochs=6, valid_segments=8, seed=0)  # 150 steps
DYNAMICS = {"velocity_min": 30, "velocity_max": 115}  # expressive corpora only


def build(n_pieces, name, mode, vowels, seed, score_seed, dynamics=None):
    root = ROOT / name
    (root / "scores").mkdir(parents=True, exist_ok=True)
    rng = random.Random(score_seed)
    for i in range(n_pieces):
        (root / "scores" / f"p{i:02d}.txt").write_text(random_score_text(rng, 16.0))
    config = {
        "scores": "scores",
        "output": "data",
        "mode": mode,
        "parts": {p: {"bank": "test"} for p in PART_RANGES},
        "transpose": [0],
        "seed": seed,
        "expression": {"syllable_set": vowels, **(dynamics or {})},
    }
    (root / "pipeline.yaml").write_text(json.dumps(config))
    proc = subprocess.run(
        ["choralforge", "build", str(root / "pipeline.yaml"), "--jobs", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return root / "data" / "manifest.json"


def pretrain(manifest, out_dir):
    dataset = SeparationDataset.load(manifest)
    cfg = TrainConfig.toy(**PRETRAIN)
    for part in dataset.parts:
        torch.manual_seed(cfg.seed)
        model = build_model("spec_unet", **TOY_WIDTHS["spec_unet"])
        train(model, dataset, part, cfg, out_dir)
    return out_dir


def main():
    t0 = time.monotonic()
    src_std = build(8, "src_standard", "standard", VOWELS_A, 11, 500)
    src_exp = build(8, "src_expressive", "expressive", VOWELS_A, 11, 500, DYNAMICS)
    target = build(14, "target", "expressive", VOWELS_B, 23, 900, DYNAMICS)
    print("corpora built", round(time.monotonic() - t0), "s", flush=True)

    ck_std = pretrain(src_std, ROOT / "pre_standard")
    print("standard pretrain done", round(time.monotonic() - t0), "s", flush=True)
    ck_exp = pretrain(src_exp, ROOT / "pre_expressive")
    print("expressive pretrain done", round(time.monotonic() - t0), "s", flush=True)

    cfg = TrainConfig.toy(**FINETUNE)
    results = {}
    for label, ckpt in (("none", None), ("standard", ck_std), ("expressive", ck_exp)):
        torch.manual_seed(cfg.seed)
        results[label] = finetune(
            str(ckpt) if ckpt else None, target, 0.1, cfg, ROOT / f"ft_{label}",
            model_kind="spec_unet", model_overrides=TOY_WIDTHS["spec_unet"], label=label,
        )
        print(label, "avg", round(results[label]["average_median"], 4),
              {k: round(v, 3) for k, v in results[label]["parts"].items()}, flush=True)

    print("total", round(time.monotonic() - t0), "s")
    print(json.dumps({k: v["average_median"] for k, v in results.items()}, indent=2))


if __name__ == "__main__":
    main()
