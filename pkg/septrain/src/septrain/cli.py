"""Command-line driver: train, finetune, separate, table."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import SeparationDataset
from .finetune import finetune
from .models import MODEL_KINDS, build_model
from .separate import load_part_models, write_estimates
from .train import TOY_WIDTHS, TrainConfig, train


def _train_config(args) -> TrainConfig:
    overrides = {}
    if args.epochs is not None:
        overrides["max_epochs"] = args.epochs
    if args.steps is not None:
        overrides["steps_per_epoch"] = args.steps
    overrides["seed"] = args.seed
    overrides["device"] = args.device
    return TrainConfig.toy(**overrides) if args.toy else TrainConfig(**overrides)


def cmd_train(args) -> int:
    dataset = SeparationDataset.load(args.manifest)
    cfg = _train_config(args)
    parts = args.parts.split(",") if args.parts else dataset.parts
    widths = TOY_WIDTHS[args.model] if args.toy else {}
    for part in parts:
        model = build_model(args.model, **widths)
        ckpt, history = train(model, dataset, part, cfg, args.out)
        print(f"{part}: best valid {min(h.valid_loss for h in history):.5f} -> {ckpt}")
    return 0


def cmd_finetune(args) -> int:
    cfg = _train_config(args)
    widths = TOY_WIDTHS[args.model] if args.toy else {}
    result = finetune(
        args.checkpoints,
        args.manifest,
        args.ratio,
        cfg,
        args.out,
        model_kind=args.model,
        model_overrides=widths,
        label=args.label,
    )
    print(json.dumps(result, indent=2))
    return 0


def cmd_separate(args) -> int:
    dataset = SeparationDataset.load(args.manifest)
    models = load_part_models(args.checkpoints, device=args.device)
    pieces = [p for p in dataset.pieces if p.split == args.split] if args.split else dataset.pieces
    done = write_estimates(models, dataset, args.out, pieces=pieces, device=args.device)
    print(f"wrote estimates for {len(done)} piece(s) to {args.out}")
    return 0


def cmd_table(args) -> int:
    """Render fine-tuning result JSONs as a pretraining-by-ratio grid."""
    rows: dict[str, dict[float, float]] = {}
    for path in args.results:
        doc = json.loads(Path(path).read_text())
        rows.setdefault(doc["pretrain"], {})[doc["ratio"]] = doc["average_median"]
    ratios = sorted({r for cells in rows.values() for r in cells})
    header = ["Pretraining"] + [f"ratio={r:g}" for r in ratios]
    widths = [max(len(header[0]), *(len(k) for k in rows))] + [10] * len(ratios)
    print("Avg. median SDR (dB) by fine-tuning ratio")
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for name, cells in rows.items():
        line = [name.ljust(widths[0])]
        for i, r in enumerate(ratios):
            value = cells.get(r)
            line.append(("n/a" if value is None else f"{value:.2f}").ljust(widths[i + 1]))
        print("  ".join(line))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="septrain", description="Toy-scale separation training over rendered corpora."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--toy", action="store_true", help="desk-scale widths and schedule")
        p.add_argument("--epochs", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--device", default="cpu")

    p = sub.add_parser("train", help="train one model per part on a manifest")
    p.add_argument("manifest")
    p.add_argument("--model", choices=sorted(MODEL_KINDS), default="spec_unet")
    p.add_argument("--parts", help="comma-separated subset (default: all)")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finetune", help="ratio-split fine-tune and evaluate")
    p.add_argument("manifest")
    p.add_argument("--checkpoints", help="pretrained checkpoint dir (omit to train from scratch)")
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--model", choices=sorted(MODEL_KINDS), default="spec_unet")
    p.add_argument("--label", help="name for the pretraining condition in results")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("separate", help="write estimates for manifest pieces")
    p.add_argument("manifest")
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("table", help="render finetune result JSONs as a grid")
    p.add_argument("results", nargs="+")
    p.set_defaults(func=cmd_table)

    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
