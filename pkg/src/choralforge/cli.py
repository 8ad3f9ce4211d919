"""Command-line pipeline driver.

One YAML configuration file feeds every subcommand; flags only select the
action and runtime knobs (jobs, output format). Exit codes: 0 success,
1 configuration/validation error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .dataset import DatasetManifest, MixPolicy, build_dataset, extract_segments, load_piece
from .errors import ChoralforgeError, ConfigError
from .evalkit import METRICS, SdrReport, StftConfig, median_sdr, oracle_separate
from .expression import ExpressionConfig, make_performance
from .range_transform import PitchRange, TransposeSet, default_range, expand_augmentations
from .sampler import RenderConfig, SampleBank, WAVEFORMS, load_bank, test_bank
from .score_io import Score, parse_midi, parse_text_score, write_midi
from .wavio import read_wav, write_wav

CACHE_ENV = "CHORALFORGE_CACHE"


@dataclass
class PartConfig:
    bank: str = "test"
    pitch_range: Optional[PitchRange] = None


@dataclass
class PipelineConfig:
    scores: Path
    output: Path
    parts: dict[str, PartConfig]
    mode: str = "expressive"
    transpose: TransposeSet = TransposeSet()
    expression: ExpressionConfig = ExpressionConfig()
    render: RenderConfig = RenderConfig()
    mix: MixPolicy = MixPolicy()
    split_counts: Optional[list[int]] = None
    split_ratios: Optional[list[float]] = None
    seed: int = 0
    config_dir: Path = field(default_factory=Path)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            doc = yaml.safe_load(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}")
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(doc, config_dir=path.parent)

    @classmethod
    def from_dict(cls, doc: dict, config_dir: Path = Path(".")) -> "PipelineConfig":
        known = {
            "scores", "output", "parts", "mode", "transpose", "expression",
            "render", "mix", "split", "seed",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("scores", "output", "parts"):
            if key not in doc:
                raise ConfigError(f"config missing required key {key!r}")

        mode = doc.get("mode", "expressive")
        if mode not in ("standard", "expressive"):
            raise ConfigError(f"mode must be standard or expressive, got {mode!r}")

        parts = {}
        for name, spec in doc["parts"].items():
            spec = spec or {}
            if not isinstance(spec, dict):
                raise ConfigError(f"part {name!r}: expected a mapping")
            rng = None
            if "range" in spec:
                lo, hi = spec["range"]
                rng = PitchRange(int(lo), int(hi))
            parts[name] = PartConfig(bank=str(spec.get("bank", "test")), pitch_range=rng)
        if not parts:
            raise ConfigError("config declares no parts")

        transpose = doc.get("transpose", list(range(-3, 4)))
        if not isinstance(transpose, list) or not all(isinstance(t, int) for t in transpose):
            raise ConfigError("transpose must be a list of integer semitone offsets")

        split_counts = split_ratios = None
        split_doc = doc.get("split")
        if split_doc:
            if "counts" in split_doc:
                split_counts = [int(c) for c in split_doc["counts"]]
            elif "ratios" in split_doc:
                split_ratios = [float(r) for r in split_doc["ratios"]]
            else:
                raise ConfigError("split section needs counts or ratios")

        seed = int(doc.get("seed", 0))
        try:
            expression = ExpressionConfig(
                **{**doc.get("expression", {}), "seed": seed,
                   **_tupled(doc.get("expression", {}), "curve_types", "syllable_set")}
            )
            render = RenderConfig(**doc.get("render", {}))
            policy = MixPolicy(**doc.get("mix", {}))
        except TypeError as exc:
            raise ConfigError(f"bad config section: {exc}")

        return cls(
            scores=(config_dir / doc["scores"]).resolve(),
            output=(config_dir / doc["output"]).resolve(),
            parts=parts,
            mode=mode,
            transpose=TransposeSet(tuple(transpose)),
            expression=expression,
            render=render,
            mix=policy,
            split_counts=split_counts,
            split_ratios=split_ratios,
            seed=seed,
            config_dir=config_dir,
        )

    def part_ranges(self) -> dict[str, PitchRange]:
        return {
            name: pc.pitch_range if pc.pitch_range else default_range(name)
            for name, pc in self.parts.items()
        }


def _tupled(section: dict, *keys: str) -> dict:
    return {k: tuple(section[k]) for k in keys if k in section}


def load_scores(directory: Path) -> list[tuple[str, Score]]:
    """Read every .mid/.midi/.txt score in a directory, sorted by name."""
    if not directory.is_dir():
        raise ConfigError(f"score directory not found: {directory}")
    out = []
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() in (".mid", ".midi"):
            out.append((path.stem, parse_midi(path.read_bytes())))
        elif path.suffix.lower() == ".txt":
            out.append((path.stem, parse_text_score(path.read_text())))
    if not out:
        raise ConfigError(f"no score files (.mid/.midi/.txt) in {directory}")
    return out


def build_banks(cfg: PipelineConfig) -> dict[str, SampleBank]:
    cache_dir = os.environ.get(CACHE_ENV)
    banks = {}
    for name, pc in cfg.parts.items():
        if pc.bank == "test" or pc.bank.startswith("test:"):
            waveform = pc.bank.partition(":")[2] or None
            if waveform is not None and waveform not in WAVEFORMS:
                raise ConfigError(f"part {name!r}: unknown test waveform {waveform!r}")
            banks[name] = test_bank(
                name,
                cfg.expression.syllable_set,
                pitch_range=pc.pitch_range,
                waveform=waveform,
                sample_rate=cfg.render.sample_rate,
            )
        else:
            bank_dir = (cfg.config_dir / pc.bank).resolve()
            if not bank_dir.is_dir():
                raise ConfigError(f"part {name!r}: bank directory not found: {bank_dir}")
            banks[name] = _load_bank_cached(
                bank_dir, cfg.render.sample_rate, cfg.expression.syllable_set, cache_dir
            )
    return banks


def _load_bank_cached(bank_dir: Path, sample_rate: int, syllables, cache_dir) -> SampleBank:
    # cache keyed by description bytes + wav stat so edits invalidate
    if not cache_dir:
        return load_bank(bank_dir, sample_rate, syllables)
    h = hashlib.sha256()
    h.update((bank_dir / "bank.json").read_bytes())
    for wav in sorted(bank_dir.glob("*.wav")):
        stat = wav.stat()
        h.update(f"{wav.name}:{stat.st_size}:{stat.st_mtime_ns}".encode())
    h.update(str(sample_rate).encode())
    key = h.hexdigest()
    marker = Path(cache_dir) / f"bank_{key}.ok"
    bank = load_bank(bank_dir, sample_rate, syllables)
    if not marker.exists():
        marker.parent.mkdir(parents=True, exist_ok=True)
        marker.write_text(bank.name + "\n")
    return bank


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> dict:
    cfg = PipelineConfig.load(args.config)
    scores = load_scores(cfg.scores)
    build_banks(cfg)
    result = {
        "config": str(args.config),
        "pieces": len(scores),
        "parts": sorted(cfg.parts),
        "renditions": len(scores) * len(cfg.transpose),
        "mode": cfg.mode,
    }
    if not args.json:
        print(
            f"config ok: {result['pieces']} piece(s) x {len(cfg.transpose)} offset(s) "
            f"= {result['renditions']} rendition(s), mode {cfg.mode}"
        )
    return result


def cmd_build(args) -> dict:
    cfg = PipelineConfig.load(args.config)
    scores = load_scores(cfg.scores)
    banks = build_banks(cfg)

    if args.dry_run:
        planned = [
            f"{pid}_t{k:+d}" for pid, _ in scores for k in cfg.transpose
        ]
        if not args.json:
            for rid in planned:
                print(f"plan  {rid}")
            print(f"{len(planned)} rendition(s) -> {cfg.output} (dry run, nothing written)")
        return {"planned": planned, "output": str(cfg.output), "dry_run": True}

    def progress(entry):
        if not args.json:
            mark = "ok  " if entry.status == "ok" else "FAIL"
            print(f"{mark}  {entry.id}  {entry.duration_s:.1f}s")

    manifest = build_dataset(
        scores,
        banks,
        cfg.output,
        mode=cfg.mode,
        transpose_set=cfg.transpose,
        ranges=cfg.part_ranges(),
        expression_cfg=cfg.expression,
        render_cfg=cfg.render,
        mix_policy=cfg.mix,
        split_counts=cfg.split_counts,
        split_ratios=cfg.split_ratios,
        seed=cfg.seed,
        jobs=args.jobs,
        progress=progress,
    )
    ok = [p for p in manifest.pieces if p.status == "ok"]
    failed = [p for p in manifest.pieces if p.status != "ok"]
    minutes = sum(p.duration_s for p in ok) / 60.0
    if not args.json:
        print(f"built {len(ok)} piece(s), {minutes:.1f} min audio, {len(failed)} failure(s)")
        print(f"manifest: {cfg.output / 'manifest.json'}")
    if failed:
        raise RuntimeError(
            f"{len(failed)} piece(s) failed: " + ", ".join(p.id for p in failed)
        )
    return {
        "manifest": str(cfg.output / "manifest.json"),
        "pieces": len(ok),
        "minutes": round(minutes, 3),
    }


def _print_report_table(report: SdrReport):
    names = list(report.parts)
    headers = [n.capitalize() for n in names] + ["Avg."]
    cells = []
    for name in names:
        median = report.parts[name].median
        cells.append("n/a" if median is None else f"{median:.2f}")
    cells.append("n/a" if report.average_median is None else f"{report.average_median:.2f}")
    width = max(len(h) for h in headers + cells) + 2
    print(f"Median {report.metric.upper()} (dB)")
    print("".join(h.ljust(width) for h in headers))
    print("".join(c.ljust(width) for c in cells))


def _load_eval_pairs(manifest: DatasetManifest, estimates_dir: Path, split_name: str):
    entries = manifest.by_split(split_name)
    if not entries:
        raise RuntimeError(f"manifest has no '{split_name}' pieces to evaluate")
    missing = [
        str(estimates_dir / entry.id / f"{part}.wav")
        for entry in entries
        for part in entry.stems
        if not (estimates_dir / entry.id / f"{part}.wav").exists()
    ]
    if missing:
        raise RuntimeError("missing estimate file(s):\n  " + "\n  ".join(missing))
    references, estimates, ids = [], [], []
    for entry in entries:
        _, stems = load_piece(manifest, entry)
        est = {}
        for part in stems:
            _, audio = read_wav(estimates_dir / entry.id / f"{part}.wav")
            n = min(len(stems[part]), len(audio))
            stems[part], est[part] = stems[part][:n], audio[:n]
        references.append(stems)
        estimates.append(est)
        ids.append(entry.id)
    return references, estimates, ids


def _write_oracle_estimates(manifest, entries, out_dir: Path, kind: str):
    cfg = StftConfig()
    for entry in entries:
        mixture, stems = load_piece(manifest, entry)
        est = oracle_separate(mixture, stems, kind=kind, cfg=cfg)
        piece_dir = out_dir / entry.id
        piece_dir.mkdir(parents=True, exist_ok=True)
        for part, audio in est.items():
            write_wav(piece_dir / f"{part}.wav", manifest.sample_rate, audio)


def cmd_eval(args) -> dict:
    manifest = DatasetManifest.load(args.manifest)
    estimates_dir = Path(args.estimates) if args.estimates else None
    if args.oracle:
        if estimates_dir is None:
            estimates_dir = Path(args.manifest).parent / f"estimates_{args.oracle}"
        _write_oracle_estimates(
            manifest, manifest.by_split(args.split), estimates_dir, args.oracle.upper()
        )
    if estimates_dir is None:
        raise ConfigError("eval needs --estimates (or --oracle to generate them)")

    references, estimates, ids = _load_eval_pairs(manifest, estimates_dir, args.split)
    report = median_sdr(
        references,
        estimates,
        sample_rate=manifest.sample_rate,
        segment_s=args.segment,
        metric=args.metric,
        track_ids=ids,
    )
    report_path = Path(args.report) if args.report else estimates_dir / "sdr_report.json"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report.to_json() + "\n")
    if not args.json:
        _print_report_table(report)
        print(f"report: {report_path}")
    return {
        "report": str(report_path),
        "metric": report.metric,
        "average_median": report.average_median,
        "parts": {n: p.median for n, p in report.parts.items()},
    }


def cmd_oracle(args) -> dict:
    manifest = DatasetManifest.load(args.manifest)
    out_dir = Path(args.out)
    entries = manifest.by_split(args.split)
    if not entries:
        raise RuntimeError(f"manifest has no '{args.split}' pieces")
    _write_oracle_estimates(manifest, entries, out_dir, args.kind.upper())
    if not args.json:
        print(f"wrote {args.kind.upper()} estimates for {len(entries)} piece(s) to {out_dir}")
    return {"estimates": str(out_dir), "kind": args.kind.upper(), "pieces": len(entries)}


def cmd_export_midi(args) -> dict:
    cfg = PipelineConfig.load(args.config)
    scores = load_scores(cfg.scores)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ranges = cfg.part_ranges()
    written = []
    for pid, score in scores:
        for offset, fitted, _ in expand_augmentations(score, ranges, cfg.transpose):
            rid = f"{pid}_t{offset:+d}"
            performance = make_performance(fitted, cfg.expression, mode=cfg.mode, piece_id=rid)
            path = out_dir / f"{rid}.mid"
            path.write_bytes(write_midi(performance))
            written.append(str(path))
    if not args.json:
        print(f"wrote {len(written)} MIDI file(s) to {out_dir}")
    return {"files": written}


def cmd_segments(args) -> dict:
    manifest = DatasetManifest.load(args.manifest)
    segments = list(
        extract_segments(
            manifest,
            split_name=args.split,
            segment_s=args.segment,
            seed=args.seed,
            count=args.count,
        )
    )
    parts = sorted(segments[0][1])
    arrays = {"mixture": np.stack([m for m, _ in segments])}
    for part in parts:
        arrays[f"stem_{part}"] = np.stack([s[part] for _, s in segments])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savez(out, **arrays)
    if not args.json:
        print(f"wrote {len(segments)} segment(s) x {arrays['mixture'].shape[1]} samples to {out}")
    return {"out": str(out), "count": len(segments), "parts": parts}


# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choralforge",
        description="Synthesize multi-voice choral corpora and evaluate separation.",
    )
    parser.add_argument("--format", choices=("text", "json"), default="text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="lint a pipeline config")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build", help="render the dataset described by a config")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="median-SDR evaluation of an estimates directory")
    p.add_argument("manifest")
    p.add_argument("--estimates")
    p.add_argument("--oracle", choices=("ibm", "irm"), help="generate oracle estimates first")
    p.add_argument("--metric", choices=sorted(METRICS), default="sdr")
    p.add_argument("--split", default="test")
    p.add_argument("--segment", type=float, default=2.0)
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="write IBM/IRM oracle estimates")
    p.add_argument("manifest")
    p.add_argument("--kind", choices=("ibm", "irm"), default="irm")
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export-midi", help="export expressive performances as SMF")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_midi)

    p = sub.add_parser("segments", help="dump random training segments to an .npz")
    p.add_argument("manifest")
    p.add_argument("--split", default="train")
    p.add_argument("--segment", type=float, default=2.0)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segments)

    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    args.json = args.format == "json"
    try:
        result = args.func(args)
    except (ConfigError, ChoralforgeError) as exc:
        _emit_error(args, str(exc), code=1)
        return 1
    except Exception as exc:  # runtime failure
        _emit_error(args, str(exc), code=2)
        return 2
    if args.json:
        print(json.dumps({"status": "ok", **result}, indent=2))
    return 0


def _emit_error(args, message: str, code: int):
    if args.json:
        print(json.dumps({"status": "error", "exit_code": code, "message": message}, indent=2))
    else:
        print(f"error: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
