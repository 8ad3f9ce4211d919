"""Corpus building: mixing, splits, the on-disk manifest, training segments.

Layout under the dataset root:

    manifest.json
    pieces/<id>/<part>.wav      float32 mono stems
    pieces/<id>/mix.wav         their exact sum (after joint gain)

The manifest is plain JSON with insertion-ordered keys; serializing a
parsed manifest reproduces the bytes, which is what the determinism and
idempotence checks lean on.
"""
from __future__ import annotations

import hashlib
import json
import random
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .expression import ExpressionConfig, make_performance
from .range_transform import (
    PitchRange,
    TransposeSet,
    default_range,
    expand_augmentations,
)
from .sampler import RenderConfig, SampleBank, render_score
from .score_io import Score, format_text_score
from .wavio import read_wav, write_wav

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class MixPolicy:
    normalize: bool = True
    peak_target: float = 0.98

    def __post_init__(self):
        if not 0 < self.peak_target <= 1:
            raise ValueError("peak_target must be in (0, 1]")


def mix(stems: dict[str, np.ndarray], policy: MixPolicy = MixPolicy()) -> tuple[np.ndarray, float]:
    """Sum stems into a mixture, returning (mixture, joint gain).

    The gain never boosts (g <= 1) and must be applied to the stored stems
    too, so the saved mixture stays the exact sum of the saved stems.
    """
    lengths = {len(s) for s in stems.values()}
    if len(lengths) > 1:
        raise ValueError(f"stem length mismatch: {sorted(lengths)}")
    total = np.zeros(lengths.pop() if lengths else 0, dtype=np.float64)
    for stem in stems.values():
        total += stem
    peak = float(np.max(np.abs(total))) if total.size else 0.0
    gain = 1.0
    if policy.normalize and peak > policy.peak_target:
        gain = policy.peak_target / peak
    return (gain * total).astype(np.float32), gain


_SPLIT_NAMES = {2: ("train", "test"), 3: ("train", "valid", "test")}


def split(
    piece_ids: Sequence[str],
    counts: Optional[Sequence[int]] = None,
    ratios: Optional[Sequence[float]] = None,
    seed: int = 0,
) -> dict[str, str]:
    """Seeded shuffle-then-partition split assignment.

    Exactly one of counts/ratios must be given; counts must sum to the
    population, ratios to 1. Ratio group sizes floor except the last,
    which takes the remainder.
    """
    ids = sorted(piece_ids)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate piece ids")
    if (counts is None) == (ratios is None):
        raise ValueError("give exactly one of counts or ratios")
    if counts is not None:
        sizes = [int(c) for c in counts]
        if any(c < 0 for c in sizes):
            raise ValueError("negative split count")
        if sum(sizes) != len(ids):
            raise ValueError(f"split counts {sizes} do not sum to population {len(ids)}")
    else:
        fracs = [float(r) for r in ratios]
        if any(r < 0 for r in fracs):
            raise ValueError("negative split ratio")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split ratios {fracs} do not sum to 1")
        sizes = [int(len(ids) * r) for r in fracs[:-1]]
        sizes.append(len(ids) - sum(sizes))
    names = _SPLIT_NAMES.get(len(sizes))
    if names is None:
        raise ValueError(f"expected 2 or 3 split groups, got {len(sizes)}")

    shuffled = list(ids)
    random.Random(seed).shuffle(shuffled)
    assignment = {}
    start = 0
    for name, size in zip(names, sizes):
        for pid in shuffled[start : start + size]:
            assignment[pid] = name
        start += size
    return assignment


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


@dataclass
class PieceEntry:
    id: str
    source: str
    split: str
    transpose_offset: int
    seed: int
    bank_names: dict[str, str]
    tempo_bpm: float
    duration_s: float
    stems: dict[str, str]  # part -> path relative to dataset root
    mixture: str
    mix_gain: float
    fit_report: dict[str, dict[str, int]]
    status: str = "ok"
    error: Optional[str] = None
    content_hash: str = ""

    def to_dict(self) -> dict:
        doc = {
            "id": self.id,
            "source": self.source,
            "split": self.split,
            "transpose_offset": self.transpose_offset,
            "seed": self.seed,
            "bank_names": self.bank_names,
            "tempo_bpm": self.tempo_bpm,
            "duration_s": self.duration_s,
            "stems": self.stems,
            "mixture": self.mixture,
            "mix_gain": self.mix_gain,
            "fit_report": self.fit_report,
            "status": self.status,
            "content_hash": self.content_hash,
        }
        if self.error is not None:
            doc["error"] = self.error
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PieceEntry":
        return cls(
            id=doc["id"],
            source=doc["source"],
            split=doc["split"],
            transpose_offset=doc["transpose_offset"],
            seed=doc["seed"],
            bank_names=doc["bank_names"],
            tempo_bpm=doc["tempo_bpm"],
            duration_s=doc["duration_s"],
            stems=doc["stems"],
            mixture=doc["mixture"],
            mix_gain=doc["mix_gain"],
            fit_report=doc["fit_report"],
            status=doc.get("status", "ok"),
            error=doc.get("error"),
            content_hash=doc.get("content_hash", ""),
        )


@dataclass
class DatasetManifest:
    sample_rate: int
    mode: str
    seed: int
    pieces: list[PieceEntry] = field(default_factory=list)
    root: Optional[Path] = None  # set on load; never serialized

    def __post_init__(self):
        ids = [p.id for p in self.pieces]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate piece ids in manifest")

    def to_json(self) -> str:
        doc = {
            "format_version": FORMAT_VERSION,
            "sample_rate": self.sample_rate,
            "mode": self.mode,
            "seed": self.seed,
            "pieces": [p.to_dict() for p in self.pieces],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str, root: Optional[Path] = None) -> "DatasetManifest":
        doc = json.loads(text)
        return cls(
            sample_rate=doc["sample_rate"],
            mode=doc["mode"],
            seed=doc["seed"],
            pieces=[PieceEntry.from_dict(p) for p in doc["pieces"]],
            root=root,
        )

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        return cls.from_json(path.read_text(), root=path.parent)

    def save(self, root) -> Path:
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        out = root / MANIFEST_NAME
        out.write_text(self.to_json())
        self.root = root
        return out

    def by_split(self, split_name: str) -> list[PieceEntry]:
        return [p for p in self.pieces if p.split == split_name and p.status == "ok"]

    def entry(self, piece_id: str) -> PieceEntry:
        for p in self.pieces:
            if p.id == piece_id:
                return p
        raise KeyError(piece_id)

    def resolve(self, rel_path: str) -> Path:
        if self.root is None:
            raise ValueError("manifest has no root directory (load it from disk)")
        return self.root / rel_path


# ---------------------------------------------------------------------------
# Building
# ---------------------------------------------------------------------------


def _stable_hash(*parts: str) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode())
        h.update(b"\x00")
    return h.hexdigest()


def _rendition_hash(score, offset, mode, banks, ranges, expression_cfg, render_cfg, policy, seed):
    return _stable_hash(
        format_text_score(score),
        str(offset),
        mode,
        repr(sorted((p, b.name) for p, b in banks.items())),
        repr(sorted((p, (r.low, r.high)) for p, r in ranges.items())),
        repr(expression_cfg),
        repr(render_cfg),
        repr(policy),
        str(seed),
    )


def _reusable(entry: PieceEntry, root: Path, content_hash: str) -> bool:
    if entry.status != "ok" or entry.content_hash != content_hash:
        return False
    paths = [root / entry.mixture] + [root / p for p in entry.stems.values()]
    return all(p.exists() for p in paths)


def build_dataset(
    scores: Sequence[tuple[str, Score]],
    banks: dict[str, SampleBank],
    out_dir,
    mode: str = "expressive",
    transpose_set: TransposeSet = TransposeSet(),
    ranges: Optional[dict[str, PitchRange]] = None,
    expression_cfg: ExpressionConfig = ExpressionConfig(),
    render_cfg: RenderConfig = RenderConfig(),
    mix_policy: MixPolicy = MixPolicy(),
    split_counts: Optional[Sequence[int]] = None,
    split_ratios: Optional[Sequence[float]] = None,
    seed: int = 0,
    jobs: int = 1,
    progress=None,
) -> DatasetManifest:
    """Render every (piece, transpose offset) pair and write the dataset.

    Re-runs skip renditions whose content hash matches an existing
    manifest entry with intact files. A failing piece is recorded with
    status "failed" and the run continues.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    expression_cfg = replace(expression_cfg, seed=seed)

    previous: dict[str, PieceEntry] = {}
    manifest_path = out_dir / MANIFEST_NAME
    if manifest_path.exists():
        try:
            previous = {p.id: p for p in DatasetManifest.load(manifest_path).pieces}
        except (ValueError, KeyError, json.JSONDecodeError):
            warnings.warn(f"ignoring unreadable manifest at {manifest_path}")

    source_ids = [pid for pid, _ in scores]
    if len(set(source_ids)) != len(source_ids):
        raise ValueError("duplicate source piece ids")
    if split_counts is not None or split_ratios is not None:
        assignment = split(source_ids, counts=split_counts, ratios=split_ratios, seed=seed)
    else:
        assignment = {pid: "train" for pid in source_ids}

    part_ranges = dict(ranges) if ranges else {}
    for _, score in scores:
        for part in score.parts:
            part_ranges.setdefault(part.part_name, default_range(part.part_name))

    tasks = []
    for pid, score in scores:
        for offset in transpose_set:
            tasks.append((pid, score, offset))

    def build_one(task) -> PieceEntry:
        pid, score, offset = task
        rid = f"{pid}_t{offset:+d}"
        content_hash = _rendition_hash(
            score, offset, mode, banks, part_ranges, expression_cfg, render_cfg, mix_policy, seed
        )
        if rid in previous and _reusable(previous[rid], out_dir, content_hash):
            entry = previous[rid]
            entry.split = assignment[pid]  # split spec may have changed
            return entry
        try:
            return _render_rendition(
                pid, rid, score, offset, assignment[pid], content_hash,
                banks, part_ranges, mode, expression_cfg, render_cfg, mix_policy,
                out_dir, seed,
            )
        except Exception as exc:  # keep building the rest of the corpus
            return PieceEntry(
                id=rid, source=pid, split=assignment[pid], transpose_offset=offset,
                seed=seed, bank_names={p: b.name for p, b in banks.items()},
                tempo_bpm=score.tempo_bpm, duration_s=0.0, stems={}, mixture="",
                mix_gain=0.0, fit_report={}, status="failed", error=str(exc),
                content_hash=content_hash,
            )

    def tracked(task):
        entry = build_one(task)
        if progress:
            progress(entry)
        return entry

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(tracked, tasks))
    else:
        entries = [tracked(t) for t in tasks]
    entries.sort(key=lambda e: e.id)

    manifest = DatasetManifest(
        sample_rate=render_cfg.sample_rate, mode=mode, seed=seed, pieces=entries
    )
    manifest.save(out_dir)
    return manifest


def _render_rendition(
    pid, rid, score, offset, split_name, content_hash,
    banks, part_ranges, mode, expression_cfg, render_cfg, mix_policy, out_dir, seed,
) -> PieceEntry:
    augmented = expand_augmentations(score, part_ranges, TransposeSet((offset,)))
    _, fitted, reports = augmented[0]
    performance = make_performance(fitted, expression_cfg, mode=mode, piece_id=rid)
    stems = render_score(performance, banks, render_cfg)
    mixture, gain = mix(stems, mix_policy)
    stored = {name: (gain * stem).astype(np.float32) for name, stem in stems.items()}

    piece_dir = out_dir / "pieces" / rid
    piece_dir.mkdir(parents=True, exist_ok=True)
    stem_paths = {}
    for name, audio in stored.items():
        rel = f"pieces/{rid}/{name}.wav"
        write_wav(out_dir / rel, render_cfg.sample_rate, audio)
        stem_paths[name] = rel
    mix_rel = f"pieces/{rid}/mix.wav"
    write_wav(out_dir / mix_rel, render_cfg.sample_rate, mixture)

    return PieceEntry(
        id=rid,
        source=pid,
        split=split_name,
        transpose_offset=offset,
        seed=seed,
        bank_names={p: b.name for p, b in banks.items()},
        tempo_bpm=score.tempo_bpm,
        duration_s=len(mixture) / render_cfg.sample_rate,
        stems=stem_paths,
        mixture=mix_rel,
        mix_gain=gain,
        fit_report={name: rep.summary() for name, rep in reports.items()},
        status="ok",
        content_hash=content_hash,
    )


# ---------------------------------------------------------------------------
# Segment extraction
# ---------------------------------------------------------------------------


def load_piece(manifest: DatasetManifest, entry: PieceEntry) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Load a piece's (mixture, stems) at the manifest sample rate."""
    _, mixture = read_wav(manifest.resolve(entry.mixture))
    stems = {}
    for name, rel in entry.stems.items():
        _, stems[name] = read_wav(manifest.resolve(rel))
    return mixture, stems


def extract_segments(
    manifest: DatasetManifest,
    split_name: str = "train",
    segment_s: float = 2.0,
    seed: int = 0,
    count: Optional[int] = None,
) -> Iterator[tuple[np.ndarray, dict[str, np.ndarray]]]:
    """Stream aligned (mixture, stems) windows of fixed length.

    Each draw picks a piece uniformly, then a start offset uniform over
    every position where the window fits. Pieces shorter than one window
    are excluded with a warning. Deterministic for a given seed.
    """
    entries = manifest.by_split(split_name)
    window = int(round(segment_s * manifest.sample_rate))
    usable = []
    cache: dict[str, tuple[np.ndarray, dict[str, np.ndarray]]] = {}
    for entry in entries:
        if int(round(entry.duration_s * manifest.sample_rate)) < window:
            warnings.warn(f"piece {entry.id} shorter than {segment_s}s segment; excluded")
            continue
        usable.append(entry)
    if not usable:
        raise ValueError(f"no piece in split {split_name!r} is at least {segment_s}s long")

    rng = np.random.default_rng(seed)
    produced = 0
    while count is None or produced < count:
        entry = usable[int(rng.integers(0, len(usable)))]
        if entry.id not in cache:
            cache[entry.id] = load_piece(manifest, entry)
        mixture, stems = cache[entry.id]
        start = int(rng.integers(0, len(mixture) - window + 1))
        yield (
            mixture[start : start + window],
            {name: stem[start : start + window] for name, stem in stems.items()},
        )
        produced += 1
