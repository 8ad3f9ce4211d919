"""Dataset access through the choralforge on-disk interface.

Only the documented external surface is consumed: ``manifest.json`` (schema
below) plus float32 mono WAV stems/mixtures laid out as
``pieces/<id>/<part>.wav`` and ``pieces/<id>/mix.wav``.

Manifest schema (the fields read here):
    sample_rate: int
    pieces: [{id, split, status, duration_s, mixture, stems: {part: path}}]
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy.io import wavfile


@dataclass(frozen=True)
class Piece:
    id: str
    split: str
    duration_s: float
    mixture_path: Path
    stem_paths: dict[str, Path]


@dataclass
class SeparationDataset:
    sample_rate: int
    pieces: list[Piece]

    @classmethod
    def load(cls, manifest_path) -> "SeparationDataset":
        manifest_path = Path(manifest_path)
        doc = json.loads(manifest_path.read_text())
        root = manifest_path.parent
        pieces = [
            Piece(
                id=row["id"],
                split=row["split"],
                duration_s=row["duration_s"],
                mixture_path=root / row["mixture"],
                stem_paths={part: root / rel for part, rel in row["stems"].items()},
            )
            for row in doc["pieces"]
            if row.get("status", "ok") == "ok"
        ]
        return cls(sample_rate=int(doc["sample_rate"]), pieces=pieces)

    def by_split(self, split: str) -> list[Piece]:
        return [p for p in self.pieces if p.split == split]

    @property
    def parts(self) -> list[str]:
        return sorted(self.pieces[0].stem_paths) if self.pieces else []


def read_wav(path) -> np.ndarray:
    _, data = wavfile.read(path)
    if data.dtype != np.float32:
        data = data.astype(np.float32) / np.iinfo(data.dtype).max
    return data


def write_wav(path, sample_rate: int, audio: np.ndarray) -> None:
    wavfile.write(path, sample_rate, np.asarray(audio, dtype=np.float32))


class SegmentSampler:
    """Random fixed-length (mixture, stem) windows for one voice part.

    Matches the dataset pipeline's extraction semantics: pick a piece
    uniformly, then a start offset uniform over positions where the window
    fits; pieces shorter than one window are skipped. Audio is cached in
    memory after first use (desk-scale corpora).
    """

    def __init__(
        self,
        dataset: SeparationDataset,
        part: str,
        split: str = "train",
        segment_s: float = 2.0,
        seed: int = 0,
    ):
        self.dataset = dataset
        self.part = part
        self.window = int(round(segment_s * dataset.sample_rate))
        self.pieces = [
            p
            for p in dataset.by_split(split)
            if int(round(p.duration_s * dataset.sample_rate)) >= self.window
        ]
        if not self.pieces:
            raise ValueError(f"no usable piece in split {split!r}")
        self.rng = np.random.default_rng(seed)
        self._cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def _audio(self, piece: Piece) -> tuple[np.ndarray, np.ndarray]:
        if piece.id not in self._cache:
            self._cache[piece.id] = (
                read_wav(piece.mixture_path),
                read_wav(piece.stem_paths[self.part]),
            )
        return self._cache[piece.id]

    def draw(self) -> tuple[np.ndarray, np.ndarray]:
        piece = self.pieces[int(self.rng.integers(0, len(self.pieces)))]
        mixture, stem = self._audio(piece)
        start = int(self.rng.integers(0, len(mixture) - self.window + 1))
        return mixture[start : start + self.window], stem[start : start + self.window]

    def batches(self, batch_size: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        while True:
            pairs = [self.draw() for _ in range(batch_size)]
            yield np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])


def fixed_validation_set(
    dataset: SeparationDataset,
    part: str,
    split: str = "valid",
    segment_s: float = 2.0,
    n_segments: int = 32,
    seed: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """A frozen bank of validation segments (same draw every call)."""
    sampler = SegmentSampler(dataset, part, split=split, segment_s=segment_s, seed=seed)
    pairs = [sampler.draw() for _ in range(n_segments)]
    return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])


def split_ids(ids: list[str], ratio: float, seed: int = 0) -> tuple[list[str], list[str]]:
    """Seeded ratio split into (train, eval); train size floors."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be inside (0, 1), got {ratio}")
    ordered = sorted(ids)
    rng = np.random.default_rng(seed)
    rng.shuffle(ordered)
    n_train = int(len(ordered) * ratio)
    return sorted(ordered[:n_train]), sorted(ordered[n_train:])
