"""Expressive performance rendering: phrases, legato, dynamics, syllables.

All randomness flows through one deterministic generator per (piece, part),
derived by hashing the configured seed, so output never depends on render
order or on Python's per-process hash salt.
"""
from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError
from .score_io import Score, VoicePart, ticks_to_seconds

CURVE_TYPES = ("crescendo", "diminuendo", "cresc_dim")

STANDARD_VELOCITY = 96


@dataclass(frozen=True)
class Phrase:
    """Half-open index range [start, end) into a part's note list."""

    start: int
    end: int

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError("empty phrase")

    def __len__(self):
        return self.end - self.start


@dataclass(frozen=True)
class ExpressiveNote:
    start_s: float
    end_s: float
    pitch: int
    velocity: int
    syllable: str
    legato_from_prev: bool = False

    def __post_init__(self):
        if self.end_s <= self.start_s:
            raise ValueError("note end must come after its start")
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside 0-127")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside 1-127")


@dataclass(frozen=True)
class PerformancePart:
    part_name: str
    notes: tuple[ExpressiveNote, ...]


@dataclass(frozen=True)
class ExpressivePerformance:
    parts: tuple[PerformancePart, ...]
    ticks_per_quarter: int
    tempo_bpm: float
    mode: str = "expressive"

    @property
    def duration_s(self) -> float:
        return max((n.end_s for p in self.parts for n in p.notes), default=0.0)


@dataclass(frozen=True)
class ExpressionConfig:
    phrase_gap_beats: float = 0.5
    legato_interval_semitones: int = 7  # strict less-than
    legato_overlap_ms: float = 40.0
    velocity_min: int = 50
    velocity_max: int = 110
    curve_types: tuple[str, ...] = CURVE_TYPES
    syllable_set: tuple[str, ...] = ("a", "e", "i", "o", "u")
    seed: int = 0

    def __post_init__(self):
        if self.phrase_gap_beats <= 0:
            raise ConfigError("phrase_gap_beats must be positive")
        if self.legato_overlap_ms <= 0:
            raise ConfigError("legato_overlap_ms must be positive")
        if not 1 <= self.velocity_min <= self.velocity_max <= 127:
            raise ConfigError(
                f"bad velocity bounds [{self.velocity_min}, {self.velocity_max}]"
            )
        if not self.curve_types:
            raise ConfigError("need at least one curve type")
        for curve in self.curve_types:
            if curve not in CURVE_TYPES:
                raise ConfigError(f"unknown curve type {curve!r}")
        if not self.syllable_set:
            raise ConfigError("syllable_set must not be empty")


def part_rng(seed: int, piece_id: str, part_name: str) -> random.Random:
    """Deterministic per-(piece, part) generator, independent of hash salt."""
    digest = hashlib.sha256(f"{seed}|{piece_id}|{part_name}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def segment_phrases(part: VoicePart, cfg: ExpressionConfig, ticks_per_quarter: int) -> list[Phrase]:
    """Split a part into phrases at breath breaks or long rests.

    With breath_breaks set, a new phrase starts at the first note whose
    onset is at or past each break tick. Otherwise a rest of at least
    phrase_gap_beats between consecutive notes starts a new phrase
    (inclusive threshold). Phrases partition the note list in order.
    """
    notes = part.notes
    if not notes:
        return []
    boundaries = set()
    if part.breath_breaks is not None:
        for brk in part.breath_breaks:
            for i in range(1, len(notes)):
                if notes[i - 1].onset_ticks < brk <= notes[i].onset_ticks:
                    boundaries.add(i)
                    break
    else:
        gap_ticks = cfg.phrase_gap_beats * ticks_per_quarter
        for i in range(1, len(notes)):
            rest = notes[i].onset_ticks - notes[i - 1].offset_ticks
            if rest >= gap_ticks:
                boundaries.add(i)
    phrases = []
    start = 0
    for i in sorted(boundaries):
        phrases.append(Phrase(start, i))
        start = i
    phrases.append(Phrase(start, len(notes)))
    return phrases


def apply_legato(
    phrases: Sequence[Phrase], part: VoicePart, cfg: ExpressionConfig
) -> list[bool]:
    """Per-note legato_from_prev flags.

    A note is sung legato from its predecessor iff both sit in the same
    phrase, there is no rest between them, and the interval is strictly
    below the configured threshold. Never across phrase boundaries.
    """
    flags = [False] * len(part.notes)
    for phrase in phrases:
        for i in range(phrase.start + 1, phrase.end):
            prev, cur = part.notes[i - 1], part.notes[i]
            contiguous = cur.onset_ticks == prev.offset_ticks
            interval = abs(cur.pitch - prev.pitch)
            if contiguous and interval < cfg.legato_interval_semitones:
                flags[i] = True
    return flags


def _curve_value(curve: str, x: float, vmin: int, vmax: int) -> int:
    span = vmax - vmin
    if curve == "crescendo":
        v = vmin + x * span
    elif curve == "diminuendo":
        v = vmax - x * span
    elif curve == "cresc_dim":
        v = vmin + 2 * x * span if x <= 0.5 else vmax - 2 * (x - 0.5) * span
    else:
        raise ConfigError(f"unknown curve type {curve!r}")
    return max(vmin, min(vmax, math.floor(v + 0.5)))


def apply_velocity_curve(
    phrase_notes: Sequence, cfg: ExpressionConfig, rng: random.Random
) -> list[int]:
    """Velocities for one phrase from a randomly drawn dynamics curve.

    Curve position is the note onset normalized over the phrase span;
    single-note phrases take the curve midpoint. Values round half-up.
    """
    curve = rng.choice(cfg.curve_types)
    n = len(phrase_notes)
    if n == 1:
        return [_curve_value(curve, 0.5, cfg.velocity_min, cfg.velocity_max)]
    first = phrase_notes[0].onset_ticks
    span = phrase_notes[-1].onset_ticks - first
    return [
        _curve_value(curve, (note.onset_ticks - first) / span, cfg.velocity_min, cfg.velocity_max)
        for note in phrase_notes
    ]


def assign_syllables(phrase_len: int, cfg: ExpressionConfig, rng: random.Random) -> list[str]:
    """Sample one syllable per note, with replacement."""
    if not cfg.syllable_set:
        raise ConfigError("syllable_set must not be empty")
    return [rng.choice(cfg.syllable_set) for _ in range(phrase_len)]


def make_performance(
    score: Score,
    cfg: ExpressionConfig,
    mode: str = "expressive",
    piece_id: str = "",
) -> ExpressivePerformance:
    """Turn a (range-fitted) score into a timed performance.

    Expressive mode runs phrase segmentation, legato overlap, a dynamics
    curve per phrase and random syllables. Standard mode bypasses all of
    it: constant velocity, no overlaps, the first syllable everywhere.
    """
    if mode not in ("standard", "expressive"):
        raise ConfigError(f"unknown mode {mode!r}")
    ppq, bpm = score.ticks_per_quarter, score.tempo_bpm
    to_s = lambda ticks: ticks_to_seconds(ticks, ppq, bpm)

    parts = []
    for part in score.parts:
        if mode == "standard":
            notes = tuple(
                ExpressiveNote(
                    start_s=to_s(n.onset_ticks),
                    end_s=to_s(n.offset_ticks),
                    pitch=n.pitch,
                    velocity=STANDARD_VELOCITY,
                    syllable=cfg.syllable_set[0],
                )
                for n in part.notes
            )
            parts.append(PerformancePart(part.part_name, notes))
            continue

        phrases = segment_phrases(part, cfg, ppq)
        legato = apply_legato(phrases, part, cfg)
        rng = part_rng(cfg.seed, piece_id, part.part_name)
        velocities: list[int] = []
        syllables: list[str] = []
        for phrase in phrases:
            phrase_notes = part.notes[phrase.start : phrase.end]
            velocities.extend(apply_velocity_curve(phrase_notes, cfg, rng))
            syllables.extend(assign_syllables(len(phrase), cfg, rng))

        overlap_s = cfg.legato_overlap_ms / 1000.0
        notes = []
        for i, n in enumerate(part.notes):
            end = to_s(n.offset_ticks)
            if i + 1 < len(part.notes) and legato[i + 1]:
                nxt = part.notes[i + 1]
                end = min(to_s(nxt.onset_ticks) + overlap_s, to_s(nxt.offset_ticks))
            notes.append(
                ExpressiveNote(
                    start_s=to_s(n.onset_ticks),
                    end_s=end,
                    pitch=n.pitch,
                    velocity=velocities[i],
                    syllable=syllables[i],
                    legato_from_prev=legato[i],
                )
            )
        parts.append(PerformancePart(part.part_name, tuple(notes)))
    return ExpressivePerformance(
        parts=tuple(parts), ticks_per_quarter=ppq, tempo_bpm=bpm, mode=mode
    )
