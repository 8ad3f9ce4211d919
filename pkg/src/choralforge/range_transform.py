"""Octave fitting into instrument ranges and semitone-shift augmentation."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .score_io import Score, VoicePart


@dataclass(frozen=True)
class PitchRange:
    low: int
    high: int

    def __post_init__(self):
        if self.low > self.high:
            raise ValueError(f"range low {self.low} above high {self.high}")

    def __contains__(self, pitch: int) -> bool:
        return self.low <= pitch <= self.high

    @property
    def width(self) -> int:
        return self.high - self.low + 1


# Playable ranges of the instruments the renderer emulates.
FULL_MIDI_RANGE = PitchRange(21, 108)  # piano-style A0-C8

# Solo-voice banks: distinct range per part (soprano B3-D6 etc).
SOLO_VOCAL_RANGES = {
    "soprano": PitchRange(59, 86),
    "alto": PitchRange(52, 79),
    "tenor": PitchRange(47, 73),
    "bass": PitchRange(33, 62),
}

# Ensemble-voice banks: shared upper/lower ranges (G3-A5 / E2-G4).
ENSEMBLE_VOCAL_RANGES = {
    "soprano": PitchRange(55, 81),
    "alto": PitchRange(55, 81),
    "tenor": PitchRange(40, 67),
    "bass": PitchRange(40, 67),
}

DEFAULT_PART_RANGES = SOLO_VOCAL_RANGES


def default_range(part_name: str) -> PitchRange:
    return DEFAULT_PART_RANGES.get(part_name, FULL_MIDI_RANGE)


@dataclass(frozen=True)
class TransposeSet:
    """Ordered semitone offsets applied as whole-score augmentations."""

    semitone_offsets: tuple[int, ...] = tuple(range(-3, 4))

    def __iter__(self):
        return iter(self.semitone_offsets)

    def __len__(self):
        return len(self.semitone_offsets)


@dataclass
class FitEntry:
    note_index: int
    original_pitch: int
    fitted_pitch: int
    clamped: bool = False


@dataclass
class FitReport:
    part_name: str
    entries: list[FitEntry] = field(default_factory=list)

    @property
    def shifted(self) -> int:
        return sum(1 for e in self.entries if not e.clamped)

    @property
    def clamped(self) -> int:
        return sum(1 for e in self.entries if e.clamped)

    def summary(self) -> dict:
        return {"shifted": self.shifted, "clamped": self.clamped}


def fit_pitch(pitch: int, pitch_range: PitchRange) -> tuple[int, bool]:
    """Move a pitch into range by the smallest octave multiple.

    Returns (fitted_pitch, clamped). Equidistant up/down candidates (only
    possible for ranges narrower than an octave) resolve downward. When no
    octave of the pitch class fits, the pitch clamps to the nearest bound.
    """
    if pitch in pitch_range:
        return pitch, False
    candidates = [
        pitch + 12 * k
        for k in range(-11, 12)
        if (pitch + 12 * k) in pitch_range
    ]
    if not candidates:
        return (pitch_range.low if pitch < pitch_range.low else pitch_range.high), True
    return min(candidates, key=lambda p: (abs(p - pitch), p)), False


def octave_fit(part: VoicePart, pitch_range: PitchRange) -> tuple[VoicePart, FitReport]:
    """Fit every note of a part into the range; timing/velocity untouched."""
    report = FitReport(part_name=part.part_name)
    notes = []
    for i, note in enumerate(part.notes):
        fitted, clamped = fit_pitch(note.pitch, pitch_range)
        if fitted != note.pitch:
            report.entries.append(FitEntry(i, note.pitch, fitted, clamped))
            note = replace(note, pitch=fitted)
        elif clamped:
            report.entries.append(FitEntry(i, note.pitch, fitted, clamped))
        notes.append(note)
    return replace(part, notes=tuple(notes)), report


def transpose(score: Score, k: int) -> Score:
    """Shift every pitch by k semitones; errors list the offending notes."""
    if k == 0:
        return score
    offenders = [
        (p.part_name, n.onset_ticks, n.pitch)
        for p in score.parts
        for n in p.notes
        if not 0 <= n.pitch + k <= 127
    ]
    if offenders:
        shown = ", ".join(f"{part}@{tick}:{pitch}" for part, tick, pitch in offenders[:5])
        raise ValueError(
            f"transpose by {k} pushes {len(offenders)} note(s) outside MIDI range: {shown}"
        )
    parts = [
        replace(p, notes=tuple(replace(n, pitch=n.pitch + k) for n in p.notes))
        for p in score.parts
    ]
    return score.with_parts(parts)


def expand_augmentations(
    score: Score,
    ranges: dict[str, PitchRange],
    transpose_set: TransposeSet = TransposeSet(),
) -> list[tuple[int, Score, dict[str, FitReport]]]:
    """Transpose by each offset, then octave-fit each part into its range.

    Output order follows the set order; one (offset, score, reports) per
    offset. Octave fitting runs after transposition because the shift can
    push previously in-range notes out.
    """
    out = []
    for k in transpose_set:
        shifted = transpose(score, k)
        parts, reports = [], {}
        for part in shifted.parts:
            fitted, report = octave_fit(part, ranges.get(part.part_name, FULL_MIDI_RANGE))
            parts.append(fitted)
            reports[part.part_name] = report
        out.append((k, shifted.with_parts(parts), reports))
    return out
