"""Symbolic score model plus Standard MIDI File and text-score parsing/writing.

The internal model is deliberately small: a Score is a list of monophonic
voice parts with integer tick timing, one tempo, and one tick resolution.
MIDI ingestion accepts SMF type 0/1; only note on/off, track name, lyric
and tempo events are interpreted, everything else is skipped.
"""
from __future__ import annotations

import re
import struct
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .errors import MonophonyError, ScoreParseError

DEFAULT_PART_ORDER = ("soprano", "alto", "tenor", "bass")

# Track-name patterns tried before falling back to track order.
DEFAULT_NAME_PATTERNS = {
    "soprano": r"sop|^s\b|\bs$|cantus",
    "alto": r"alt|^a\b|\ba$",
    "tenor": r"ten|^t\b|\bt$",
    "bass": r"bass|^b\b|\bb$",
}

DEFAULT_TEMPO_BPM = 90.0
DEFAULT_PPQ = 480


@dataclass(frozen=True)
class Note:
    """One monophonic note in MIDI tick time."""

    onset_ticks: int
    duration_ticks: int
    pitch: int
    velocity: int

    def __post_init__(self):
        if self.onset_ticks < 0:
            raise ValueError(f"negative onset {self.onset_ticks}")
        if self.duration_ticks < 1:
            raise ValueError(f"duration must be >= 1 tick, got {self.duration_ticks}")
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside 0-127")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside 1-127")

    @property
    def offset_ticks(self) -> int:
        return self.onset_ticks + self.duration_ticks


@dataclass(frozen=True)
class VoicePart:
    """A named monophonic note sequence; notes are kept sorted by onset."""

    part_name: str
    notes: tuple[Note, ...]
    breath_breaks: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        ordered = tuple(sorted(self.notes, key=lambda n: n.onset_ticks))
        object.__setattr__(self, "notes", ordered)
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.onset_ticks < prev.offset_ticks:
                raise MonophonyError(
                    f"part {self.part_name!r}: note at tick {cur.onset_ticks} overlaps "
                    f"previous note ending at tick {prev.offset_ticks}"
                )
        if self.breath_breaks is not None:
            object.__setattr__(self, "breath_breaks", tuple(sorted(self.breath_breaks)))


@dataclass(frozen=True)
class Score:
    """Tempo-annotated multi-part symbolic piece."""

    parts: tuple[VoicePart, ...]
    ticks_per_quarter: int = DEFAULT_PPQ
    tempo_bpm: float = DEFAULT_TEMPO_BPM

    def __post_init__(self):
        if not self.parts:
            raise ValueError("a score needs at least one part")
        if self.ticks_per_quarter <= 0:
            raise ValueError("ticks_per_quarter must be positive")
        if self.tempo_bpm <= 0:
            raise ValueError("tempo_bpm must be positive")

    def part(self, name: str) -> VoicePart:
        for p in self.parts:
            if p.part_name == name:
                return p
        raise KeyError(name)

    def with_parts(self, parts: Sequence[VoicePart]) -> "Score":
        return replace(self, parts=tuple(parts))


def ticks_to_seconds(ticks: float, ticks_per_quarter: int, tempo_bpm: float) -> float:
    return ticks / ticks_per_quarter * 60.0 / tempo_bpm


def seconds_to_ticks(seconds: float, ticks_per_quarter: int, tempo_bpm: float) -> int:
    return int(round(seconds * tempo_bpm / 60.0 * ticks_per_quarter))


# ---------------------------------------------------------------------------
# SMF reading
# ---------------------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ScoreParseError("unexpected end of file", offset=self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.read(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.read(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.read(4))[0]

    def vlq(self) -> int:
        total = 0
        for _ in range(4):
            byte = self.u8()
            total = (total << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return total
        raise ScoreParseError("variable-length quantity longer than 4 bytes", offset=self.pos)


@dataclass
class RawNote:
    """Matched note event before any monophonicity checks."""

    onset_ticks: int
    duration_ticks: int
    pitch: int
    velocity: int
    lyric: Optional[str] = None


@dataclass
class RawTrack:
    name: str
    notes: list[RawNote] = field(default_factory=list)
    tempo_bpm: Optional[float] = None


def read_smf(data: bytes) -> tuple[int, list[RawTrack]]:
    """Decode an SMF type 0/1 file into (ticks_per_quarter, raw tracks).

    Notes are matched FIFO per pitch, so overlapping same-pitch notes
    survive. Raises ScoreParseError with a byte offset on malformed input.
    """
    r = _Reader(data)
    if r.read(4) != b"MThd":
        raise ScoreParseError("missing MThd header", offset=0)
    header_len = r.u32()
    if header_len < 6:
        raise ScoreParseError(f"bad header length {header_len}", offset=r.pos - 4)
    fmt = r.u16()
    ntrks = r.u16()
    division = r.u16()
    r.read(header_len - 6)
    if fmt not in (0, 1):
        raise ScoreParseError(f"unsupported SMF type {fmt}", offset=8)
    if division & 0x8000:
        raise ScoreParseError("SMPTE time division not supported", offset=12)
    if division == 0:
        raise ScoreParseError("zero ticks per quarter", offset=12)

    tracks = []
    for track_index in range(ntrks):
        chunk_start = r.pos
        if r.read(4) != b"MTrk":
            raise ScoreParseError(f"track {track_index}: missing MTrk chunk", offset=chunk_start)
        length = r.u32()
        end = r.pos + length
        if end > len(data):
            raise ScoreParseError(
                f"track {track_index}: chunk length {length} overruns file", offset=chunk_start + 4
            )
        tracks.append(_read_track(r, end, track_index))
        r.pos = end
    return division, tracks


def _read_track(r: _Reader, end: int, track_index: int) -> RawTrack:
    track = RawTrack(name="")
    tick = 0
    running_status = 0
    # pitch -> FIFO of (onset, velocity, lyric); FIFO keeps overlapping
    # same-pitch (legato) notes matchable
    open_notes: dict[int, list[tuple[int, int, Optional[str]]]] = {}
    pending_lyric: Optional[str] = None

    while r.pos < end:
        tick += r.vlq()
        status = r.u8()
        if status < 0x80:
            if running_status < 0x80:
                raise ScoreParseError(
                    f"track {track_index}: data byte with no running status", offset=r.pos - 1
                )
            status = running_status
            r.pos -= 1

        if status == 0xFF:  # meta
            meta_type = r.u8()
            length = r.vlq()
            payload = r.read(length)
            if meta_type == 0x03:
                track.name = payload.decode("latin-1")
            elif meta_type == 0x05:
                pending_lyric = payload.decode("latin-1")
            elif meta_type == 0x51:
                usq = int.from_bytes(payload[:3], "big")
                if usq <= 0:
                    raise ScoreParseError(f"track {track_index}: zero tempo", offset=r.pos - 3)
                bpm = 60_000_000.0 / usq
                # integer microseconds-per-quarter cannot encode most bpm
                # values exactly; snap near-integer tempi back
                if abs(bpm - round(bpm)) < 1e-3:
                    bpm = float(round(bpm))
                if track.tempo_bpm is None:
                    track.tempo_bpm = bpm
                else:
                    warnings.warn(
                        f"track {track_index}: extra tempo event at tick {tick} ignored "
                        "(first tempo wins)",
                        stacklevel=3,
                    )
        elif status in (0xF0, 0xF7):  # sysex: skip
            length = r.vlq()
            r.read(length)
        else:
            running_status = status
            kind = status & 0xF0
            if kind in (0x80, 0x90, 0xA0, 0xB0, 0xE0):
                d1, d2 = r.u8(), r.u8()
            elif kind in (0xC0, 0xD0):
                d1, d2 = r.u8(), 0
            else:
                raise ScoreParseError(
                    f"track {track_index}: bad status byte 0x{status:02X}", offset=r.pos - 1
                )
            if kind == 0x90 and d2 > 0:
                open_notes.setdefault(d1, []).append((tick, d2, pending_lyric))
                pending_lyric = None
            elif kind == 0x80 or (kind == 0x90 and d2 == 0):
                stack = open_notes.get(d1)
                if not stack:
                    raise ScoreParseError(
                        f"track {track_index}: note-off for pitch {d1} at tick {tick} "
                        "without matching note-on",
                        offset=r.pos - 2,
                    )
                onset, velocity, lyric = stack.pop(0)
                if tick <= onset:
                    raise ScoreParseError(
                        f"track {track_index}: zero-length note at tick {onset}", offset=r.pos - 2
                    )
                track.notes.append(RawNote(onset, tick - onset, d1, velocity, lyric))

    for pitch, stack in open_notes.items():
        if stack:
            raise ScoreParseError(
                f"track {track_index}: unmatched note-on for pitch {pitch} at tick {stack[0][0]}"
            )
    track.notes.sort(key=lambda n: (n.onset_ticks, n.pitch))
    return track


def _label_parts(tracks: list[RawTrack], part_names, name_patterns) -> list[tuple[str, RawTrack]]:
    order = tuple(part_names) if part_names else DEFAULT_PART_ORDER
    patterns = name_patterns if name_patterns is not None else DEFAULT_NAME_PATTERNS
    labeled: list[tuple[Optional[str], RawTrack]] = []
    taken = set()
    for track in tracks:
        label = None
        for candidate, pattern in patterns.items():
            if candidate in taken:
                continue
            if track.name and re.search(pattern, track.name, re.IGNORECASE):
                label = candidate
                taken.add(candidate)
                break
        labeled.append((label, track))
    # unmatched tracks take the next free ordinal label
    free = [name for name in order if name not in taken]
    result = []
    for label, track in labeled:
        if label is None:
            label = free.pop(0) if free else track.name or f"part{len(result) + 1}"
        result.append((label, track))
    return result


def parse_midi(data: bytes, part_names=None, name_patterns=None) -> Score:
    """Parse SMF bytes into a Score.

    One VoicePart per note-carrying track; the part label comes from a
    track-name pattern when one matches, otherwise from the configured
    part order. The first tempo event wins (default 90 bpm when absent).
    Overlapping notes inside one track raise MonophonyError.
    """
    ppq, tracks = read_smf(data)
    tempo = next((t.tempo_bpm for t in tracks if t.tempo_bpm is not None), DEFAULT_TEMPO_BPM)
    with_notes = [t for t in tracks if t.notes]
    parts = []
    for label, track in _label_parts(with_notes, part_names, name_patterns):
        notes = tuple(
            Note(n.onset_ticks, n.duration_ticks, n.pitch, n.velocity) for n in track.notes
        )
        parts.append(VoicePart(part_name=label, notes=notes))
    return Score(parts=tuple(parts), ticks_per_quarter=ppq, tempo_bpm=tempo)


# ---------------------------------------------------------------------------
# SMF writing
# ---------------------------------------------------------------------------


def _vlq_bytes(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def _track_chunk(events: list[tuple[int, bytes]]) -> bytes:
    """events: (absolute_tick, payload). Stable-sorted, delta-encoded."""
    events = sorted(events, key=lambda e: e[0])
    body = bytearray()
    last = 0
    for tick, payload in events:
        body += _vlq_bytes(tick - last)
        body += payload
        last = tick
    body += _vlq_bytes(0) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_tracks(
    tracks: Sequence[tuple[str, Sequence[RawNote]]], ticks_per_quarter: int, tempo_bpm: float
) -> bytes:
    """Encode named note lists as an SMF type-1 file (conductor track first)."""
    usq = int(round(60_000_000.0 / tempo_bpm))
    conductor = _track_chunk([(0, b"\xff\x51\x03" + usq.to_bytes(3, "big"))])
    chunks = [conductor]
    for name, notes in tracks:
        events: list[tuple[int, bytes]] = []
        if name:
            encoded = name.encode("latin-1")
            events.append((0, b"\xff\x03" + _vlq_bytes(len(encoded)) + encoded))
        for i, note in enumerate(notes):
            if note.lyric:
                text = note.lyric.encode("latin-1")
                events.append((note.onset_ticks, b"\xff\x05" + _vlq_bytes(len(text)) + text))
            # sort key (tick, i, on-before-off within a note) keeps FIFO
            # matching valid for overlapping same-pitch notes
            events.append((note.onset_ticks, bytes((0x90, note.pitch, note.velocity))))
            events.append((note.onset_ticks + note.duration_ticks, bytes((0x80, note.pitch, 0))))
        chunks.append(_track_chunk(events))
    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), ticks_per_quarter)
    return header + b"".join(chunks)


def write_midi(obj) -> bytes:
    """Write a Score or an ExpressivePerformance as SMF type-1 bytes.

    Performances keep their legato overlaps (note-off of a note may land
    after the next note-on) and carry syllables as lyric meta events.
    """
    if hasattr(obj, "ticks_per_quarter") and obj.parts and hasattr(obj.parts[0], "notes"):
        first_notes = obj.parts[0].notes
        if first_notes and hasattr(first_notes[0], "start_s"):
            return _write_performance(obj)
        tracks = [
            (p.part_name, [RawNote(n.onset_ticks, n.duration_ticks, n.pitch, n.velocity) for n in p.notes])
            for p in obj.parts
        ]
        return write_tracks(tracks, obj.ticks_per_quarter, obj.tempo_bpm)
    return _write_performance(obj)


def _write_performance(perf) -> bytes:
    ppq, bpm = perf.ticks_per_quarter, perf.tempo_bpm
    tracks = []
    for part in perf.parts:
        notes = []
        for n in part.notes:
            onset = seconds_to_ticks(n.start_s, ppq, bpm)
            offset = seconds_to_ticks(n.end_s, ppq, bpm)
            notes.append(RawNote(onset, max(1, offset - onset), n.pitch, n.velocity, n.syllable))
        tracks.append((part.part_name, notes))
    return write_tracks(tracks, ppq, bpm)


# ---------------------------------------------------------------------------
# Text score format
# ---------------------------------------------------------------------------

_HEADER_KEYS = ("tempo", "ppq")


def parse_text_score(text: str) -> Score:
    """Parse the plain-text score format.

    One event per line: ``part onset_beats duration_beats pitch velocity``.
    Optional header lines ``tempo <bpm>`` and ``ppq <int>`` (defaults 90/480)
    and breath marks ``breath <part> <tick> [<tick> ...]``.
    Lines starting with ``#`` and blank lines are ignored.
    """
    tempo = DEFAULT_TEMPO_BPM
    ppq = DEFAULT_PPQ
    notes_by_part: dict[str, list[tuple[float, float, int, int]]] = {}
    breaths: dict[str, list[int]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        key = fields[0].lower()
        try:
            if key == "tempo":
                tempo = float(fields[1])
                if tempo <= 0:
                    raise ValueError("tempo must be positive")
            elif key == "ppq":
                ppq = int(fields[1])
                if ppq <= 0:
                    raise ValueError("ppq must be positive")
            elif key == "breath":
                breaths.setdefault(fields[1], []).extend(int(f) for f in fields[2:])
            else:
                if len(fields) != 5:
                    raise ValueError(f"expected 5 fields, got {len(fields)}")
                part, onset_b, dur_b, pitch, velocity = fields
                notes_by_part.setdefault(part, []).append(
                    (float(onset_b), float(dur_b), int(pitch), int(velocity))
                )
        except ScoreParseError:
            raise
        except (ValueError, IndexError) as exc:
            raise ScoreParseError(f"bad score line {raw.strip()!r}: {exc}", line=lineno) from exc

    parts = []
    for part_name, rows in notes_by_part.items():
        try:
            notes = tuple(
                Note(int(round(onset * ppq)), max(1, int(round(dur * ppq))), pitch, velocity)
                for onset, dur, pitch, velocity in rows
            )
            parts.append(
                VoicePart(
                    part_name=part_name,
                    notes=notes,
                    breath_breaks=tuple(breaths[part_name]) if part_name in breaths else None,
                )
            )
        except MonophonyError:
            raise
        except ValueError as exc:
            raise ScoreParseError(f"part {part_name!r}: {exc}") from exc
    return Score(parts=tuple(parts), ticks_per_quarter=ppq, tempo_bpm=tempo)


def format_text_score(score: Score) -> str:
    """Inverse of parse_text_score (beats rendered with full precision)."""
    lines = [f"tempo {score.tempo_bpm:g}", f"ppq {score.ticks_per_quarter}"]
    for part in score.parts:
        if part.breath_breaks:
            lines.append(f"breath {part.part_name} " + " ".join(str(t) for t in part.breath_breaks))
    for part in score.parts:
        for n in part.notes:
            onset = n.onset_ticks / score.ticks_per_quarter
            dur = n.duration_ticks / score.ticks_per_quarter
            lines.append(f"{part.part_name} {onset:g} {dur:g} {n.pitch} {n.velocity}")
    return "\n".join(lines) + "\n"
