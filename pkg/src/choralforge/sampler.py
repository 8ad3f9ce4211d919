"""Sample-playback rendering of expressive performances to mono audio.

Banks hold pitch-zoned samples keyed by syllable (vocal banks) or a single
default key. A procedural test bank produces deterministic band-limited
timbres so the whole pipeline runs without any external audio assets.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import BankError, RenderError
from .expression import ExpressiveNote, ExpressivePerformance
from .range_transform import PitchRange, default_range
from .wavio import read_wav, resample_linear

DEFAULT_KEY = ""  # zone key for banks without per-syllable samples

# One waveform family per part so stems differ in timbre, not just pitch.
WAVEFORMS = ("sawtooth", "square", "triangle", "sine")
WAVEFORM_BY_PART = {
    "soprano": "sawtooth",
    "alto": "square",
    "tenor": "triangle",
    "bass": "sine",
}

# Two-resonance vowel colors (center frequencies in Hz).
VOWEL_FORMANTS = {
    "a": (730.0, 1090.0),
    "e": (530.0, 1840.0),
    "i": (390.0, 1990.0),
    "o": (570.0, 840.0),
    "u": (440.0, 1020.0),
}
_FORMANT_GAIN = 0.6  # kept small so the fundamental stays the spectral peak
_FORMANT_BW = 120.0

_ZONE_SPAN = 6  # semitones covered per procedural zone
_LOOP_SECONDS = 1.0
_ZONE_TAIL = 512  # samples past the loop so interpolation never clamps


def midi_to_hz(pitch: float) -> float:
    return 440.0 * 2.0 ** ((pitch - 69) / 12.0)


@dataclass(frozen=True)
class SampleZone:
    root_pitch: int
    low: int
    high: int
    audio: np.ndarray
    sample_rate: int
    loop_points: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if not self.low <= self.root_pitch <= self.high:
            raise BankError(
                f"zone root {self.root_pitch} outside its span {self.low}-{self.high}"
            )
        if self.loop_points is not None:
            start, end = self.loop_points
            if not 0 <= start < end <= len(self.audio):
                raise BankError(f"bad loop points {self.loop_points}")


@dataclass(frozen=True)
class RenderConfig:
    sample_rate: int = 22050
    attack_ms: float = 5.0
    release_ms: float = 30.0
    legato_crossfade: bool = True
    peak_target: float = 0.98

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.attack_ms < 0 or self.release_ms < 0:
            raise ValueError("attack/release must be >= 0")
        if not 0 < self.peak_target <= 1:
            raise ValueError("peak_target must be in (0, 1]")


@dataclass(frozen=True)
class SampleBank:
    name: str
    zones: dict[str, tuple[SampleZone, ...]]
    pitch_range: PitchRange
    velocity_gain_curve: str = "linear"

    def __post_init__(self):
        if self.velocity_gain_curve not in ("linear", "squared"):
            raise BankError(f"unknown velocity gain curve {self.velocity_gain_curve!r}")
        if not self.zones:
            raise BankError(f"bank {self.name!r} has no zones")
        for key, zone_set in self.zones.items():
            self._check_coverage(key, zone_set)

    def _check_coverage(self, key: str, zone_set: Sequence[SampleZone]):
        ordered = sorted(zone_set, key=lambda z: z.low)
        covered = self.pitch_range.low - 1
        for zone in ordered:
            if zone.low > covered + 1:
                gap_lo = max(covered + 1, self.pitch_range.low)
                raise BankError(
                    f"bank {self.name!r} key {key!r}: coverage gap at pitches "
                    f"{gap_lo}-{zone.low - 1}"
                )
            covered = max(covered, zone.high)
        if covered < self.pitch_range.high:
            raise BankError(
                f"bank {self.name!r} key {key!r}: coverage gap at pitches "
                f"{covered + 1}-{self.pitch_range.high}"
            )

    def require_syllables(self, syllable_set: Sequence[str]):
        if DEFAULT_KEY in self.zones:
            return
        missing = [s for s in syllable_set if s not in self.zones]
        if missing:
            raise BankError(f"bank {self.name!r} missing syllable zone(s): {missing}")

    def zone_for(self, pitch: int, syllable: str) -> SampleZone:
        zone_set = self.zones.get(syllable) or self.zones.get(DEFAULT_KEY)
        if zone_set is None:
            raise RenderError(f"bank {self.name!r} has no zones for syllable {syllable!r}")
        matching = [z for z in zone_set if z.low <= pitch <= z.high]
        if not matching:
            raise RenderError(
                f"pitch {pitch} outside bank {self.name!r} range "
                f"{self.pitch_range.low}-{self.pitch_range.high}"
            )
        return min(matching, key=lambda z: (abs(z.root_pitch - pitch), z.root_pitch))

    def velocity_gain(self, velocity: int) -> float:
        g = velocity / 127.0
        return g * g if self.velocity_gain_curve == "squared" else g


# ---------------------------------------------------------------------------
# Procedural test bank
# ---------------------------------------------------------------------------


def _harmonic_amplitudes(waveform: str, count: int) -> np.ndarray:
    n = np.arange(1, count + 1, dtype=np.float64)
    if waveform == "sine":
        amps = np.where(n == 1, 1.0, 0.0)
    elif waveform == "sawtooth":
        amps = 1.0 / n
    elif waveform == "square":
        amps = np.where(n % 2 == 1, 1.0 / n, 0.0)
    elif waveform == "triangle":
        signs = np.where((n % 4) == 3, -1.0, 1.0)
        amps = np.where(n % 2 == 1, signs / (n * n), 0.0)
    else:
        raise BankError(f"unknown waveform {waveform!r}")
    return amps


def _formant_gain(freqs: np.ndarray, syllable: str) -> np.ndarray:
    formants = VOWEL_FORMANTS.get(syllable) or VOWEL_FORMANTS.get(syllable[:1])
    if formants is None:
        return np.ones_like(freqs)
    gain = np.ones_like(freqs)
    for center in formants:
        gain += _FORMANT_GAIN * np.exp(-0.5 * ((freqs - center) / _FORMANT_BW) ** 2)
    return gain


def _zone_waveform(f0: float, waveform: str, syllable: str, sample_rate: int) -> np.ndarray:
    # leave headroom for upward resampling inside the zone
    f_limit = (sample_rate / 2.0) / 2.0 ** (3.0 / 12.0)
    count = max(1, int(f_limit // f0))
    amps = _harmonic_amplitudes(waveform, count)
    freqs = f0 * np.arange(1, count + 1, dtype=np.float64)
    amps = amps * _formant_gain(freqs, syllable)
    loop_len = int(round(_LOOP_SECONDS * sample_rate))
    t = np.arange(loop_len + _ZONE_TAIL, dtype=np.float64) / sample_rate
    x = np.zeros_like(t)
    for f, a in zip(freqs, amps):
        if a != 0.0:
            x += a * np.sin(2 * np.pi * f * t)
    peak = np.max(np.abs(x))
    if peak > 0:
        x *= 0.9 / peak
    return x.astype(np.float32)


def test_bank(
    part_name: str,
    syllable_set: Sequence[str],
    pitch_range: Optional[PitchRange] = None,
    waveform: Optional[str] = None,
    sample_rate: int = 22050,
) -> SampleBank:
    """Deterministic procedural bank for one voice part.

    Zones sit every six semitones; each holds one second of band-limited
    additive waveform looped end to end. The zone fundamental is rounded
    to an integer Hz count so the loop is exactly periodic (worst-case
    pitch error well under 1%).
    """
    if pitch_range is None:
        pitch_range = default_range(part_name)
    if waveform is None:
        waveform = WAVEFORM_BY_PART.get(
            part_name, WAVEFORMS[sum(part_name.encode()) % len(WAVEFORMS)]
        )
    loop_len = int(round(_LOOP_SECONDS * sample_rate))
    zones: dict[str, tuple[SampleZone, ...]] = {}
    for syllable in syllable_set:
        zone_set = []
        low = pitch_range.low
        while low <= pitch_range.high:
            high = min(low + _ZONE_SPAN - 1, pitch_range.high)
            root = min(low + 3, high)
            f0 = max(1.0, round(midi_to_hz(root)))
            audio = _zone_waveform(f0, waveform, syllable, sample_rate)
            zone_set.append(
                SampleZone(
                    root_pitch=root,
                    low=low,
                    high=high,
                    audio=audio,
                    sample_rate=sample_rate,
                    loop_points=(0, loop_len),
                )
            )
            low = high + 1
        zones[syllable] = tuple(zone_set)
    return SampleBank(
        name=f"test:{waveform}",
        zones=zones,
        pitch_range=pitch_range,
        velocity_gain_curve="linear",
    )


# ---------------------------------------------------------------------------
# Bank loading from a directory of WAVs
# ---------------------------------------------------------------------------


def load_bank(directory, sample_rate: int = 22050, syllable_set=None) -> SampleBank:
    """Load a bank from ``<directory>/bank.json`` plus its WAV files.

    The description lists zones as {file, root, low, high, syllable?,
    loop?}; zones without a syllable form the default key. All samples
    are resampled to ``sample_rate`` on load.
    """
    directory = Path(directory)
    desc_path = directory / "bank.json"
    if not desc_path.exists():
        raise BankError(f"no bank.json in {directory}")
    try:
        desc = json.loads(desc_path.read_text())
    except json.JSONDecodeError as exc:
        raise BankError(f"{desc_path}: {exc}") from exc

    try:
        rng_lo, rng_hi = desc["pitch_range"]
        pitch_range = PitchRange(int(rng_lo), int(rng_hi))
        zone_rows = desc["zones"]
    except (KeyError, TypeError, ValueError) as exc:
        raise BankError(f"{desc_path}: bad description: {exc}") from exc

    zones: dict[str, list[SampleZone]] = {}
    for row in zone_rows:
        wav_path = directory / row["file"]
        if not wav_path.exists():
            raise BankError(f"bank {directory.name}: missing sample file {wav_path}")
        rate, audio = read_wav(wav_path)
        ratio = sample_rate / rate
        audio = resample_linear(audio, rate, sample_rate)
        loop = None
        if row.get("loop"):
            start, end = row["loop"]
            loop = (int(round(start * ratio)), min(int(round(end * ratio)), len(audio)))
        zone = SampleZone(
            root_pitch=int(row["root"]),
            low=int(row["low"]),
            high=int(row["high"]),
            audio=audio,
            sample_rate=sample_rate,
            loop_points=loop,
        )
        zones.setdefault(row.get("syllable", DEFAULT_KEY), []).append(zone)

    bank = SampleBank(
        name=desc.get("name", directory.name),
        zones={k: tuple(v) for k, v in zones.items()},
        pitch_range=pitch_range,
        velocity_gain_curve=desc.get("velocity_gain_curve", "linear"),
    )
    if syllable_set is not None:
        bank.require_syllables(syllable_set)
    return bank


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _resample_zone(zone: SampleZone, pitch: int, n_out: int) -> np.ndarray:
    """Pitch-shift the zone sample by linear interpolation, honoring loops."""
    step = 2.0 ** ((pitch - zone.root_pitch) / 12.0)
    pos = np.arange(n_out, dtype=np.float64) * step
    if zone.loop_points is not None:
        loop_start, loop_end = zone.loop_points
        span = loop_end - loop_start
        wrapped = pos >= loop_end
        pos[wrapped] = loop_start + np.mod(pos[wrapped] - loop_start, span)
    idx = np.floor(pos).astype(np.int64)
    frac = pos - idx
    last = len(zone.audio) - 1
    np.clip(idx, 0, last, out=idx)
    nxt = np.minimum(idx + 1, last)
    out = (1.0 - frac) * zone.audio[idx] + frac * zone.audio[nxt]
    out[pos > last] = 0.0  # unlooped sample exhausted
    return out


def _note_envelope(n: int, fade_in: int, fade_out: int, att: int, rel: int) -> np.ndarray:
    """Amplitude envelope: crossfade windows override attack/release ramps."""
    env = np.ones(n, dtype=np.float64)
    if fade_in > 0:
        w = min(fade_in, n)
        theta = (np.arange(w) + 1.0) / (w + 1.0) * (np.pi / 2)
        env[:w] *= np.sin(theta)
    elif att > 0:
        a = min(att, n)
        env[:a] *= (np.arange(a) + 1.0) / a
    if fade_out > 0:
        w = min(fade_out, n)
        theta = (np.arange(w) + 1.0) / (w + 1.0) * (np.pi / 2)
        env[n - w :] *= np.cos(theta)
    elif rel > 0:
        r = min(rel, n)
        env[n - r :] *= np.arange(r, 0, -1) / r
    return env


def render_part(
    notes: Sequence[ExpressiveNote], bank: SampleBank, cfg: RenderConfig
) -> np.ndarray:
    """Render one part's notes to a mono float32 buffer.

    No normalization happens here; the mix stage owns gain so that
    mixture/stem additivity stays exact.
    """
    if not notes:
        return np.zeros(0, dtype=np.float32)
    length = math.ceil(max(n.end_s for n in notes) * cfg.sample_rate)
    out = np.zeros(length, dtype=np.float64)
    att = int(round(cfg.attack_ms / 1000.0 * cfg.sample_rate))
    rel = int(round(cfg.release_ms / 1000.0 * cfg.sample_rate))

    spans = []
    for note in notes:
        start = int(round(note.start_s * cfg.sample_rate))
        end = int(round(note.end_s * cfg.sample_rate))
        spans.append((start, max(end, start + 1)))

    for i, note in enumerate(notes):
        start, end = spans[i]
        n = end - start
        zone = bank.zone_for(note.pitch, note.syllable)
        if zone.sample_rate != cfg.sample_rate:
            raise RenderError(
                f"zone sample rate {zone.sample_rate} != render rate {cfg.sample_rate}"
            )
        audio = _resample_zone(zone, note.pitch, n)
        audio *= bank.velocity_gain(note.velocity)

        fade_in = fade_out = 0
        if cfg.legato_crossfade:
            if note.legato_from_prev and i > 0:
                fade_in = max(0, spans[i - 1][1] - start)
            if i + 1 < len(notes) and notes[i + 1].legato_from_prev:
                fade_out = max(0, end - spans[i + 1][0])
        a, r = att, rel
        if fade_in == 0 and fade_out == 0 and a + r > n:
            a = n * att // max(1, att + rel)
            r = n - a
        audio *= _note_envelope(n, fade_in, fade_out, a, r)
        out[start:end] += audio
    return out.astype(np.float32)


def render_score(
    performance: ExpressivePerformance,
    banks: dict[str, SampleBank],
    cfg: RenderConfig,
) -> dict[str, np.ndarray]:
    """Render every part and zero-pad all stems to a common length."""
    stems = {}
    for part in performance.parts:
        if part.part_name not in banks:
            raise RenderError(f"no bank assigned for part {part.part_name!r}")
        stems[part.part_name] = render_part(part.notes, banks[part.part_name], cfg)
    length = max((len(s) for s in stems.values()), default=0)
    return {
        name: np.pad(stem, (0, length - len(stem))) for name, stem in stems.items()
    }
