"""Separation evaluation: STFT, SDR / SI-SDR, median aggregation, oracle masks.

The aggregation follows the SiSEC-2018 convention: SDR per non-overlapping
2 s segment, median over a track's valid segments, median over track
medians for the dataset figure. Silent-reference segments are skipped and
recorded as markers rather than numbers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ChoralforgeError

SILENCE_RMS = 10.0 ** (-60.0 / 20.0)  # -60 dBFS
_IRM_EPS = 1e-8


class SilentReference(ChoralforgeError, ValueError):
    """Reference energy below the silence threshold; excluded from medians."""


@dataclass(frozen=True)
class StftConfig:
    window_size: int = 2048
    fft_size: int = 2048
    hop: int = 441

    def __post_init__(self):
        if self.hop > self.window_size:
            raise ValueError("hop must not exceed window size")
        if self.fft_size < self.window_size:
            raise ValueError("fft size must be >= window size")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1

    def frames(self, n_samples: int) -> int:
        return (n_samples - self.window_size) // self.hop + 1


@dataclass
class Spectrogram:
    data: np.ndarray  # complex, [frames, bins]
    config: StftConfig
    length: int  # originating signal length in samples


def _hann(size: int) -> np.ndarray:
    # periodic window (not symmetric) for clean overlap-add
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(size) / size)


def stft(audio: np.ndarray, cfg: StftConfig = StftConfig()) -> Spectrogram:
    audio = np.asarray(audio, dtype=np.float64)
    if audio.size < cfg.window_size:
        raise ValueError(
            f"audio length {audio.size} shorter than window {cfg.window_size}"
        )
    n_frames = cfg.frames(audio.size)
    window = _hann(cfg.window_size)
    frames = np.stack(
        [audio[k * cfg.hop : k * cfg.hop + cfg.window_size] * window for k in range(n_frames)]
    )
    return Spectrogram(np.fft.rfft(frames, n=cfg.fft_size, axis=1), cfg, audio.size)


def istft(spec: Spectrogram) -> np.ndarray:
    """Weighted overlap-add inverse with window-squared normalization.

    Reconstruction is exact (to float rounding) on the interior; samples
    past the last frame's coverage come back as zeros.
    """
    cfg = spec.config
    window = _hann(cfg.window_size)
    frames = np.fft.irfft(spec.data, n=cfg.fft_size, axis=1)[:, : cfg.window_size]
    out = np.zeros(spec.length, dtype=np.float64)
    norm = np.zeros(spec.length, dtype=np.float64)
    for k in range(frames.shape[0]):
        lo = k * cfg.hop
        hi = min(lo + cfg.window_size, spec.length)
        out[lo:hi] += frames[k, : hi - lo] * window[: hi - lo]
        norm[lo:hi] += window[: hi - lo] ** 2
    good = norm > 1e-12
    out[good] /= norm[good]
    return out


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _as_pair(reference, estimate) -> tuple[np.ndarray, np.ndarray]:
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError(f"length mismatch: {ref.shape} vs {est.shape}")
    return ref, est


def sdr(reference, estimate) -> float:
    """Energy source-to-distortion ratio in dB; +inf for a perfect estimate.

    Raises SilentReference when the reference RMS sits below -60 dBFS.
    """
    ref, est = _as_pair(reference, estimate)
    ref_energy = float(np.sum(ref * ref))
    if math.sqrt(ref_energy / ref.size) < SILENCE_RMS:
        raise SilentReference("reference below -60 dBFS RMS")
    err_energy = float(np.sum((ref - est) ** 2))
    if err_energy == 0.0:
        return math.inf
    return 10.0 * math.log10(ref_energy / err_energy)


def si_sdr(reference, estimate) -> float:
    """Scale-invariant SDR: estimate projected onto the reference.

    Returns -inf when the estimate is zero or orthogonal to the reference.
    """
    ref, est = _as_pair(reference, estimate)
    # one summation path (dot) throughout so exact scalings cancel exactly
    ref_energy = float(np.dot(ref, ref))
    if math.sqrt(ref_energy / ref.size) < SILENCE_RMS:
        raise SilentReference("reference below -60 dBFS RMS")
    scale = float(np.dot(est, ref)) / ref_energy
    target = scale * ref
    target_energy = float(np.dot(target, target))
    err = est - target
    err_energy = float(np.dot(err, err))
    if target_energy == 0.0:
        return -math.inf
    if err_energy == 0.0:
        return math.inf
    return 10.0 * math.log10(target_energy / err_energy)


METRICS = {"sdr": sdr, "si_sdr": si_sdr}


# ---------------------------------------------------------------------------
# Median-SDR aggregation
# ---------------------------------------------------------------------------


@dataclass
class TrackResult:
    track_id: str
    segments: list[Optional[float]]  # None marks a skipped silent segment
    median: Optional[float]
    p25: Optional[float]
    p75: Optional[float]


@dataclass
class PartResult:
    part: str
    tracks: list[TrackResult] = field(default_factory=list)
    median: Optional[float] = None
    p25: Optional[float] = None
    p75: Optional[float] = None


@dataclass
class SdrReport:
    metric: str
    segment_s: float
    sample_rate: int
    parts: dict[str, PartResult]
    average_median: Optional[float]

    def to_json(self) -> str:
        doc = {
            "metric": self.metric,
            "segment_s": self.segment_s,
            "sample_rate": self.sample_rate,
            "parts": {
                name: {
                    "median": pr.median,
                    "p25": pr.p25,
                    "p75": pr.p75,
                    "tracks": [
                        {
                            "id": t.track_id,
                            "median": t.median,
                            "p25": t.p25,
                            "p75": t.p75,
                            "segments": t.segments,
                        }
                        for t in pr.tracks
                    ],
                }
                for name, pr in self.parts.items()
            },
            "average_median": self.average_median,
        }
        return json.dumps(doc, indent=2)


def _median(values: Sequence[float]) -> float:
    # midpoint convention for even counts
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def _quantile(values: Sequence[float], q: float) -> float:
    # linear interpolation between closest ranks
    ordered = sorted(values)
    if len(ordered) == 1:
        return float(ordered[0])
    pos = q * (len(ordered) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(ordered) - 1)
    frac = pos - lo
    return ordered[lo] + (ordered[hi] - ordered[lo]) * frac


def segment_bounds(n_samples: int, sample_rate: int, segment_s: float) -> list[tuple[int, int]]:
    """Non-overlapping segment windows; a trailing partial segment is dropped."""
    seg = int(round(segment_s * sample_rate))
    return [(k * seg, (k + 1) * seg) for k in range(n_samples // seg)]


def median_sdr(
    references: Sequence[dict[str, np.ndarray]],
    estimates: Sequence[dict[str, np.ndarray]],
    sample_rate: int,
    segment_s: float = 2.0,
    metric: str = "sdr",
    track_ids: Optional[Sequence[str]] = None,
) -> SdrReport:
    """Aggregate per-segment metrics into the dataset-level report.

    ``references`` and ``estimates`` are parallel per-track dicts mapping
    part name to waveform. Tracks shorter than one segment are excluded.
    """
    if len(references) != len(estimates):
        raise ValueError("references/estimates track counts differ")
    metric_fn = METRICS[metric]
    ids = list(track_ids) if track_ids else [f"track{i}" for i in range(len(references))]
    part_names: list[str] = []
    for track in references:
        for name in track:
            if name not in part_names:
                part_names.append(name)

    parts: dict[str, PartResult] = {name: PartResult(part=name) for name in part_names}
    for track_id, ref_track, est_track in zip(ids, references, estimates):
        for name in part_names:
            if name not in ref_track:
                continue
            ref, est = _as_pair(ref_track[name], est_track[name])
            bounds = segment_bounds(ref.size, sample_rate, segment_s)
            if not bounds:
                continue
            segments: list[Optional[float]] = []
            for lo, hi in bounds:
                try:
                    segments.append(metric_fn(ref[lo:hi], est[lo:hi]))
                except SilentReference:
                    segments.append(None)
            valid = [s for s in segments if s is not None]
            parts[name].tracks.append(
                TrackResult(
                    track_id=track_id,
                    segments=segments,
                    median=_median(valid) if valid else None,
                    p25=_quantile(valid, 0.25) if valid else None,
                    p75=_quantile(valid, 0.75) if valid else None,
                )
            )

    medians = []
    for pr in parts.values():
        track_medians = [t.median for t in pr.tracks if t.median is not None]
        if track_medians:
            pr.median = _median(track_medians)
            pr.p25 = _quantile(track_medians, 0.25)
            pr.p75 = _quantile(track_medians, 0.75)
            medians.append(pr.median)
    average = sum(medians) / len(medians) if medians else None
    return SdrReport(
        metric=metric,
        segment_s=segment_s,
        sample_rate=sample_rate,
        parts=parts,
        average_median=average,
    )


# ---------------------------------------------------------------------------
# Oracle mask separation
# ---------------------------------------------------------------------------


def oracle_separate(
    mixture: np.ndarray,
    stems: dict[str, np.ndarray],
    kind: str = "IRM",
    cfg: StftConfig = StftConfig(),
) -> dict[str, np.ndarray]:
    """Upper-bound estimates from ground-truth time-frequency masks.

    IBM assigns each bin to the loudest part (ties to the lowest part
    index); IRM splits each bin proportionally to stem magnitudes.
    Estimates are the masked mixture spectrogram inverted back to audio.
    """
    kind = kind.upper()
    if kind not in ("IBM", "IRM"):
        raise ValueError(f"unknown oracle kind {kind!r}")
    lengths = {len(s) for s in stems.values()} | {len(mixture)}
    if len(lengths) != 1:
        raise ValueError(f"stems/mixture length mismatch: {sorted(lengths)}")

    # pad by one window on both ends: masked spectra are inconsistent STFTs
    # and the overlap-add normalization would blow them up at the raw edges
    n = len(mixture)
    pad = cfg.window_size
    mix_spec = stft(np.pad(np.asarray(mixture, dtype=np.float64), pad), cfg)
    mags = {
        name: np.abs(stft(np.pad(np.asarray(stem, dtype=np.float64), pad), cfg).data)
        for name, stem in stems.items()
    }
    names = list(stems.keys())

    if kind == "IBM":
        stacked = np.stack([mags[name] for name in names])
        winner = np.argmax(stacked, axis=0)  # argmax takes the first (lowest) on ties
        masks = {name: (winner == i).astype(np.float64) for i, name in enumerate(names)}
    else:
        total = sum(mags.values()) + _IRM_EPS
        masks = {name: mags[name] / total for name in names}

    out = {}
    for name in names:
        masked = Spectrogram(mix_spec.data * masks[name], cfg, mix_spec.length)
        out[name] = istft(masked)[pad : pad + n].astype(np.float32)
    return out


def oracle_masks(
    stems: dict[str, np.ndarray], kind: str = "IRM", cfg: StftConfig = StftConfig()
) -> dict[str, np.ndarray]:
    """The masks alone (for inspection/tests), same conventions as above."""
    kind = kind.upper()
    mags = {name: np.abs(stft(stem, cfg).data) for name, stem in stems.items()}
    names = list(stems.keys())
    if kind == "IBM":
        stacked = np.stack([mags[name] for name in names])
        winner = np.argmax(stacked, axis=0)
        return {name: (winner == i).astype(np.float64) for i, name in enumerate(names)}
    total = sum(mags.values()) + _IRM_EPS
    return {name: mags[name] / total for name in names}
