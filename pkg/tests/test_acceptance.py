"""End-to-end acceptance criteria, one test per criterion, stated tolerances.

Run with `pytest tests/test_acceptance.py` — a PASS/FAIL line per criterion
is printed in the terminal summary (see conftest).
"""
import math
import random
import time

import numpy as np
import pytest
import yaml

from choralforge.cli import main as cli_main
from choralforge.dataset import build_dataset, load_piece, split
from choralforge.evalkit import StftConfig, istft, median_sdr, oracle_separate, sdr, si_sdr, stft
from choralforge.expression import ExpressionConfig, make_performance
from choralforge.range_transform import (
    ENSEMBLE_VOCAL_RANGES,
    FULL_MIDI_RANGE,
    SOLO_VOCAL_RANGES,
    PitchRange,
    TransposeSet,
    expand_augmentations,
    fit_pitch,
)
from choralforge.score_io import format_text_score

from conftest import PART_NAMES, random_four_part_score

SR = 22050

# Regression values measured once on the seed-1234 ten-piece corpus below.
FROZEN_MEDIANS = {
    "baseline": {"soprano": -6.1513, "alto": -2.2541, "tenor": -7.2985, "bass": -4.6620},
    "IRM": {"soprano": 22.8438, "alto": 22.0767, "tenor": 15.3654, "bass": 37.3244},
    "IBM": {"soprano": 22.6777, "alto": 20.5264, "tenor": 16.0756, "bass": 38.8711},
}


@pytest.fixture(scope="module")
def corpus(tmp_path_factory, satb_banks):
    """Ten expressive test-bank pieces, single transpose offset."""
    rng = random.Random(1234)
    scores = [(f"piece{i:02d}", random_four_part_score(rng, beats=8)) for i in range(10)]
    out = tmp_path_factory.mktemp("acceptance") / "corpus"
    t0 = time.monotonic()
    manifest = build_dataset(
        scores, satb_banks, out, mode="expressive", transpose_set=TransposeSet((0,)), seed=1234
    )
    build_s = time.monotonic() - t0
    assert all(p.status == "ok" for p in manifest.pieces)
    return manifest, build_s


def test_mixture_linearity(corpus):
    """max |mixture - sum(stems)| < 1e-6 on every piece; under one minute."""
    manifest, build_s = corpus
    t0 = time.monotonic()
    assert len(manifest.pieces) >= 10
    for entry in manifest.pieces:
        mixture, stems = load_piece(manifest, entry)
        total = np.zeros(len(mixture), dtype=np.float64)
        for stem in stems.values():
            total += stem
        assert np.max(np.abs(mixture - total)) < 1e-6, entry.id
    assert build_s + (time.monotonic() - t0) < 60.0


def test_stft_round_trip():
    """Interior relative RMS error < 1e-6 over 100 random 2 s signals."""
    cfg = StftConfig(window_size=2048, fft_size=2048, hop=441)
    rng = np.random.default_rng(42)
    for _ in range(100):
        x = rng.normal(size=2 * SR)
        y = istft(stft(x, cfg))
        inner = slice(cfg.window_size, x.size - cfg.window_size)
        err = np.sqrt(np.mean((x[inner] - y[inner]) ** 2))
        assert err / np.sqrt(np.mean(x[inner] ** 2)) < 1e-6


def test_sdr_analytic_suite():
    rng = np.random.default_rng(7)
    s = rng.normal(size=8192)
    assert sdr(s, s) == math.inf
    assert abs(sdr(s, 2 * s)) < 1e-9
    assert abs(sdr(s, np.zeros_like(s))) < 1e-9
    for alpha in (0.5, 1.0, 2.0):
        assert si_sdr(s, alpha * s) == math.inf
    for _ in range(1000):
        ref = rng.normal(size=256)
        est = rng.normal(size=256)
        a = np.linalg.lstsq(ref[:, None], est, rcond=None)[0][0]
        oracle = 10 * np.log10(np.sum((a * ref) ** 2) / np.sum((est - a * ref) ** 2))
        assert si_sdr(ref, est) == pytest.approx(oracle, abs=1e-9)


def _oracle_median(values):
    ordered = sorted(values)
    n = len(ordered)
    return ordered[n // 2] if n % 2 else (ordered[n // 2 - 1] + ordered[n // 2]) / 2.0


def test_median_protocol_against_sort_oracle():
    """Exact agreement on 1000 randomized segment/track configurations."""
    sr = 50
    seg = 2 * sr
    rng = np.random.default_rng(9)
    for _ in range(1000):
        n_tracks = int(rng.integers(1, 5))
        refs, ests = [], []
        for _ in range(n_tracks):
            n = int(rng.integers(seg, 5 * seg + 31))  # partial trailing segments included
            ref = rng.normal(size=n)
            if rng.random() < 0.4:
                lo = int(rng.integers(0, max(1, n - seg)))
                ref[lo : lo + seg] = 0.0  # silent-reference segments included
            est = ref + rng.normal(size=n) * rng.choice([0.0, 0.4, 2.0])
            refs.append({"p": ref})
            ests.append({"p": est})
        report = median_sdr(refs, ests, sample_rate=sr)

        track_medians = []
        for ref_t, est_t, track in zip(refs, ests, report.parts["p"].tracks):
            ref, est = ref_t["p"], est_t["p"]
            values = []
            for k in range(len(ref) // seg):
                r = ref[k * seg : (k + 1) * seg]
                e = est[k * seg : (k + 1) * seg]
                if math.sqrt(np.sum(r * r) / seg) < 1e-3:
                    values.append(None)
                    continue
                err = float(np.sum((r - e) ** 2))
                values.append(math.inf if err == 0 else 10 * math.log10(float(np.sum(r * r)) / err))
            assert values == track.segments
            finite = [v for v in values if v is not None]
            if finite:
                assert track.median == _oracle_median(finite)
                track_medians.append(_oracle_median(finite))
        if track_medians:
            assert report.parts["p"].median == _oracle_median(track_medians)


def test_octave_fit_exhaustive():
    """All pitches x all shipped ranges: in range, class preserved, minimal."""
    ranges = {
        (r.low, r.high)
        for r in [FULL_MIDI_RANGE, *SOLO_VOCAL_RANGES.values(), *ENSEMBLE_VOCAL_RANGES.values()]
    }
    for low, high in sorted(ranges):
        rng = PitchRange(low, high)
        for pitch in range(128):
            fitted, clamped = fit_pitch(pitch, rng)
            assert not clamped
            assert low <= fitted <= high
            assert fitted % 12 == pitch % 12
            candidates = [pitch + 12 * k for k in range(-11, 12) if low <= pitch + 12 * k <= high]
            assert abs(fitted - pitch) == min(abs(c - pitch) for c in candidates)
            assert fit_pitch(fitted, rng) == (fitted, False)  # idempotent


def test_augmentation_arithmetic():
    rng = random.Random(5)
    score = random_four_part_score(rng, beats=2)
    out = expand_augmentations(score, {n: SOLO_VOCAL_RANGES[n] for n in PART_NAMES})
    assert len(out) == 7

    ids = [f"piece{i:03d}" for i in range(347)]
    assignment = split(ids, counts=(277, 35, 35), seed=99)
    sizes = [sum(1 for v in assignment.values() if v == name) for name in ("train", "valid", "test")]
    assert sizes == [277, 35, 35]


def test_expression_properties():
    """Legato iff rule, strict 7-semitone cutoff, curve monotonicity, bounds."""
    cfg = ExpressionConfig(seed=77)
    gap_ticks = cfg.phrase_gap_beats * 480
    rng = random.Random(31)
    crescendo_cfg = ExpressionConfig(curve_types=("crescendo",), seed=77)
    for i in range(1000):
        score = random_four_part_score(rng, beats=3)
        perf = make_performance(score, cfg, mode="expressive", piece_id=f"p{i}")
        for part, ppart in zip(score.parts, perf.parts):
            for j in range(1, len(part.notes)):
                prev, cur = part.notes[j - 1], part.notes[j]
                rest = cur.onset_ticks - prev.offset_ticks
                expected = (
                    rest < gap_ticks and rest == 0 and abs(cur.pitch - prev.pitch) < 7
                )
                assert ppart.notes[j].legato_from_prev == expected
            for note in ppart.notes:
                assert cfg.velocity_min <= note.velocity <= cfg.velocity_max
        if i % 50 == 0:  # crescendo monotonicity on a sample of scores
            cperf = make_performance(score, crescendo_cfg, mode="expressive", piece_id=f"c{i}")
            for part, ppart in zip(score.parts, cperf.parts):
                from choralforge.expression import segment_phrases

                for phrase in segment_phrases(part, crescendo_cfg, score.ticks_per_quarter):
                    vels = [n.velocity for n in ppart.notes[phrase.start : phrase.end]]
                    assert vels == sorted(vels)

    # exactly a perfect fifth, contiguous, same phrase: never legato
    from choralforge.score_io import Note, Score, VoicePart

    part = VoicePart("soprano", (Note(0, 480, 60, 80), Note(480, 480, 67, 80)))
    perf = make_performance(Score(parts=(part,)), cfg, mode="expressive")
    assert not perf.parts[0].notes[1].legato_from_prev


def test_oracle_ordering(corpus):
    """IRM and IBM beat the mixture-as-estimate baseline by >= 5 dB median."""
    manifest, _ = corpus
    t0 = time.monotonic()
    refs, base_est, irm_est, ibm_est, ids = [], [], [], [], []
    for entry in manifest.pieces:
        mixture, stems = load_piece(manifest, entry)
        refs.append(stems)
        base_est.append({name: mixture for name in stems})
        irm_est.append(oracle_separate(mixture, stems, kind="IRM"))
        ibm_est.append(oracle_separate(mixture, stems, kind="IBM"))
        ids.append(entry.id)

    reports = {
        "baseline": median_sdr(refs, base_est, SR, track_ids=ids),
        "IRM": median_sdr(refs, irm_est, SR, track_ids=ids),
        "IBM": median_sdr(refs, ibm_est, SR, track_ids=ids),
    }
    for kind in ("IRM", "IBM"):
        for part in PART_NAMES:
            margin = reports[kind].parts[part].median - reports["baseline"].parts[part].median
            assert margin >= 5.0, (kind, part, margin)
    for kind, frozen in FROZEN_MEDIANS.items():
        for part, value in frozen.items():
            assert reports[kind].parts[part].median == pytest.approx(value, abs=0.05), (kind, part)
    assert time.monotonic() - t0 < 300.0


def test_build_determinism(tmp_path, satb_banks):
    """Two CLI builds with one config/seed: byte-identical manifests and audio."""
    rng = random.Random(55)
    scores_dir = tmp_path / "scores"
    scores_dir.mkdir()
    for i in range(2):
        score = random_four_part_score(rng, beats=4)
        (scores_dir / f"p{i}.txt").write_text(format_text_score(score))
    doc = {
        "scores": "scores",
        "output": None,  # filled per run
        "parts": {name: {"bank": "test"} for name in PART_NAMES},
        "transpose": [-1, 0, 1],
        "seed": 9,
    }
    for run_dir in ("run_a", "run_b"):
        doc["output"] = run_dir
        config = tmp_path / f"{run_dir}.yaml"
        config.write_text(yaml.safe_dump(doc))
        assert cli_main(["build", str(config), "--jobs", "1"]) == 0

    a_root, b_root = tmp_path / "run_a", tmp_path / "run_b"
    assert (a_root / "manifest.json").read_bytes() == (b_root / "manifest.json").read_bytes()
    wavs_a = sorted(p.relative_to(a_root) for p in a_root.rglob("*.wav"))
    wavs_b = sorted(p.relative_to(b_root) for p in b_root.rglob("*.wav"))
    assert wavs_a == wavs_b and len(wavs_a) == 6 * 5
    for rel in wavs_a:
        assert (a_root / rel).read_bytes() == (b_root / rel).read_bytes()
