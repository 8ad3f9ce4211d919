import random

import numpy as np
import pytest

from choralforge.dataset import (
    DatasetManifest,
    MixPolicy,
    build_dataset,
    extract_segments,
    load_piece,
    mix,
    split,
)
from choralforge.range_transform import TransposeSet

from conftest import PART_NAMES, random_four_part_score


class TestMix:
    def test_all_zero_stems(self):
        stems = {"a": np.zeros(100, dtype=np.float32), "b": np.zeros(100, dtype=np.float32)}
        mixture, gain = mix(stems)
        assert gain == 1.0
        assert not np.any(mixture)

    def test_gain_halves_at_double_peak(self):
        stems = {
            "a": np.full(10, 0.98, dtype=np.float32),
            "b": np.full(10, 0.98, dtype=np.float32),
        }
        _, gain = mix(stems, MixPolicy(peak_target=0.98))
        assert gain == pytest.approx(0.5)

    def test_no_boost_below_target(self):
        stems = {"a": np.full(10, 0.1, dtype=np.float32)}
        mixture, gain = mix(stems)
        assert gain == 1.0
        assert np.allclose(mixture, 0.1)

    def test_linearity_random_stems(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            stems = {
                name: rng.normal(scale=0.4, size=5000).astype(np.float32)
                for name in PART_NAMES
            }
            mixture, gain = mix(stems)
            stored = {n: (gain * s).astype(np.float32) for n, s in stems.items()}
            total = np.zeros(5000, dtype=np.float64)
            for s in stored.values():
                total += s
            assert np.max(np.abs(mixture - total)) < 1e-6

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            mix({"a": np.zeros(5, dtype=np.float32), "b": np.zeros(6, dtype=np.float32)})


class TestSplit:
    def test_corpus_counts(self):
        ids = [f"p{i:03d}" for i in range(347)]
        assignment = split(ids, counts=(277, 35, 35), seed=7)
        sizes = {name: sum(1 for v in assignment.values() if v == name) for name in ("train", "valid", "test")}
        assert sizes == {"train": 277, "valid": 35, "test": 35}

    def test_ratio_floor_for_train(self):
        ids = [f"p{i}" for i in range(20)]
        assignment = split(ids, ratios=(0.1, 0.9), seed=1)
        assert sum(1 for v in assignment.values() if v == "train") == 2
        assert sum(1 for v in assignment.values() if v == "test") == 18

    def test_deterministic(self):
        ids = [f"p{i}" for i in range(50)]
        assert split(ids, counts=(40, 5, 5), seed=3) == split(ids, counts=(40, 5, 5), seed=3)
        assert split(ids, counts=(40, 5, 5), seed=3) != split(ids, counts=(40, 5, 5), seed=4)

    def test_counts_must_match_population(self):
        with pytest.raises(ValueError, match="sum"):
            split(["a", "b"], counts=(2, 1))

    def test_exclusive_arguments(self):
        with pytest.raises(ValueError):
            split(["a"], counts=(1,), ratios=(1.0,))
        with pytest.raises(ValueError):
            split(["a"])


@pytest.fixture()
def built(tmp_path, two_scores, satb_banks):
    manifest = build_dataset(
        two_scores,
        satb_banks,
        tmp_path / "ds",
        mode="expressive",
        split_ratios=(0.5, 0.5),
        seed=11,
    )
    return tmp_path / "ds", manifest


class TestBuildDataset:
    def test_counts_and_files(self, built):
        root, manifest = built
        assert len(manifest.pieces) == 14  # 2 pieces x 7 offsets
        assert all(p.status == "ok" for p in manifest.pieces)
        mixtures = list(root.glob("pieces/*/mix.wav"))
        stems = [p for p in root.glob("pieces/*/*.wav") if p.name != "mix.wav"]
        assert len(mixtures) == 14
        assert len(stems) == 56

    def test_manifest_round_trip_bytes(self, built):
        root, manifest = built
        text = (root / "manifest.json").read_text()
        reparsed = DatasetManifest.from_json(text)
        assert reparsed.to_json() == text

    def test_splits_inherited_by_renditions(self, built):
        _, manifest = built
        by_source = {}
        for entry in manifest.pieces:
            by_source.setdefault(entry.source, set()).add(entry.split)
        assert all(len(splits) == 1 for splits in by_source.values())

    def test_mixture_equals_stem_sum(self, built):
        root, manifest = built
        for entry in manifest.pieces[:4]:
            mixture, stems = load_piece(manifest, entry)
            total = np.zeros(len(mixture), dtype=np.float64)
            for stem in stems.values():
                total += stem
            assert np.max(np.abs(mixture - total)) < 1e-6

    def test_rerun_rewrites_nothing(self, built, two_scores, satb_banks):
        root, _ = built
        before = {p: p.stat().st_mtime_ns for p in root.rglob("*.wav")}
        build_dataset(
            two_scores, satb_banks, root, mode="expressive", split_ratios=(0.5, 0.5), seed=11
        )
        after = {p: p.stat().st_mtime_ns for p in root.rglob("*.wav")}
        assert before == after

    def test_changed_seed_rebuilds(self, built, two_scores, satb_banks):
        root, _ = built
        before = {p: p.stat().st_mtime_ns for p in root.rglob("*.wav")}
        build_dataset(
            two_scores, satb_banks, root, mode="expressive", split_ratios=(0.5, 0.5), seed=12
        )
        after = {p: p.stat().st_mtime_ns for p in root.rglob("*.wav")}
        assert before != after

    def test_determinism_across_directories(self, tmp_path, two_scores, satb_banks):
        kwargs = dict(mode="expressive", split_ratios=(0.5, 0.5), seed=5)
        build_dataset(two_scores, satb_banks, tmp_path / "a", **kwargs)
        build_dataset(two_scores, satb_banks, tmp_path / "b", **kwargs)
        a_manifest = (tmp_path / "a" / "manifest.json").read_bytes()
        b_manifest = (tmp_path / "b" / "manifest.json").read_bytes()
        assert a_manifest == b_manifest
        for wav_a in sorted((tmp_path / "a").rglob("*.wav")):
            wav_b = tmp_path / "b" / wav_a.relative_to(tmp_path / "a")
            assert wav_a.read_bytes() == wav_b.read_bytes()

    def test_jobs_parallel_same_output(self, tmp_path, two_scores, satb_banks):
        kwargs = dict(mode="standard", split_ratios=(0.5, 0.5), seed=5)
        build_dataset(two_scores, satb_banks, tmp_path / "seq", jobs=1, **kwargs)
        build_dataset(two_scores, satb_banks, tmp_path / "par", jobs=4, **kwargs)
        assert (tmp_path / "seq" / "manifest.json").read_bytes() == (
            tmp_path / "par" / "manifest.json"
        ).read_bytes()

    def test_standard_vs_expressive_structure(self, tmp_path, two_scores, satb_banks):
        kwargs = dict(split_ratios=(0.5, 0.5), seed=11)
        std = build_dataset(two_scores, satb_banks, tmp_path / "std", mode="standard", **kwargs)
        exp = build_dataset(two_scores, satb_banks, tmp_path / "exp", mode="expressive", **kwargs)
        assert std.mode == "standard" and exp.mode == "expressive"
        for a, b in zip(std.pieces, exp.pieces):
            assert (a.id, a.source, a.split, a.transpose_offset, a.tempo_bpm) == (
                b.id, b.source, b.split, b.transpose_offset, b.tempo_bpm
            )
        # same structure, different audio
        a0, b0 = std.pieces[0], exp.pieces[0]
        wav_a = (tmp_path / "std" / a0.mixture).read_bytes()
        wav_b = (tmp_path / "exp" / b0.mixture).read_bytes()
        assert wav_a != wav_b

    def test_failed_piece_recorded_run_continues(self, tmp_path, two_scores, satb_banks):
        banks = dict(satb_banks)
        del banks["bass"]  # render of every rendition's bass part will fail
        manifest = build_dataset(
            two_scores, banks, tmp_path / "ds", transpose_set=TransposeSet((0,)), seed=1
        )
        assert all(p.status == "failed" for p in manifest.pieces)
        assert all(p.error for p in manifest.pieces)

    def test_duplicate_ids_rejected(self, tmp_path, two_scores, satb_banks):
        doubled = two_scores + [two_scores[0]]
        with pytest.raises(ValueError, match="duplicate"):
            build_dataset(doubled, satb_banks, tmp_path / "ds")


class TestExtractSegments:
    def test_window_arithmetic_and_alignment(self, built):
        _, manifest = built
        segs = list(extract_segments(manifest, "train", segment_s=2.0, seed=3, count=20))
        window = int(2.0 * manifest.sample_rate)
        for mixture, stems in segs:
            assert len(mixture) == window
            total = np.zeros(window, dtype=np.float64)
            for stem in stems.values():
                total += stem
            assert np.max(np.abs(mixture - total)) < 1e-6

    def test_deterministic_under_seed(self, built):
        _, manifest = built
        a = list(extract_segments(manifest, "train", seed=9, count=10))
        b = list(extract_segments(manifest, "train", seed=9, count=10))
        for (ma, sa), (mb, sb) in zip(a, b):
            assert np.array_equal(ma, mb)
            assert all(np.array_equal(sa[k], sb[k]) for k in sa)

    def test_short_pieces_excluded(self, tmp_path, satb_banks):
        rng = random.Random(1)
        scores = [
            ("long", random_four_part_score(rng, beats=6)),
            ("short", random_four_part_score(rng, beats=1)),  # < 2 s at 90 bpm
        ]
        manifest = build_dataset(
            scores, satb_banks, tmp_path / "ds", transpose_set=TransposeSet((0,)), seed=2
        )
        with pytest.warns(UserWarning, match="shorter"):
            segs = list(extract_segments(manifest, "train", seed=1, count=5))
        assert len(segs) == 5
