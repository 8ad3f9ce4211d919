import random

import pytest

from choralforge.errors import ConfigError
from choralforge.expression import (
    ExpressionConfig,
    apply_legato,
    apply_velocity_curve,
    assign_syllables,
    make_performance,
    part_rng,
    segment_phrases,
)
from choralforge.score_io import Note, Score, VoicePart, ticks_to_seconds, write_midi

PPQ = 480


def part_from_rows(rows, name="soprano", breaths=None):
    notes = tuple(Note(onset, dur, pitch, 80) for onset, dur, pitch in rows)
    return VoicePart(part_name=name, notes=notes, breath_breaks=breaths)


def chain(pitches, dur=PPQ, gap_after=()):
    """Contiguous notes; gap_after lists indices followed by a 1-beat rest."""
    rows = []
    tick = 0
    for i, p in enumerate(pitches):
        rows.append((tick, dur, p))
        tick += dur
        if i in gap_after:
            tick += PPQ
    return part_from_rows(rows)


def random_part(rng, n_notes=None, name="soprano"):
    tick = 0
    rows = []
    for _ in range(n_notes or rng.randint(1, 30)):
        if rng.random() < 0.3:
            tick += rng.randint(1, 2 * PPQ)
        dur = rng.randint(PPQ // 4, 2 * PPQ)
        rows.append((tick, dur, rng.randint(40, 90)))
        tick += dur
    return part_from_rows(rows, name=name)


CFG = ExpressionConfig(seed=1234)


class TestPhrases:
    def test_zero_gaps_one_phrase(self):
        part = chain([60, 62, 64, 65])
        phrases = segment_phrases(part, CFG, PPQ)
        assert len(phrases) == 1
        assert (phrases[0].start, phrases[0].end) == (0, 4)

    def test_threshold_is_inclusive(self):
        # rest of exactly phrase_gap_beats between notes 3 and 4
        gap_ticks = int(CFG.phrase_gap_beats * PPQ)
        rows = [(i * PPQ, PPQ, 60) for i in range(3)]
        rows.append((3 * PPQ + gap_ticks, PPQ, 60))
        phrases = segment_phrases(part_from_rows(rows), CFG, PPQ)
        assert [(p.start, p.end) for p in phrases] == [(0, 3), (3, 4)]

    def test_just_under_threshold_no_split(self):
        gap_ticks = int(CFG.phrase_gap_beats * PPQ) - 1
        rows = [(0, PPQ, 60), (PPQ + gap_ticks, PPQ, 62)]
        assert len(segment_phrases(part_from_rows(rows), CFG, PPQ)) == 1

    def test_breath_breaks_override_gaps(self):
        part = part_from_rows(
            [(0, PPQ, 60), (PPQ, PPQ, 62), (2 * PPQ, PPQ, 64)], breaths=(2 * PPQ,)
        )
        phrases = segment_phrases(part, CFG, PPQ)
        assert [(p.start, p.end) for p in phrases] == [(0, 2), (2, 3)]

    def test_single_note(self):
        phrases = segment_phrases(chain([60]), CFG, PPQ)
        assert [(p.start, p.end) for p in phrases] == [(0, 1)]

    def test_partition_property(self):
        rng = random.Random(5)
        for _ in range(200):
            part = random_part(rng)
            phrases = segment_phrases(part, CFG, PPQ)
            covered = [i for p in phrases for i in range(p.start, p.end)]
            assert covered == list(range(len(part.notes)))


class TestLegato:
    def test_perfect_fifth_never_legato(self):
        part = chain([60, 67])  # exactly 7 semitones
        flags = apply_legato(segment_phrases(part, CFG, PPQ), part, CFG)
        assert flags == [False, False]

    def test_six_semitones_legato(self):
        part = chain([60, 66])
        flags = apply_legato(segment_phrases(part, CFG, PPQ), part, CFG)
        assert flags == [False, True]

    def test_no_legato_across_phrase_boundary(self):
        part = chain([60, 61], gap_after=(0,))
        phrases = segment_phrases(part, CFG, PPQ)
        assert len(phrases) == 2
        assert apply_legato(phrases, part, CFG) == [False, False]

    def test_rest_blocks_legato(self):
        # a rest shorter than the phrase gap: same phrase but not contiguous
        rows = [(0, PPQ, 60), (PPQ + 10, PPQ, 61)]
        part = part_from_rows(rows)
        phrases = segment_phrases(part, CFG, PPQ)
        assert len(phrases) == 1
        assert apply_legato(phrases, part, CFG) == [False, False]


class TestVelocityCurves:
    def cfg(self, curve):
        return ExpressionConfig(curve_types=(curve,), seed=0)

    def test_crescendo_three_notes(self):
        part = part_from_rows([(0, PPQ, 60), (PPQ, PPQ, 60), (2 * PPQ, PPQ, 60)])
        vels = apply_velocity_curve(part.notes, self.cfg("crescendo"), random.Random(0))
        assert vels == [50, 80, 110]

    def test_diminuendo_three_notes(self):
        part = part_from_rows([(0, PPQ, 60), (PPQ, PPQ, 60), (2 * PPQ, PPQ, 60)])
        vels = apply_velocity_curve(part.notes, self.cfg("diminuendo"), random.Random(0))
        assert vels == [110, 80, 50]

    def test_cresc_dim_five_notes(self):
        part = part_from_rows([(i * PPQ, PPQ, 60) for i in range(5)])
        vels = apply_velocity_curve(part.notes, self.cfg("cresc_dim"), random.Random(0))
        assert vels == [50, 80, 110, 80, 50]

    def test_cresc_dim_matches_piecewise_oracle(self):
        def oracle(x):
            if x <= 0.5:
                v = 50 + 2 * x * 60
            else:
                v = 110 - 2 * (x - 0.5) * 60
            return int(v + 0.5)

        n = 9
        part = part_from_rows([(i * PPQ, PPQ, 60) for i in range(n)])
        vels = apply_velocity_curve(part.notes, self.cfg("cresc_dim"), random.Random(0))
        assert vels == [oracle(i / (n - 1)) for i in range(n)]

    def test_single_note_midpoint(self):
        part = part_from_rows([(0, PPQ, 60)])
        assert apply_velocity_curve(part.notes, self.cfg("crescendo"), random.Random(0)) == [80]

    def test_bounds_and_monotonicity(self):
        rng = random.Random(9)
        for _ in range(200):
            part = random_part(rng)
            vels = apply_velocity_curve(part.notes, self.cfg("crescendo"), random.Random(1))
            assert all(50 <= v <= 110 for v in vels)
            assert vels == sorted(vels)
            vels = apply_velocity_curve(part.notes, self.cfg("diminuendo"), random.Random(1))
            assert vels == sorted(vels, reverse=True)


class TestSyllables:
    def test_singleton_set(self):
        cfg = ExpressionConfig(syllable_set=("la",), seed=0)
        assert assign_syllables(5, cfg, random.Random(3)) == ["la"] * 5

    def test_deterministic_for_fixed_seed(self):
        a = assign_syllables(20, CFG, part_rng(42, "piece", "soprano"))
        b = assign_syllables(20, CFG, part_rng(42, "piece", "soprano"))
        assert a == b

    def test_different_seeds_differ(self):
        a = assign_syllables(20, CFG, part_rng(42, "piece", "soprano"))
        b = assign_syllables(20, CFG, part_rng(43, "piece", "soprano"))
        assert a != b

    def test_empty_set_is_config_error(self):
        with pytest.raises(ConfigError):
            ExpressionConfig(syllable_set=())


def score_of(parts):
    return Score(parts=tuple(parts), ticks_per_quarter=PPQ, tempo_bpm=90.0)


class TestMakePerformance:
    def test_standard_mode(self):
        score = score_of([chain([60, 62, 67, 74])])
        perf = make_performance(score, CFG, mode="standard")
        notes = perf.parts[0].notes
        assert all(n.velocity == 96 for n in notes)
        assert all(not n.legato_from_prev for n in notes)
        assert all(n.syllable == CFG.syllable_set[0] for n in notes)

    def test_chromatic_scale_all_legato(self):
        score = score_of([chain(list(range(60, 72)))])
        perf = make_performance(score, CFG, mode="expressive")
        assert all(n.legato_from_prev for n in perf.parts[0].notes[1:])

    def test_duration_matches_tick_arithmetic(self):
        score = score_of([chain([60, 62, 64])])
        perf = make_performance(score, CFG, mode="standard")
        last = score.parts[0].notes[-1]
        assert perf.duration_s == pytest.approx(
            ticks_to_seconds(last.offset_ticks, PPQ, 90.0)
        )

    def test_legato_overlap_extends_previous_note(self):
        score = score_of([chain([60, 62])])
        perf = make_performance(score, CFG, mode="expressive")
        first, second = perf.parts[0].notes
        assert second.legato_from_prev
        assert first.end_s == pytest.approx(second.start_s + CFG.legato_overlap_ms / 1000.0)

    def test_determinism_byte_for_byte(self):
        rng = random.Random(77)
        score = score_of([random_part(rng, name="soprano"), random_part(rng, name="alto")])
        a = make_performance(score, CFG, piece_id="p1")
        b = make_performance(score, CFG, piece_id="p1")
        assert a == b
        assert write_midi(a) == write_midi(b)

    def test_piece_id_changes_randomness(self):
        score = score_of([random_part(random.Random(3), n_notes=30)])
        a = make_performance(score, CFG, piece_id="p1")
        b = make_performance(score, CFG, piece_id="p2")
        assert a != b

    def test_legato_iff_property(self):
        # independent pairwise recomputation of the legato rule
        rng = random.Random(31)
        gap_ticks = CFG.phrase_gap_beats * PPQ
        for _ in range(200):
            part = random_part(rng)
            score = score_of([part])
            perf = make_performance(score, CFG, mode="expressive")
            for i in range(1, len(part.notes)):
                prev, cur = part.notes[i - 1], part.notes[i]
                rest = cur.onset_ticks - prev.offset_ticks
                same_phrase = rest < gap_ticks
                contiguous = rest == 0
                interval = abs(cur.pitch - prev.pitch)
                expected = same_phrase and contiguous and interval < 7
                assert perf.parts[0].notes[i].legato_from_prev == expected
