import random

import pytest

from choralforge.range_transform import SOLO_VOCAL_RANGES
from choralforge.sampler import test_bank as make_test_bank
from choralforge.score_io import Note, Score, VoicePart

PART_NAMES = ("soprano", "alto", "tenor", "bass")
VOWELS = ("a", "e", "i", "o", "u")

_acceptance_results = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        _acceptance_results[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_results.items():
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}")


def random_four_part_score(rng: random.Random, beats: int = 8, ppq: int = 480) -> Score:
    """A plausible SATB piece: stepwise random walks inside each voice range."""
    parts = []
    for name in PART_NAMES:
        lo, hi = SOLO_VOCAL_RANGES[name].low, SOLO_VOCAL_RANGES[name].high
        pitch = rng.randint(lo + 4, hi - 4)
        tick = 0
        notes = []
        while tick < beats * ppq:
            dur = rng.choice((ppq // 2, ppq, ppq, 2 * ppq))
            dur = min(dur, beats * ppq - tick)
            notes.append(Note(tick, dur, pitch, rng.randint(60, 100)))
            tick += dur
            if rng.random() < 0.15:
                tick += rng.choice((ppq // 2, ppq))  # breathe
            pitch = min(hi, max(lo, pitch + rng.choice((-4, -2, -1, 1, 2, 4, 5, -5))))
        parts.append(VoicePart(part_name=name, notes=tuple(notes)))
    return Score(parts=tuple(parts), ticks_per_quarter=ppq, tempo_bpm=90.0)


@pytest.fixture(scope="session")
def satb_banks():
    return {name: make_test_bank(name, VOWELS) for name in PART_NAMES}


@pytest.fixture()
def two_scores():
    rng = random.Random(2024)
    return [(f"piece{i}", random_four_part_score(rng, beats=4)) for i in range(2)]
