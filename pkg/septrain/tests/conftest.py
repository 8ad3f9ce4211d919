import json
import random
import subprocess

import pytest

PART_RANGES = {
    "soprano": (59, 86),
    "alto": (52, 79),
    "tenor": (47, 73),
    "bass": (33, 62),
}

# rendered-corpus timbre assignments (set A = the renderer's defaults)
TIMBRE_A = {"soprano": "test", "alto": "test", "tenor": "test", "bass": "test"}
TIMBRE_B = {
    "soprano": "test:square",
    "alto": "test:triangle",
    "tenor": "test:sine",
    "bass": "test:sawtooth",
}


def random_score_text(rng: random.Random, beats: float = 8.0) -> str:
    """A plausible SATB piece in the toolkit's plain-text score format."""
    lines = ["tempo 90", "ppq 480"]
    for part, (lo, hi) in PART_RANGES.items():
        pitch = rng.randint(lo + 4, hi - 4)
        beat = 0.0
        while beat < beats:
            dur = min(rng.choice((0.5, 1.0, 1.0, 2.0)), beats - beat)
            lines.append(f"{part} {beat:g} {dur:g} {pitch} {rng.randint(60, 100)}")
            beat += dur
            if rng.random() < 0.15:
                beat += 0.5
            pitch = min(hi, max(lo, pitch + rng.choice((-5, -4, -2, -1, 1, 2, 4, 5))))
    return "\n".join(lines) + "\n"


def build_corpus(
    root,
    n_pieces: int,
    beats: float,
    mode: str = "expressive",
    banks=None,
    seed: int = 7,
    score_seed: int = 100,
    split_ratios=(0.5, 0.5),
    transpose=(0,),
):
    """Render a corpus with the dataset CLI; returns the manifest path."""
    root.mkdir(parents=True, exist_ok=True)
    scores = root / "scores"
    scores.mkdir(exist_ok=True)
    rng = random.Random(score_seed)
    for i in range(n_pieces):
        (scores / f"piece{i:02d}.txt").write_text(random_score_text(rng, beats))
    config = {
        "scores": "scores",
        "output": "data",
        "mode": mode,
        "parts": {name: {"bank": bank} for name, bank in (banks or TIMBRE_A).items()},
        "transpose": list(transpose),
        "seed": seed,
    }
    if split_ratios is not None:
        config["split"] = {"ratios": list(split_ratios)}
    config_path = root / "pipeline.yaml"
    config_path.write_text(json.dumps(config))  # JSON is valid YAML
    proc = subprocess.run(
        ["choralforge", "build", str(config_path), "--jobs", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr or proc.stdout
    return root / "data" / "manifest.json"


@pytest.fixture(scope="session")
def tiny_manifest(tmp_path_factory):
    """Four short expressive pieces, half train / half test."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    return build_corpus(root, n_pieces=4, beats=6.0)


@pytest.fixture(scope="session")
def overfit_manifest(tmp_path_factory):
    """One 30-second piece (45 beats at 90 bpm), all in the train split."""
    root = tmp_path_factory.mktemp("overfit_corpus")
    return build_corpus(root, n_pieces=1, beats=45.0, split_ratios=None)

