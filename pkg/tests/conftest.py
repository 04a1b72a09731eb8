"""Shared fixtures: tiny images, manifests, and synthetic stub pipelines."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest
from PIL import Image

from keywatch.dataset import FrameRecord


def write_image(path: Path, idx: int) -> None:
    """Write a tiny PNG whose pixel content is unique per idx.

    Unique bytes matter: the description cache is content-addressed, so
    frames sharing identical images would share cache entries.
    """
    color = (idx & 0xFF, (idx >> 8) & 0xFF, (idx >> 16) & 0xFF)
    Image.new("RGB", (2, 2), color=color).save(path, format="PNG")


def write_manifest(path: Path, rows: list[tuple[str, str, str, int]]) -> None:
    lines = ["# frame_id\tvideo_id\tpath\tlabel"]
    for frame_id, video_id, frame_path, label in rows:
        lines.append(f"{frame_id}\t{video_id}\t{frame_path}\t{label}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.fixture
def image_dir(tmp_path):
    d = tmp_path / "frames"
    d.mkdir()
    return d


@pytest.fixture
def frame_factory(image_dir):
    """Create FrameRecords backed by real (tiny) image files."""
    counter = {"n": 0}

    def make(frame_id: str, label: int = 0, video_id: str = "v0") -> FrameRecord:
        counter["n"] += 1
        path = image_dir / f"{frame_id}.png"
        write_image(path, counter["n"])
        return FrameRecord(frame_id=frame_id, video_id=video_id, path=path, label=label)

    return make


NORMAL_TEXTS = [
    "several pedestrians walking along the walkway",
    "people strolling on the path beside the lawn",
    "a group of people walking slowly across the plaza",
]
ANOMALY_BICYCLE_TEXTS = [
    "a person riding a bicycle across the walkway",
    "a bicycle rider weaving between pedestrians",
]
ANOMALY_OTHER_TEXT = "a skateboarder rolling quickly through the crowd"


def build_synthetic_workspace(
    root: Path,
    n_frames: int = 200,
    anomaly_fraction: float = 0.25,
    bicycle_rate: float = 0.9,
    sample_count: int = 5,
    seed: int = 7,
    rng_seed: int = 1234,
    max_concurrency: int = 1,
) -> dict:
    """Lay out a full stub-provider pipeline workspace under `root`.

    Returns paths plus the ground-truth stub map. Anomalous frames carry
    the keyword "bicycle" with probability `bicycle_rate`; normal frames
    never do.
    """
    frames_dir = root / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(rng_seed)
    rows = []
    stub = {}
    n_anom = int(n_frames * anomaly_fraction)
    for i in range(n_frames):
        frame_id = f"f{i:05d}"
        video_id = f"v{i % 8:02d}"
        label = 1 if i < n_anom else 0
        path = frames_dir / f"{frame_id}.png"
        write_image(path, i + 1)
        if label == 1:
            if rng.random() < bicycle_rate:
                stub[frame_id] = rng.choice(ANOMALY_BICYCLE_TEXTS)
            else:
                stub[frame_id] = ANOMALY_OTHER_TEXT
        else:
            stub[frame_id] = rng.choice(NORMAL_TEXTS)
        rows.append((frame_id, video_id, str(path), label))
    # interleave labels so contiguous splits stay mixed
    rng.shuffle(rows)

    manifest = root / "manifest.tsv"
    write_manifest(manifest, rows)
    stub_path = root / "stub.json"
    stub_path.write_text(json.dumps(stub, indent=0, sort_keys=True), encoding="utf-8")
    out_dir = root / "out"
    config = root / "pipeline.ini"
    config.write_text(
        f"""\
[dataset]
manifest = {manifest}
name = synthetic

[provider]
model_id = stub-model
stub_map = {stub_path}
max_concurrency = {max_concurrency}

[induction]
sample_count = {sample_count}
seed = {seed}

[vectorizer]
max_features = 100
min_df = 1
max_df = 1.0

[training]
batch_size = 200
seed = {seed}

[output]
dir = {out_dir}
threshold = 0.5
""",
        encoding="utf-8",
    )
    return {
        "root": root,
        "manifest": manifest,
        "stub_path": stub_path,
        "stub": stub,
        "config": config,
        "out_dir": out_dir,
        "rows": rows,
    }


@pytest.fixture
def synthetic_workspace(tmp_path):
    return build_synthetic_workspace(tmp_path)
