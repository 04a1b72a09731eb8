"""Frame manifests, seeded induction sampling, and train/test splitting.

A manifest is a UTF-8 text file with one frame per line:

    frame_id<TAB>video_id<TAB>path<TAB>label

where label is 0 (normal) or 1 (anomalous). Lines starting with `#` are
comments. All randomness flows through a Mersenne Twister seeded shuffle
whose algorithm id is recorded in the split file, so splits are
reproducible across platforms and interpreter versions.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DataError,
    DuplicateFrameId,
    InsufficientFrames,
    MalformedRecord,
    MissingFile,
    UnknownExcludedId,
)

# Only random.random() carries a cross-version stability guarantee, so the
# shuffle is a local Fisher-Yates on top of it rather than random.shuffle.
PRNG_ID = "mt19937-fisher-yates-v1"

NORMAL = 0
ANOMALOUS = 1


@dataclass(frozen=True)
class FrameRecord:
    """One video frame with its ground-truth label."""

    frame_id: str
    video_id: str
    path: Path
    label: int


@dataclass
class Dataset:
    """An ordered collection of frames loaded from one manifest."""

    name: str
    frames: list[FrameRecord]
    fps: float | None = None
    _by_id: dict[str, FrameRecord] = field(init=False, repr=False)

    def __post_init__(self):
        self._by_id = {f.frame_id: f for f in self.frames}

    def __len__(self) -> int:
        return len(self.frames)

    def get(self, frame_id: str) -> FrameRecord | None:
        return self._by_id.get(frame_id)

    def with_label(self, label: int) -> list[FrameRecord]:
        return [f for f in self.frames if f.label == label]


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint frame-id sets for induction, training, and testing."""

    induction_normal: frozenset[str]
    induction_anomalous: frozenset[str]
    train: frozenset[str]
    test: frozenset[str]
    seed: int
    prng: str = PRNG_ID


def load_manifest(path: str | Path) -> Dataset:
    """Parse a manifest file into a Dataset, preserving line order."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    frames: list[FrameRecord] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise MalformedRecord(path, lineno, f"expected 4 tab-separated fields, got {len(fields)}")
            frame_id, video_id, frame_path, label_text = fields
            if not frame_id:
                raise MalformedRecord(path, lineno, "empty frame_id")
            if label_text not in ("0", "1"):
                raise MalformedRecord(path, lineno, f"label must be 0 or 1, got {label_text!r}")
            if frame_id in seen:
                raise DuplicateFrameId(frame_id)
            seen.add(frame_id)
            frames.append(FrameRecord(frame_id, video_id, Path(frame_path), int(label_text)))
    return Dataset(name=path.stem, frames=frames)


def _shuffled(items: list, rng: random.Random) -> list:
    """Fisher-Yates shuffle driven solely by rng.random()."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = int(rng.random() * (i + 1))
        if j > i:  # guard against float rounding at the upper edge
            j = i
        out[i], out[j] = out[j], out[i]
    return out


def sample_induction_frames(
    dataset: Dataset, n: int, seed: int
) -> tuple[list[FrameRecord], list[FrameRecord]]:
    """Draw n normal and n anomalous frames without replacement.

    The draw is a deterministic function of (dataset, n, seed).
    """
    if n <= 0:
        raise DataError(f"sample count must be positive, got {n}")
    normal = dataset.with_label(NORMAL)
    anomalous = dataset.with_label(ANOMALOUS)
    if len(normal) < n:
        raise InsufficientFrames("normal", len(normal), n)
    if len(anomalous) < n:
        raise InsufficientFrames("anomalous", len(anomalous), n)
    rng = random.Random(seed)
    return _shuffled(normal, rng)[:n], _shuffled(anomalous, rng)[:n]


def make_splits(
    dataset: Dataset, excluded: set[str], ratio: float, seed: int
) -> SplitAssignment:
    """Shuffle the non-excluded frames and split them train/test by `ratio`.

    Train size is floor(ratio * remaining); the rest is test. Excluded ids
    (the induction frames) are recorded separately by label.
    """
    if not 0 < ratio < 1:
        raise DataError(f"ratio must be in (0, 1), got {ratio}")
    for frame_id in excluded:
        if dataset.get(frame_id) is None:
            raise UnknownExcludedId(frame_id)
    remaining = [f for f in dataset.frames if f.frame_id not in excluded]
    shuffled = _shuffled(remaining, random.Random(seed))
    n_train = math.floor(ratio * len(shuffled))
    return SplitAssignment(
        induction_normal=frozenset(
            fid for fid in excluded if dataset.get(fid).label == NORMAL
        ),
        induction_anomalous=frozenset(
            fid for fid in excluded if dataset.get(fid).label == ANOMALOUS
        ),
        train=frozenset(f.frame_id for f in shuffled[:n_train]),
        test=frozenset(f.frame_id for f in shuffled[n_train:]),
        seed=seed,
    )


_SECTIONS = ("induction_normal", "induction_anomalous", "train", "test")


def serialize_splits(splits: SplitAssignment) -> str:
    """Render a SplitAssignment deterministically (ids sorted per section)."""
    lines = [
        "keywatch-splits\tv1",
        f"seed\t{splits.seed}",
        f"prng\t{splits.prng}",
    ]
    for section in _SECTIONS:
        lines.append(f"[{section}]")
        lines.extend(sorted(getattr(splits, section)))
    return "\n".join(lines) + "\n"


def save_splits(splits: SplitAssignment, path: str | Path) -> None:
    Path(path).write_text(serialize_splits(splits), encoding="utf-8")


def load_splits(path: str | Path) -> SplitAssignment:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "keywatch-splits\tv1":
        raise DataError(f"{path} is not a keywatch split file")
    header: dict[str, str] = {}
    sections: dict[str, set[str]] = {name: set() for name in _SECTIONS}
    current: str | None = None
    for line in lines[1:]:
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            if current not in sections:
                raise DataError(f"{path}: unknown section {current!r}")
        elif current is None:
            key, _, value = line.partition("\t")
            header[key] = value
        else:
            sections[current].add(line)
    try:
        seed = int(header["seed"])
    except (KeyError, ValueError):
        raise DataError(f"{path}: missing or invalid seed header") from None
    return SplitAssignment(
        induction_normal=frozenset(sections["induction_normal"]),
        induction_anomalous=frozenset(sections["induction_anomalous"]),
        train=frozenset(sections["train"]),
        test=frozenset(sections["test"]),
        seed=seed,
        prng=header.get("prng", PRNG_ID),
    )
