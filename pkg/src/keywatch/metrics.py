"""Frame-level evaluation: AUROC and thresholded confusion counts.

The ranking score is the Mann-Whitney statistic computed from tied ranks,
which equals the fraction of (positive, negative) pairs the scores order
correctly, counting ties as half. Micro averaging pools all frames;
macro averaging scores each video separately and averages the results.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, MissingFile, NoEligibleVideos, SingleClassError


def _tied_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties given the average rank of their block."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2
        i = j + 1
    return ranks


def auroc(scores, labels) -> float:
    """Area under the ROC curve for binary labels."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DataError(f"scores and labels differ in length: {len(scores)} vs {len(labels)}")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError()
    ranks = _tied_ranks(scores)
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def auroc_macro(per_video: dict[str, tuple[list, list]]) -> float:
    """Unweighted mean of per-video AUROC over videos holding both classes."""
    values = []
    for scores, labels in per_video.values():
        try:
            values.append(auroc(scores, labels))
        except SingleClassError:
            continue
    if not values:
        raise NoEligibleVideos()
    return float(np.mean(values))


def confusion_at(scores, labels, threshold: float) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) with prediction = 1 iff score > threshold (strict)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DataError(f"scores and labels differ in length: {len(scores)} vs {len(labels)}")
    predicted = scores > threshold
    actual = labels == 1
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    tn = int(np.sum(~predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    return tp, fp, tn, fn


@dataclass
class EvalReport:
    """One evaluation run over a scored frame set."""

    auroc_micro: float
    auroc_macro: float | None
    per_video_auroc: dict[str, float]
    skipped_videos: tuple[str, ...]
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    n_frames: int


def evaluate(
    scores,
    labels,
    video_ids: list[str] | None = None,
    threshold: float = 0.5,
) -> EvalReport:
    """Build a full report; macro metrics are included when video ids exist."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    micro = auroc(scores, labels)
    tp, fp, tn, fn = confusion_at(scores, labels, threshold)

    per_video: dict[str, float] = {}
    skipped: list[str] = []
    macro: float | None = None
    if video_ids is not None:
        groups: dict[str, list[int]] = {}
        for i, vid in enumerate(video_ids):
            groups.setdefault(vid, []).append(i)
        values = []
        for vid in sorted(groups):
            idx = groups[vid]
            try:
                per_video[vid] = auroc(scores[idx], labels[idx])
                values.append(per_video[vid])
            except SingleClassError:
                skipped.append(vid)
        if values:
            macro = float(np.mean(values))
    return EvalReport(
        auroc_micro=micro,
        auroc_macro=macro,
        per_video_auroc=per_video,
        skipped_videos=tuple(skipped),
        threshold=threshold,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        n_frames=len(scores),
    )


# --- serialization --------------------------------------------------------

_HEADER = "keywatch-eval\tv1"


def serialize_report(report: EvalReport) -> str:
    lines = [
        _HEADER,
        f"n_frames\t{report.n_frames}",
        f"threshold\t{float(report.threshold)!r}",
        f"auroc_micro\t{float(report.auroc_micro)!r}",
        f"auroc_macro\t{'n/a' if report.auroc_macro is None else repr(float(report.auroc_macro))}",
        f"tp\t{report.tp}",
        f"fp\t{report.fp}",
        f"tn\t{report.tn}",
        f"fn\t{report.fn}",
        "[per_video]",
    ]
    for vid in sorted(report.per_video_auroc):
        lines.append(f"{vid}\t{float(report.per_video_auroc[vid])!r}")
    lines.append("[skipped_videos]")
    lines.extend(sorted(report.skipped_videos))
    return "\n".join(lines) + "\n"


def save_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(serialize_report(report), encoding="utf-8")


def load_report(path: str | Path) -> EvalReport:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _HEADER:
        raise DataError(f"{path} is not a keywatch eval report")
    header: dict[str, str] = {}
    per_video: dict[str, float] = {}
    skipped: list[str] = []
    section = None
    for line in lines[1:]:
        if not line:
            continue
        if line in ("[per_video]", "[skipped_videos]"):
            section = line
            continue
        if section == "[per_video]":
            vid, _, value = line.partition("\t")
            per_video[vid] = float(value)
        elif section == "[skipped_videos]":
            skipped.append(line)
        else:
            key, _, value = line.partition("\t")
            header[key] = value
    try:
        macro_text = header["auroc_macro"]
        return EvalReport(
            auroc_micro=float(header["auroc_micro"]),
            auroc_macro=None if macro_text == "n/a" else float(macro_text),
            per_video_auroc=per_video,
            skipped_videos=tuple(skipped),
            threshold=float(header["threshold"]),
            tp=int(header["tp"]),
            fp=int(header["fp"]),
            tn=int(header["tn"]),
            fn=int(header["fn"]),
            n_frames=int(header["n_frames"]),
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: bad report header ({exc})") from None


def format_summary(report: EvalReport) -> str:
    """Fixed-order human-readable summary for the CLI."""
    macro = "n/a" if report.auroc_macro is None else f"{report.auroc_macro:.4f}"
    lines = [
        f"frames evaluated : {report.n_frames}",
        f"auroc (micro)    : {report.auroc_micro:.4f}",
        f"auroc (macro)    : {macro}",
        f"threshold        : {report.threshold}",
        f"tp/fp/tn/fn      : {report.tp}/{report.fp}/{report.tn}/{report.fn}",
    ]
    if report.skipped_videos:
        lines.append(
            "single-class videos skipped in macro: " + ", ".join(sorted(report.skipped_videos))
        )
    return "\n".join(lines)
