"""Keyword encoding of single frame descriptions.

A description is tokenized with the induction tokenizer and mapped onto
the keyword list: component j carries the keyword's weight when keyword j
occurs in the description and zero otherwise. Presence is exact token
equality after lowercasing; multiplicity does not matter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .describer import DescriptionRecord
from .errors import DataError, MissingFile
from .induction import KeywordModel, keyword_model_hash, tokenize


@dataclass(frozen=True, eq=False)
class Encoding:
    """The weight-or-zero vector fed to the classifier for one frame."""

    values: np.ndarray
    frame_id: str
    present_terms: frozenset[int]
    model_hash: str = ""

    def __len__(self) -> int:
        return len(self.values)


def encode(description: DescriptionRecord | str, model: KeywordModel) -> Encoding:
    """Map one description onto the keyword weight vector.

    An empty description yields the all-zero encoding.
    """
    if isinstance(description, DescriptionRecord):
        text, frame_id = description.text, description.frame_id
    else:
        text, frame_id = description, ""
    tokens = set(tokenize(text))
    present = frozenset(j for j, term in enumerate(model.terms) if term in tokens)
    values = np.zeros(len(model.terms))
    for j in present:
        values[j] = model.weights[j]
    return Encoding(
        values=values,
        frame_id=frame_id,
        present_terms=present,
        model_hash=keyword_model_hash(model),
    )


@dataclass
class LabeledEncodings:
    """Encodings paired with labels, as written to an encodings file."""

    encodings: list[Encoding]
    labels: list[int] = field(default_factory=list)


def save_encodings(rows: list[tuple[Encoding, int]], path: str | Path) -> None:
    """Write `frame_id<TAB>label<TAB>v1,v2,...,vk` lines."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for encoding, label in rows:
            values = ",".join(repr(float(v)) for v in encoding.values)
            fh.write(f"{encoding.frame_id}\t{label}\t{values}\n")


def load_encodings(path: str | Path) -> LabeledEncodings:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    out = LabeledEncodings(encodings=[])
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields")
            frame_id, label_text, values_text = parts
            try:
                label = int(label_text)
                values = np.array([float(v) for v in values_text.split(",")])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad label or values") from None
            present = frozenset(int(j) for j in np.nonzero(values)[0])
            out.encodings.append(
                Encoding(values=values, frame_id=frame_id, present_terms=present)
            )
            out.labels.append(label)
    return out


def encoding_heatmap_csv(encoding: Encoding, model: KeywordModel) -> str:
    """Two-line CSV (terms, values) for rendering one encoding as a heatmap."""
    header = ",".join(model.terms)
    row = ",".join(repr(float(v)) for v in encoding.values)
    return f"{header}\n{row}\n"


def present_keywords(encoding: Encoding, model: KeywordModel) -> list[dict]:
    """Interpretability payload: each present keyword with its weight."""
    items = [
        {"term": model.terms[j], "weight": float(model.weights[j])}
        for j in sorted(encoding.present_terms)
    ]
    items.sort(key=lambda kw: -kw["weight"])
    return items
