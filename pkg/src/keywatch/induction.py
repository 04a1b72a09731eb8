"""Keyword weight induction from two description corpora.

The normal and anomalous description sets are each concatenated into one
document, scored with the classic tf-idf formulation over that
two-document corpus, and reduced to a single L2-normalized difference
vector. Positive weights mark terms tied to the anomalous side, negative
weights the normal side.

With exactly two documents the inverse document frequency is ln(2) for a
term confined to one side and 0 for a shared term, so shared terms drop
out of the weight vector entirely. A `smoothed` scoring variant
(idf = ln((1+N)/(1+df)) + 1 with L2 row normalization, the common library
default) is available for cross-checking; the normalized difference
vector is computed the same way in both variants.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import stopwords
from .describer import DescriptionRecord
from .errors import (
    DataError,
    DivisionByZeroDocFreq,
    EmptyDescriptionSet,
    EmptyDocument,
    EmptyVocabulary,
    MissingFile,
    ZeroDifferenceVector,
)

# Maximal runs of >= 2 Unicode letters/digits; everything else separates.
_TOKEN_RE = re.compile(r"[^\W_]{2,}")

NORMAL_ROW = 0
ANOMALOUS_ROW = 1


def tokenize(text: str) -> list[str]:
    """Lowercase and split into alphanumeric tokens of length >= 2."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Corpus:
    """The two concatenated description documents."""

    doc_normal: str
    doc_anomalous: str
    N: int = 2


@dataclass(frozen=True)
class VectorizerConfig:
    """Vocabulary and scoring options for the two-document vectorizer.

    min_df/max_df follow document-frequency semantics: an int is an
    absolute document count, a float in [0, 1] is a fraction of the two
    documents (compared as counts via ceil for the lower bound and floor
    for the upper). Only unigrams are supported; ngram_n is a reserved
    field and values other than 1 are rejected.
    """

    max_features: int = 100
    min_df: int | float = 1
    max_df: int | float = 1.0
    ngram_n: int = 1
    stop_words: str = stopwords.STOP_LIST_ID
    log_base: str = "e"
    variant: str = "classic"

    def __post_init__(self):
        if self.max_features < 1:
            raise ValueError(f"max_features must be >= 1, got {self.max_features}")
        if self.ngram_n != 1:
            raise ValueError("only unigrams are supported (ngram_n must be 1)")
        if self.log_base != "e":
            raise ValueError("only the natural logarithm is supported")
        if self.variant not in ("classic", "smoothed"):
            raise ValueError(f"unknown variant {self.variant!r}")
        for name, value in (("min_df", self.min_df), ("max_df", self.max_df)):
            if isinstance(value, float) and not 0.0 <= value <= 1.0:
                raise ValueError(f"fractional {name} must be in [0, 1], got {value}")
            if isinstance(value, int) and value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
        stopwords.stop_words_for(self.stop_words)  # raises on unknown id
        lo, hi = self.df_bounds()
        if lo > hi:
            raise ValueError(f"min_df bound {lo} exceeds max_df bound {hi}")

    def df_bounds(self) -> tuple[int, int]:
        """Inclusive document-count bounds over the two documents."""
        lo = self.min_df if isinstance(self.min_df, int) else math.ceil(self.min_df * 2)
        hi = self.max_df if isinstance(self.max_df, int) else math.floor(self.max_df * 2)
        return lo, hi

    def stop_word_set(self) -> frozenset[str]:
        return stopwords.stop_words_for(self.stop_words)


@dataclass(frozen=True)
class TfidfMatrix:
    """Per-term scores; row 0 is the normal document, row 1 the anomalous."""

    terms: tuple[str, ...]
    scores: np.ndarray  # shape (2, k)

    def __post_init__(self):
        if self.scores.shape != (2, len(self.terms)):
            raise ValueError(
                f"scores shape {self.scores.shape} does not match {len(self.terms)} terms"
            )


@dataclass(frozen=True)
class Provenance:
    dataset: str
    seed: int
    model_id: str


@dataclass(frozen=True)
class KeywordModel:
    """Ordered keyword list with its L2-normalized weight vector."""

    terms: tuple[str, ...]
    weights: np.ndarray
    vectorizer: VectorizerConfig
    provenance: Provenance | None = None

    def __len__(self) -> int:
        return len(self.terms)


def build_corpus(
    normal: list[DescriptionRecord | str], anomalous: list[DescriptionRecord | str]
) -> Corpus:
    """Concatenate each description set into one space-joined document."""
    if not normal:
        raise EmptyDescriptionSet("normal")
    if not anomalous:
        raise EmptyDescriptionSet("anomalous")

    def text_of(item):
        return item.text if isinstance(item, DescriptionRecord) else item

    return Corpus(
        doc_normal=" ".join(text_of(d) for d in normal),
        doc_anomalous=" ".join(text_of(d) for d in anomalous),
    )


def document_tokens(
    corpus: Corpus, stop_words: frozenset[str]
) -> tuple[list[str], list[str]]:
    """Tokenize both documents and drop stop words."""
    return (
        [t for t in tokenize(corpus.doc_normal) if t not in stop_words],
        [t for t in tokenize(corpus.doc_anomalous) if t not in stop_words],
    )


def build_vocabulary(corpus: Corpus, config: VectorizerConfig) -> list[str]:
    """Select up to max_features terms from the corpus.

    Terms outside the document-frequency bounds are dropped; the survivors
    are ranked by total count across both documents (ties broken
    lexicographically), truncated, and returned in lexicographic order.
    """
    doc_norm, doc_anom = document_tokens(corpus, config.stop_word_set())
    counts_norm = Counter(doc_norm)
    counts_anom = Counter(doc_anom)
    lo, hi = config.df_bounds()
    kept = [
        term
        for term in counts_norm.keys() | counts_anom.keys()
        if lo <= (term in counts_norm) + (term in counts_anom) <= hi
    ]
    if not kept:
        raise EmptyVocabulary()
    kept.sort(key=lambda t: (-(counts_norm[t] + counts_anom[t]), t))
    return sorted(kept[: config.max_features])


def tf(term: str, doc_tokens: list[str]) -> float:
    """Frequency of `term` among the document's tokens."""
    if not doc_tokens:
        raise EmptyDocument()
    return doc_tokens.count(term) / len(doc_tokens)


def idf(term: str, corpus_docs: tuple[list[str], list[str]]) -> float:
    """ln(N / df) over the two-document corpus."""
    df = sum(term in doc for doc in map(set, corpus_docs))
    if df == 0:
        raise DivisionByZeroDocFreq(term)
    return math.log(2 / df)


def tfidf_matrix(
    corpus: Corpus, terms: list[str], config: VectorizerConfig | None = None
) -> TfidfMatrix:
    """Score every term against both documents.

    The term-frequency denominator counts all non-stop-word tokens of the
    document, including tokens that did not make the vocabulary. No row
    normalization is applied in the `classic` variant.
    """
    config = config or VectorizerConfig()
    doc_norm, doc_anom = document_tokens(corpus, config.stop_word_set())
    if not doc_norm or not doc_anom:
        raise EmptyDocument()
    counters = (Counter(doc_norm), Counter(doc_anom))
    totals = (len(doc_norm), len(doc_anom))
    scores = np.zeros((2, len(terms)))
    for j, term in enumerate(terms):
        df = (term in counters[0]) + (term in counters[1])
        if df == 0:
            raise DivisionByZeroDocFreq(term)
        if config.variant == "classic":
            term_idf = math.log(2 / df)
        else:
            term_idf = math.log(3 / (1 + df)) + 1.0
        for d in (NORMAL_ROW, ANOMALOUS_ROW):
            scores[d, j] = counters[d][term] / totals[d] * term_idf
    if config.variant == "smoothed":
        norms = np.linalg.norm(scores, axis=1, keepdims=True)
        scores = np.divide(scores, norms, out=np.zeros_like(scores), where=norms > 0)
    return TfidfMatrix(terms=tuple(terms), scores=scores)


def derive_keyword_weights(
    matrix: TfidfMatrix,
    config: VectorizerConfig | None = None,
    provenance: Provenance | None = None,
) -> KeywordModel:
    """L2-normalize the anomalous-minus-normal score difference."""
    diff = matrix.scores[ANOMALOUS_ROW] - matrix.scores[NORMAL_ROW]
    norm = float(np.linalg.norm(diff))
    if norm == 0.0:
        raise ZeroDifferenceVector()
    return KeywordModel(
        terms=matrix.terms,
        weights=diff / norm,
        vectorizer=config or VectorizerConfig(),
        provenance=provenance,
    )


def induce(
    normal: list[DescriptionRecord | str],
    anomalous: list[DescriptionRecord | str],
    config: VectorizerConfig | None = None,
    provenance: Provenance | None = None,
) -> KeywordModel:
    """Full induction chain: corpus -> vocabulary -> scores -> weights."""
    config = config or VectorizerConfig()
    corpus = build_corpus(normal, anomalous)
    vocabulary = build_vocabulary(corpus, config)
    matrix = tfidf_matrix(corpus, vocabulary, config)
    return derive_keyword_weights(matrix, config, provenance)


# --- serialization --------------------------------------------------------

_HEADER_V1 = "keywatch-keywords\tv1"


def _df_repr(value: int | float) -> str:
    return repr(value)  # '1' stays int on reload, '1.0' stays fractional


def serialize_keyword_model(model: KeywordModel) -> str:
    """Render a keyword model deterministically (header, then term lines)."""
    prov = model.provenance or Provenance("unknown", 0, "unknown")
    cfg = model.vectorizer
    lines = [
        _HEADER_V1,
        f"dataset\t{prov.dataset}",
        f"seed\t{prov.seed}",
        f"provider_model\t{prov.model_id}",
        f"max_features\t{cfg.max_features}",
        f"min_df\t{_df_repr(cfg.min_df)}",
        f"max_df\t{_df_repr(cfg.max_df)}",
        f"ngram_n\t{cfg.ngram_n}",
        f"stop_words\t{cfg.stop_words}",
        f"stop_words_hash\t{stopwords.stop_list_hash(cfg.stop_words)}",
        f"log_base\t{cfg.log_base}",
        f"variant\t{cfg.variant}",
        f"terms\t{len(model.terms)}",
        "---",
    ]
    for term, weight in zip(model.terms, model.weights):
        lines.append(f"{term}\t{float(weight)!r}")
    return "\n".join(lines) + "\n"


def keyword_model_hash(model: KeywordModel) -> str:
    """Content hash binding classifiers and encodings to one keyword model."""
    return hashlib.sha256(serialize_keyword_model(model).encode("utf-8")).hexdigest()


def save_keyword_model(model: KeywordModel, path: str | Path) -> None:
    Path(path).write_text(serialize_keyword_model(model), encoding="utf-8")


def _parse_df(text: str) -> int | float:
    return float(text) if "." in text or "e" in text.lower() else int(text)


def load_keyword_model(path: str | Path) -> KeywordModel:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _HEADER_V1:
        raise DataError(f"{path} is not a keywatch keyword model file")
    try:
        divider = lines.index("---")
    except ValueError:
        raise DataError(f"{path}: missing header/body divider") from None
    header = {}
    for line in lines[1:divider]:
        key, _, value = line.partition("\t")
        header[key] = value
    try:
        config = VectorizerConfig(
            max_features=int(header["max_features"]),
            min_df=_parse_df(header["min_df"]),
            max_df=_parse_df(header["max_df"]),
            ngram_n=int(header["ngram_n"]),
            stop_words=header["stop_words"],
            log_base=header["log_base"],
            variant=header["variant"],
        )
        provenance = Provenance(
            dataset=header["dataset"],
            seed=int(header["seed"]),
            model_id=header["provider_model"],
        )
        expected_terms = int(header["terms"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: bad header ({exc})") from None
    if header.get("stop_words_hash") != stopwords.stop_list_hash(config.stop_words):
        raise DataError(f"{path}: stop-word list hash does not match this build")
    terms: list[str] = []
    weights: list[float] = []
    for line in lines[divider + 1 :]:
        if not line:
            continue
        term, _, weight = line.partition("\t")
        try:
            weights.append(float(weight))
        except ValueError:
            raise DataError(f"{path}: bad weight for term {term!r}") from None
        terms.append(term)
    if len(terms) != expected_terms:
        raise DataError(f"{path}: header says {expected_terms} terms, found {len(terms)}")
    return KeywordModel(
        terms=tuple(terms),
        weights=np.array(weights),
        vectorizer=config,
        provenance=provenance,
    )
