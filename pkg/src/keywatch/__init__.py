"""Keyword-weighted frame-description pipeline for video anomaly detection."""

from .classifier import (
    TrainConfig,
    TrainedModel,
    compute_pos_weight,
    forward,
    predict,
    train,
    weighted_bce,
)
from .dataset import Dataset, FrameRecord, load_manifest, make_splits, sample_induction_frames
from .deduction import Encoding, encode
from .describer import DEFAULT_PROMPT, Describer, DescriptionRecord, ProviderConfig, StubProvider
from .induction import (
    KeywordModel,
    VectorizerConfig,
    build_corpus,
    build_vocabulary,
    derive_keyword_weights,
    induce,
    tfidf_matrix,
    tokenize,
)
from .metrics import EvalReport, auroc, auroc_macro, confusion_at, evaluate

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PROMPT",
    "Dataset",
    "Describer",
    "DescriptionRecord",
    "Encoding",
    "EvalReport",
    "FrameRecord",
    "KeywordModel",
    "ProviderConfig",
    "StubProvider",
    "TrainConfig",
    "TrainedModel",
    "VectorizerConfig",
    "auroc",
    "auroc_macro",
    "build_corpus",
    "build_vocabulary",
    "compute_pos_weight",
    "confusion_at",
    "derive_keyword_weights",
    "encode",
    "evaluate",
    "forward",
    "induce",
    "load_manifest",
    "make_splits",
    "predict",
    "sample_induction_frames",
    "tfidf_matrix",
    "tokenize",
    "train",
    "weighted_bce",
]
