"""Feed-forward binary classifier over keyword encodings.

Three fully connected layers (k -> h1 -> h2 -> 1) with rectifier hidden
activations and a logistic sigmoid output. Training minimizes weighted
binary cross-entropy with decoupled-weight-decay Adam, 5-fold
cross-validation, and patience-based early stopping; the fold with the
lowest best-epoch validation loss supplies the returned parameters.

Everything here is plain float64 numpy with a single seeded generator, so
a fixed seed reproduces fold assignment, batch order, and final
parameters bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DataError,
    DegenerateLabels,
    DimensionMismatch,
    DomainError,
    InsufficientSamples,
    MissingFile,
    ModelEncodingMismatch,
)

_CLAMP = 1e-7  # loss-side clamp; reported probabilities are never altered

HIDDEN_ACTIVATION = "relu"
OUTPUT_ACTIVATION = "sigmoid"


@dataclass
class ClassifierParams:
    """Weight matrices (input_dim x output_dim) and bias vectors per layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights) + (1,)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def copy(self) -> "ClassifierParams":
        return ClassifierParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


@dataclass
class TrainConfig:
    """Training hyperparameters; see PROFILES in config for per-dataset batch sizes."""

    learning_rate: float = 0.001
    weight_decay: float = 0.001
    max_epochs: int = 20
    patience: int = 3
    folds: int = 5
    batch_size: int = 32
    pos_weight: float = 1.0
    seed: int = 0
    hidden1: int = 64
    hidden2: int = 32

    def __post_init__(self):
        if not self.patience < self.max_epochs:
            raise ValueError("patience must be smaller than max_epochs")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0 or self.pos_weight <= 0:
            raise ValueError("learning_rate and pos_weight must be positive")


@dataclass
class AdamWState:
    """First/second moment accumulators mirroring the parameter shapes."""

    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class FoldMetrics:
    """Per-epoch losses for one cross-validation fold."""

    fold: int
    train_losses: list[float]
    val_losses: list[float]
    best_val_loss: float
    best_epoch: int


@dataclass
class TrainedModel:
    params: ClassifierParams
    fold_metrics: list[FoldMetrics]
    chosen_fold: int
    config: TrainConfig
    keyword_model_hash: str = ""


def init_params(
    input_dim: int, hidden1: int, hidden2: int, rng: np.random.Generator
) -> ClassifierParams:
    """Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)) per layer."""
    weights, biases = [], []
    for fan_in, fan_out in ((input_dim, hidden1), (hidden1, hidden2), (hidden2, 1)):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ClassifierParams(weights=weights, biases=biases)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_values(encoding) -> np.ndarray:
    values = getattr(encoding, "values", encoding)
    return np.asarray(values, dtype=float)


def _forward_batch(params: ClassifierParams, x: np.ndarray):
    """Forward pass returning probabilities plus activations for backprop."""
    if x.shape[1] != params.input_dim:
        raise DimensionMismatch(params.input_dim, x.shape[1])
    a1 = np.maximum(x @ params.weights[0] + params.biases[0], 0.0)
    a2 = np.maximum(a1 @ params.weights[1] + params.biases[1], 0.0)
    z3 = a2 @ params.weights[2] + params.biases[2]
    return _sigmoid(z3)[:, 0], (x, a1, a2)


def forward(params: ClassifierParams, encoding) -> float:
    """Anomaly probability for one encoding; strictly inside (0, 1)."""
    x = _as_values(encoding)
    if x.ndim != 1:
        raise DimensionMismatch(params.input_dim, x.shape[-1])
    probs, _ = _forward_batch(params, x[None, :])
    return float(probs[0])


def weighted_bce(pred: float, label: int, pos_weight: float) -> float:
    """-(pos_weight * y * ln p + (1 - y) * ln(1 - p)) with a loss-side clamp.

    Predictions are clamped into [1e-7, 1 - 1e-7] before the logarithms;
    values outside [0, 1] (or NaN) are a domain violation.
    """
    if not 0.0 <= pred <= 1.0:
        raise DomainError(pred)
    p = min(max(pred, _CLAMP), 1.0 - _CLAMP)
    if label == 1:
        return -pos_weight * np.log(p)
    return -float(np.log1p(-p))


def _batch_loss(probs: np.ndarray, labels: np.ndarray, pos_weight: float) -> float:
    p = np.clip(probs, _CLAMP, 1.0 - _CLAMP)
    terms = -(pos_weight * labels * np.log(p) + (1.0 - labels) * np.log1p(-p))
    return float(terms.mean())


def compute_pos_weight(train_labels: Sequence[int]) -> float:
    """Negative-to-positive count ratio of the training labels."""
    labels = np.asarray(train_labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0:
        raise DegenerateLabels(present=0)
    if n_neg == 0:
        raise DegenerateLabels(present=1)
    return n_neg / n_pos


def backward(
    params: ClassifierParams, batch: Sequence[tuple[object, int]], pos_weight: float
) -> Gradients:
    """Analytic gradients of the mean weighted BCE over the batch."""
    if not batch:
        raise DataError("backward requires a non-empty batch")
    x = np.stack([_as_values(enc) for enc, _ in batch])
    y = np.array([label for _, label in batch], dtype=float)
    probs, (x0, a1, a2) = _forward_batch(params, x)
    return _gradients(params, probs, y, pos_weight, x0, a1, a2)


def _gradients(params, probs, y, pos_weight, x0, a1, a2) -> Gradients:
    n = len(y)
    p = np.clip(probs, _CLAMP, 1.0 - _CLAMP)
    # d(mean loss)/dz3 for the clamped loss composed with the sigmoid
    dz3 = ((p * (1.0 - y) - pos_weight * y * (1.0 - p)) / n)[:, None]
    dw3 = a2.T @ dz3
    db3 = dz3.sum(axis=0)
    da2 = dz3 @ params.weights[2].T
    dz2 = da2 * (a2 > 0)
    dw2 = a1.T @ dz2
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ params.weights[1].T
    dz1 = da1 * (a1 > 0)
    dw1 = x0.T @ dz1
    db1 = dz1.sum(axis=0)
    return Gradients(weights=[dw1, dw2, dw3], biases=[db1, db2, db3])


def init_adamw(params: ClassifierParams) -> AdamWState:
    return AdamWState(
        m_weights=[np.zeros_like(w) for w in params.weights],
        v_weights=[np.zeros_like(w) for w in params.weights],
        m_biases=[np.zeros_like(b) for b in params.biases],
        v_biases=[np.zeros_like(b) for b in params.biases],
    )


def adamw_step(
    params: ClassifierParams,
    grads: Gradients,
    state: AdamWState,
    lr: float,
    weight_decay: float,
) -> tuple[ClassifierParams, AdamWState]:
    """One decoupled-weight-decay Adam update; biases are never decayed."""
    t = state.step + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t

    def update(p, g, m, v, decay):
        m_new = state.beta1 * m + (1.0 - state.beta1) * g
        v_new = state.beta2 * v + (1.0 - state.beta2) * g * g
        step = lr * (m_new / bc1) / (np.sqrt(v_new / bc2) + state.eps)
        p_new = p - step - lr * decay * p
        return p_new, m_new, v_new

    new_w, new_mw, new_vw = [], [], []
    for p, g, m, v in zip(params.weights, grads.weights, state.m_weights, state.v_weights):
        pn, mn, vn = update(p, g, m, v, weight_decay)
        new_w.append(pn)
        new_mw.append(mn)
        new_vw.append(vn)
    new_b, new_mb, new_vb = [], [], []
    for p, g, m, v in zip(params.biases, grads.biases, state.m_biases, state.v_biases):
        pn, mn, vn = update(p, g, m, v, 0.0)
        new_b.append(pn)
        new_mb.append(mn)
        new_vb.append(vn)
    return (
        ClassifierParams(weights=new_w, biases=new_b),
        AdamWState(
            m_weights=new_mw,
            v_weights=new_vw,
            m_biases=new_mb,
            v_biases=new_vb,
            step=t,
            beta1=state.beta1,
            beta2=state.beta2,
            eps=state.eps,
        ),
    )


def _fold_slices(n: int, folds: int) -> list[tuple[int, int]]:
    """Contiguous fold boundaries; the first n % folds folds get one extra."""
    base, extra = divmod(n, folds)
    out, start = [], 0
    for i in range(folds):
        size = base + (1 if i < extra else 0)
        out.append((start, start + size))
        start += size
    return out


def train(
    samples: Sequence[tuple[object, int]],
    config: TrainConfig,
    keyword_model_hash: str = "",
) -> TrainedModel:
    """Cross-validated training over labeled encodings.

    Samples are shuffled once with the seed and partitioned into contiguous
    folds. Each fold trains on the remainder with per-epoch reshuffled
    mini-batches, tracks validation loss, and stops early after `patience`
    epochs without strict improvement, keeping the best-epoch parameters.
    The fold with the lowest best validation loss wins.
    """
    if not samples:
        raise DataError("train requires at least one sample")
    x = np.stack([_as_values(enc) for enc, _ in samples])
    y = np.array([label for _, label in samples], dtype=float)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0:
        raise DegenerateLabels(present=0)
    if n_neg == 0:
        raise DegenerateLabels(present=1)
    if n_pos < config.folds:
        raise InsufficientSamples(1, n_pos, config.folds)
    if n_neg < config.folds:
        raise InsufficientSamples(0, n_neg, config.folds)

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(samples))
    slices = _fold_slices(len(samples), config.folds)

    fold_metrics: list[FoldMetrics] = []
    fold_params: list[ClassifierParams] = []
    for fold, (lo, hi) in enumerate(slices):
        val_idx = perm[lo:hi]
        train_idx = np.concatenate([perm[:lo], perm[hi:]])
        params = init_params(x.shape[1], config.hidden1, config.hidden2, rng)
        state = init_adamw(params)
        best_val = np.inf
        best_params = params.copy()
        best_epoch = -1
        bad_epochs = 0
        train_losses: list[float] = []
        val_losses: list[float] = []
        for epoch in range(config.max_epochs):
            order = rng.permutation(len(train_idx))
            for start in range(0, len(order), config.batch_size):
                batch_idx = train_idx[order[start : start + config.batch_size]]
                probs, (bx, a1, a2) = _forward_batch(params, x[batch_idx])
                grads = _gradients(params, probs, y[batch_idx], config.pos_weight, bx, a1, a2)
                params, state = adamw_step(
                    params, grads, state, config.learning_rate, config.weight_decay
                )
            train_probs, _ = _forward_batch(params, x[train_idx])
            val_probs, _ = _forward_batch(params, x[val_idx])
            train_losses.append(_batch_loss(train_probs, y[train_idx], config.pos_weight))
            val_losses.append(_batch_loss(val_probs, y[val_idx], config.pos_weight))
            if val_losses[-1] < best_val:
                best_val = val_losses[-1]
                best_params = params.copy()
                best_epoch = epoch
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= config.patience:
                    break
        fold_metrics.append(
            FoldMetrics(
                fold=fold,
                train_losses=train_losses,
                val_losses=val_losses,
                best_val_loss=float(best_val),
                best_epoch=best_epoch,
            )
        )
        fold_params.append(best_params)

    chosen = int(np.argmin([fm.best_val_loss for fm in fold_metrics]))
    return TrainedModel(
        params=fold_params[chosen],
        fold_metrics=fold_metrics,
        chosen_fold=chosen,
        config=config,
        keyword_model_hash=keyword_model_hash,
    )


def predict(model: TrainedModel, encoding) -> float:
    """Forward pass through the trained parameters."""
    enc_hash = getattr(encoding, "model_hash", "")
    if enc_hash and model.keyword_model_hash and enc_hash != model.keyword_model_hash:
        raise ModelEncodingMismatch(model.keyword_model_hash, enc_hash)
    return forward(model.params, encoding)


# --- serialization --------------------------------------------------------

_FORMAT = "keywatch-classifier"
_VERSION = 1


def serialize_model(model: TrainedModel) -> str:
    """Deterministic JSON text; float repr keeps parameters round-trip exact."""
    payload = {
        "format": _FORMAT,
        "version": _VERSION,
        "dims": list(model.params.dims),
        "hidden_activation": HIDDEN_ACTIVATION,
        "output_activation": OUTPUT_ACTIVATION,
        "layers": [
            {"weights": w.tolist(), "bias": b.tolist()}
            for w, b in zip(model.params.weights, model.params.biases)
        ],
        "config": {
            "learning_rate": model.config.learning_rate,
            "weight_decay": model.config.weight_decay,
            "max_epochs": model.config.max_epochs,
            "patience": model.config.patience,
            "folds": model.config.folds,
            "batch_size": model.config.batch_size,
            "pos_weight": model.config.pos_weight,
            "seed": model.config.seed,
            "hidden1": model.config.hidden1,
            "hidden2": model.config.hidden2,
        },
        "fold_metrics": [
            {
                "fold": fm.fold,
                "train_losses": fm.train_losses,
                "val_losses": fm.val_losses,
                "best_val_loss": fm.best_val_loss,
                "best_epoch": fm.best_epoch,
            }
            for fm in model.fold_metrics
        ],
        "chosen_fold": model.chosen_fold,
        "keyword_model_hash": model.keyword_model_hash,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(serialize_model(model), encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except ValueError:
        raise DataError(f"{path} is not valid JSON") from None
    if payload.get("format") != _FORMAT or payload.get("version") != _VERSION:
        raise DataError(f"{path} is not a keywatch classifier file")
    params = ClassifierParams(
        weights=[np.array(layer["weights"]) for layer in payload["layers"]],
        biases=[np.array(layer["bias"]) for layer in payload["layers"]],
    )
    config = TrainConfig(**payload["config"])
    fold_metrics = [
        FoldMetrics(
            fold=fm["fold"],
            train_losses=fm["train_losses"],
            val_losses=fm["val_losses"],
            best_val_loss=fm["best_val_loss"],
            best_epoch=fm["best_epoch"],
        )
        for fm in payload["fold_metrics"]
    ]
    return TrainedModel(
        params=params,
        fold_metrics=fold_metrics,
        chosen_fold=payload["chosen_fold"],
        config=config,
        keyword_model_hash=payload.get("keyword_model_hash", ""),
    )
