"""Declarative pipeline configuration.

One INI-style file (key = value under sections) drives every command.
Dataset profiles pre-fill the published per-dataset settings; any explicit
key overrides its profile value. All paths and invariants are validated
up front so a bad config never produces partial outputs.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, replace
from pathlib import Path

from .classifier import TrainConfig
from .describer import DEFAULT_PROMPT, ProviderConfig
from .errors import ConfigError
from .induction import VectorizerConfig

API_KEY_ENV = "KEYWATCH_API_KEY"

# max_features / max_df / batch_size presets keyed by dataset profile
PROFILES: dict[str, dict] = {
    "ped2": {"max_features": 100, "max_df": 0.95, "batch_size": 200},
    "avenue": {"max_features": 200, "max_df": 1.0, "batch_size": 1000},
    "shanghaitech": {"max_features": 200, "max_df": 1.0, "batch_size": 2000},
}


@dataclass
class PipelineConfig:
    manifest: Path
    dataset_name: str
    provider: ProviderConfig
    sample_count: int
    induction_seed: int
    vectorizer: VectorizerConfig
    train: TrainConfig
    train_ratio: float
    output_dir: Path
    threshold: float
    stub_map: Path | None = None
    pos_weight_override: float | None = None


def _parse_df(text: str, name: str) -> int | float:
    try:
        return float(text) if "." in text or "e" in text.lower() else int(text)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {text!r}") from None


def _get(parser, section, key, fallback=None):
    return parser.get(section, key, fallback=fallback)


def _get_typed(parser, section, key, cast, fallback):
    raw = parser.get(section, key, fallback=None)
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} has invalid value {raw!r}") from None


def load_pipeline_config(
    path: str | Path,
    seed: int | None = None,
    output_dir: str | None = None,
    threshold: float | None = None,
    provider_url: str | None = None,
    stub_map: str | None = None,
) -> PipelineConfig:
    """Parse and fully validate a config file, applying CLI overrides."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None

    manifest_text = _get(parser, "dataset", "manifest")
    if not manifest_text:
        raise ConfigError("[dataset] manifest is required")
    manifest = (path.parent / manifest_text).resolve()
    if not manifest.is_file():
        raise ConfigError(f"manifest not found: {manifest}")
    dataset_name = _get(parser, "dataset", "name", fallback=manifest.stem)

    profile_name = _get(parser, "dataset", "profile")
    profile = {}
    if profile_name:
        try:
            profile = PROFILES[profile_name]
        except KeyError:
            known = ", ".join(sorted(PROFILES))
            raise ConfigError(
                f"unknown profile {profile_name!r} (known: {known})"
            ) from None

    provider = ProviderConfig(
        endpoint_url=provider_url or _get(parser, "provider", "endpoint_url", fallback=""),
        model_id=_get(parser, "provider", "model_id", fallback="stub"),
        prompt=_get(parser, "provider", "prompt", fallback=DEFAULT_PROMPT) or DEFAULT_PROMPT,
        timeout=_get_typed(parser, "provider", "timeout", float, 60.0),
        max_retries=_get_typed(parser, "provider", "max_retries", int, 3),
        max_concurrency=_get_typed(parser, "provider", "max_concurrency", int, 4),
        api_key=os.environ.get(API_KEY_ENV),
    )
    if provider.max_retries < 0 or provider.max_concurrency < 1 or provider.timeout <= 0:
        raise ConfigError("[provider] timeout/max_retries/max_concurrency out of range")

    sample_count = _get_typed(parser, "induction", "sample_count", int, 20)
    if sample_count < 1:
        raise ConfigError("[induction] sample_count must be positive")
    induction_seed = _get_typed(parser, "induction", "seed", int, 0)

    max_df_raw = _get(parser, "vectorizer", "max_df")
    min_df_raw = _get(parser, "vectorizer", "min_df")
    try:
        vectorizer = VectorizerConfig(
            max_features=_get_typed(
                parser, "vectorizer", "max_features", int, profile.get("max_features", 100)
            ),
            min_df=_parse_df(min_df_raw, "min_df") if min_df_raw else 1,
            max_df=_parse_df(max_df_raw, "max_df") if max_df_raw else profile.get("max_df", 1.0),
            ngram_n=_get_typed(parser, "vectorizer", "ngram_n", int, 1),
            stop_words=_get(parser, "vectorizer", "stop_words", fallback=None)
            or VectorizerConfig().stop_words,
            variant=_get(parser, "vectorizer", "variant", fallback="classic"),
        )
    except ValueError as exc:
        raise ConfigError(f"[vectorizer] {exc}") from None

    try:
        train = TrainConfig(
            learning_rate=_get_typed(parser, "training", "learning_rate", float, 0.001),
            weight_decay=_get_typed(parser, "training", "weight_decay", float, 0.001),
            max_epochs=_get_typed(parser, "training", "max_epochs", int, 20),
            patience=_get_typed(parser, "training", "patience", int, 3),
            folds=_get_typed(parser, "training", "folds", int, 5),
            batch_size=_get_typed(
                parser, "training", "batch_size", int, profile.get("batch_size", 200)
            ),
            seed=_get_typed(parser, "training", "seed", int, 0),
            hidden1=_get_typed(parser, "training", "hidden1", int, 64),
            hidden2=_get_typed(parser, "training", "hidden2", int, 32),
        )
    except ValueError as exc:
        raise ConfigError(f"[training] {exc}") from None

    train_ratio = _get_typed(parser, "training", "train_ratio", float, 0.8)
    if not 0 < train_ratio < 1:
        raise ConfigError("[training] train_ratio must be in (0, 1)")

    pos_weight_raw = _get(parser, "training", "pos_weight")
    pos_weight_override = None
    if pos_weight_raw:
        pos_weight_override = _get_typed(parser, "training", "pos_weight", float, None)
        if pos_weight_override <= 0:
            raise ConfigError("[training] pos_weight must be positive")

    out_text = output_dir or _get(parser, "output", "dir", fallback="out")
    resolved_out = Path(out_text) if output_dir else (path.parent / out_text).resolve()

    thr = threshold if threshold is not None else _get_typed(parser, "output", "threshold", float, 0.5)

    stub_path: Path | None = None
    stub_text = stub_map or _get(parser, "provider", "stub_map", fallback=None)
    if stub_text:
        stub_path = Path(stub_text) if stub_map else (path.parent / stub_text).resolve()
        if not stub_path.is_file():
            raise ConfigError(f"stub map not found: {stub_path}")

    if stub_path is None and not provider.endpoint_url:
        raise ConfigError("either [provider] endpoint_url or a stub map is required")

    cfg = PipelineConfig(
        manifest=manifest,
        dataset_name=dataset_name,
        provider=provider,
        sample_count=sample_count,
        induction_seed=induction_seed,
        vectorizer=vectorizer,
        train=train,
        train_ratio=train_ratio,
        output_dir=resolved_out,
        threshold=thr,
        stub_map=stub_path,
        pos_weight_override=pos_weight_override,
    )
    if seed is not None:
        cfg.induction_seed = seed
        cfg.train = replace(cfg.train, seed=seed)
    return cfg
