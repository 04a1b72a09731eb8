"""End-to-end command implementations behind the CLI.

Each run_* function loads its inputs, performs one pipeline stage, and
writes its artifacts into the configured output directory. Errors from
lower layers are re-raised with the failing stage attached so the CLI can
report where the pipeline broke.
"""

from __future__ import annotations

import json
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

from . import classifier as clf
from . import dataset as ds
from . import deduction, describer, induction, metrics
from .config import PipelineConfig
from .errors import AllFailed, DataError, KeywatchError, MissingFile


@contextmanager
def _stage(name: str):
    try:
        yield
    except KeywatchError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


def _artifact(cfg: PipelineConfig, name: str) -> Path:
    return cfg.output_dir / name


def _store_path(cfg: PipelineConfig) -> Path:
    return _artifact(cfg, f"descriptions_{cfg.dataset_name}.jsonl")


def make_describer(cfg: PipelineConfig) -> describer.Describer:
    if cfg.stub_map is not None:
        try:
            texts = json.loads(cfg.stub_map.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read stub map {cfg.stub_map}: {exc}") from exc
        provider = describer.StubProvider(texts)
    else:
        provider = describer.HttpChatProvider()
    cache = describer.DescriptionCache(cfg.output_dir / "cache")
    return describer.Describer(cfg.provider, provider=provider, cache=cache)


def _describe_all(
    worker: describer.Describer, frames: list[ds.FrameRecord], stage: str
) -> list[describer.DescriptionRecord]:
    """Describe frames, failing loudly if any frame could not be described.

    Successful descriptions are already cached at this point, so a rerun
    after fixing the bad frames resumes without re-billing the provider.
    """
    with _stage(stage):
        try:
            result = worker.batch_describe(frames)
        except AllFailed as exc:
            raise exc.first if exc.first is not None else exc
        if result.errors:
            first = result.errors[0][1]
            ids = ", ".join(fid for fid, _ in result.errors[:5])
            more = "" if len(result.errors) <= 5 else f" (+{len(result.errors) - 5} more)"
            detail = str(first)
            first.args = (f"{len(result.errors)} frames failed ({ids}{more}); first: {detail}",)
            raise first
    return result.records


def _update_store(cfg: PipelineConfig, new_records) -> None:
    path = _store_path(cfg)
    merged = {}
    if path.is_file():
        for rec in describer.load_description_store(path):
            merged[(rec.frame_id, rec.model_id, rec.prompt_hash)] = rec
    for rec in new_records:
        merged[(rec.frame_id, rec.model_id, rec.prompt_hash)] = rec
    describer.save_description_store(list(merged.values()), path)


def run_induce(cfg: PipelineConfig) -> Path:
    """Sample frames, describe them, and write the keyword model + splits."""
    with _stage("load-manifest"):
        dataset = ds.load_manifest(cfg.manifest)
    with _stage("sample"):
        normal, anomalous = ds.sample_induction_frames(
            dataset, cfg.sample_count, cfg.induction_seed
        )
        excluded = {f.frame_id for f in normal} | {f.frame_id for f in anomalous}
        splits = ds.make_splits(dataset, excluded, cfg.train_ratio, cfg.induction_seed)

    worker = make_describer(cfg)
    normal_recs = _describe_all(worker, normal, "describe")
    anomalous_recs = _describe_all(worker, anomalous, "describe")

    with _stage("induce"):
        provenance = induction.Provenance(
            dataset=cfg.dataset_name,
            seed=cfg.induction_seed,
            model_id=cfg.provider.model_id,
        )
        model = induction.induce(normal_recs, anomalous_recs, cfg.vectorizer, provenance)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    keywords_path = _artifact(cfg, "keywords.tsv")
    induction.save_keyword_model(model, keywords_path)
    ds.save_splits(splits, _artifact(cfg, "splits.tsv"))
    _write_top_keywords(model, _artifact(cfg, "keywords_top.txt"))
    _update_store(cfg, normal_recs + anomalous_recs)
    return keywords_path


def _write_top_keywords(model: induction.KeywordModel, path: Path) -> None:
    ranked = sorted(
        zip(model.terms, model.weights), key=lambda tw: (-abs(tw[1]), tw[0])
    )
    lines = ["term\tweight\tside"]
    for term, weight in ranked:
        side = "anomalous" if weight > 0 else "normal" if weight < 0 else "neutral"
        lines.append(f"{term}\t{float(weight)!r}\t{side}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_artifacts(cfg: PipelineConfig):
    with _stage("load-artifacts"):
        dataset = ds.load_manifest(cfg.manifest)
        keywords_path = _artifact(cfg, "keywords.tsv")
        if not keywords_path.is_file():
            raise MissingFile(keywords_path)
        model = induction.load_keyword_model(keywords_path)
        splits = ds.load_splits(_artifact(cfg, "splits.tsv"))
    return dataset, model, splits


def _encode_split(cfg, dataset, keyword_model, frame_ids, stage):
    frames = [f for f in dataset.frames if f.frame_id in frame_ids]
    worker = make_describer(cfg)
    records = _describe_all(worker, frames, stage)
    _update_store(cfg, records)
    with _stage("encode"):
        encodings = [deduction.encode(rec, keyword_model) for rec in records]
    labels = [f.label for f in frames]
    video_ids = [f.video_id for f in frames]
    return encodings, labels, video_ids


def run_train(cfg: PipelineConfig) -> Path:
    """Encode the train split and fit the classifier."""
    dataset, keyword_model, splits = _load_artifacts(cfg)
    encodings, labels, _ = _encode_split(cfg, dataset, keyword_model, splits.train, "describe")

    with _stage("train"):
        pos_weight = (
            cfg.pos_weight_override
            if cfg.pos_weight_override is not None
            else clf.compute_pos_weight(labels)
        )
        train_cfg = replace(cfg.train, pos_weight=pos_weight)
        model = clf.train(
            list(zip(encodings, labels)),
            train_cfg,
            keyword_model_hash=induction.keyword_model_hash(keyword_model),
        )

    deduction.save_encodings(list(zip(encodings, labels)), _artifact(cfg, "encodings_train.tsv"))
    model_path = _artifact(cfg, "classifier.json")
    clf.save_model(model, model_path)
    _write_fold_log(model, _artifact(cfg, "fold_metrics.txt"))
    return model_path


def _write_fold_log(model: clf.TrainedModel, path: Path) -> None:
    lines = ["fold\tepoch\ttrain_loss\tval_loss"]
    for fm in model.fold_metrics:
        for epoch, (tr, va) in enumerate(zip(fm.train_losses, fm.val_losses)):
            lines.append(f"{fm.fold}\t{epoch}\t{tr!r}\t{va!r}")
    lines.append(f"# chosen_fold\t{model.chosen_fold}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_eval(cfg: PipelineConfig) -> metrics.EvalReport:
    """Score the test split and write the evaluation report."""
    dataset, keyword_model, splits = _load_artifacts(cfg)
    with _stage("load-artifacts"):
        model = clf.load_model(_artifact(cfg, "classifier.json"))
    encodings, labels, video_ids = _encode_split(
        cfg, dataset, keyword_model, splits.test, "describe"
    )
    with _stage("evaluate"):
        scores = [clf.predict(model, enc) for enc in encodings]
        report = metrics.evaluate(scores, labels, video_ids, cfg.threshold)

    metrics.save_report(report, _artifact(cfg, "eval_report.txt"))
    score_lines = ["frame_id,label,score"]
    for enc, label, score in zip(encodings, labels, scores):
        score_lines.append(f"{enc.frame_id},{label},{score!r}")
    _artifact(cfg, "scores.csv").write_text("\n".join(score_lines) + "\n", encoding="utf-8")
    return report


def run_infer(cfg: PipelineConfig, frame_ref: str) -> dict:
    """Describe, encode, and score one frame; return the full payload."""
    dataset, keyword_model, _ = _load_artifacts(cfg)
    with _stage("load-artifacts"):
        model = clf.load_model(_artifact(cfg, "classifier.json"))

    frame = dataset.get(frame_ref)
    if frame is None:
        # not a known id: treat as an image path (label is irrelevant here)
        frame = ds.FrameRecord(
            frame_id=Path(frame_ref).stem, video_id="", path=Path(frame_ref), label=0
        )
    worker = make_describer(cfg)
    with _stage("describe"):
        record = worker.describe_frame(frame)
    with _stage("encode"):
        encoding = deduction.encode(record, keyword_model)
    with _stage("predict"):
        probability = clf.predict(model, encoding)

    decision = "anomalous" if probability > cfg.threshold else "normal"
    payload = {
        "frame_id": frame.frame_id,
        "description": record.text,
        "probability": probability,
        "threshold": cfg.threshold,
        "decision": decision,
        "present_keywords": deduction.present_keywords(encoding, keyword_model),
        "terms": list(keyword_model.terms),
        "encoding": [float(v) for v in encoding.values],
    }
    _artifact(cfg, f"encoding_{frame.frame_id}.csv").write_text(
        deduction.encoding_heatmap_csv(encoding, keyword_model), encoding="utf-8"
    )
    _artifact(cfg, f"infer_{frame.frame_id}.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return payload


def run_describe(cfg: PipelineConfig) -> dict:
    """Warm the description cache for every frame in the manifest."""
    with _stage("load-manifest"):
        dataset = ds.load_manifest(cfg.manifest)
    worker = make_describer(cfg)
    with _stage("describe"):
        result = worker.batch_describe(dataset.frames)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _update_store(cfg, result.records)
    return {
        "described": len(result.records),
        "failed": [(fid, str(err)) for fid, err in result.errors],
    }
