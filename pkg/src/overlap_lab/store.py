"""Parsing, validation, and writing of every on-disk format.

Formats
-------
manifest.json        {"format_version":1, "dataset_id", "classes":[...],
                      "images":[{"image_id","label_index","split","image_path"?}]}
prediction-set dir   meta.json + ids.txt + scores.bin.  ids.txt is the single
                     source of row order (one id per line, LF, UTF-8).
                     scores.bin is raw IEEE-754 binary32, little-endian,
                     row-major, no header, no padding.
corrections.json     {"source", "corrections":{image_id: class_name}}
annotations.jsonl    one JSON object per line, strictly append-only
partition/subset/ensemble artifacts   JSON, see the write_* functions

Loaders are pure and parallelizable across files.  The annotation journal
has a single-writer contract; readers tolerate a partially written final
line by discarding it.
"""

from __future__ import annotations

import json
import os
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from overlap_lab import model
from overlap_lab.errors import (
    DatasetIdMismatch,
    DuplicateImageId,
    IoFailure,
    LabelOutOfRange,
    MalformedJson,
    SizeMismatch,
    UnknownImageId,
)

FORMAT_VERSION = 1
SCORES_DTYPE = np.dtype("<f4")

META_NAME = "meta.json"
IDS_NAME = "ids.txt"
SCORES_NAME = "scores.bin"


# ---------------------------------------------------------------------------
# JSON plumbing

def _read_json(path: Path | str) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"{path}: {exc}") from exc


def _write_json(path: Path | str, payload: Any) -> None:
    try:
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _field(obj: Any, key: str, kind: type | tuple[type, ...], where: str) -> Any:
    if not isinstance(obj, dict):
        raise MalformedJson(f"{where}: expected a JSON object")
    if key not in obj:
        raise MalformedJson(f"{where}: missing required field {key!r}")
    value = obj[key]
    if isinstance(value, bool) and kind is int:
        raise MalformedJson(f"{where}: field {key!r} must be an integer")
    if not isinstance(value, kind):
        raise MalformedJson(f"{where}: field {key!r} has the wrong type")
    return value


def _check_version(obj: Any, where: str) -> None:
    version = _field(obj, "format_version", int, where)
    if version != FORMAT_VERSION:
        raise MalformedJson(f"{where}: unsupported format_version {version}")


# ---------------------------------------------------------------------------
# Dataset manifest

def load_manifest(path: Path | str) -> model.DatasetManifest:
    """Parse and fully validate a manifest.json."""
    where = str(path)
    raw = _read_json(path)
    _check_version(raw, where)
    dataset_id = _field(raw, "dataset_id", str, where)
    classes = _field(raw, "classes", list, where)
    if not all(isinstance(c, str) for c in classes):
        raise MalformedJson(f"{where}: class names must be strings")
    try:
        vocabulary = model.ClassVocabulary(tuple(classes))
    except ValueError as exc:
        raise MalformedJson(f"{where}: {exc}") from exc

    images = _field(raw, "images", list, where)
    records = []
    for pos, item in enumerate(images):
        entry = f"{where}: images[{pos}]"
        image_id = _field(item, "image_id", str, entry)
        label_index = _field(item, "label_index", int, entry)
        if not 0 <= label_index < vocabulary.size:
            raise LabelOutOfRange(image_id, label_index, vocabulary.size)
        split = _field(item, "split", str, entry)
        if split not in model.SPLITS:
            split = "extra"  # evaluation-only data collapses to the extra split
        image_path = item.get("image_path")
        if image_path is not None and not isinstance(image_path, str):
            raise MalformedJson(f"{entry}: image_path must be a string")
        records.append(
            model.ImageRecord(
                image_id=image_id,
                label_index=label_index,
                split=split,
                image_path=image_path,
            )
        )
    return model.DatasetManifest(
        dataset_id=dataset_id, vocabulary=vocabulary, records=tuple(records)
    )


def write_manifest(manifest: model.DatasetManifest, path: Path | str) -> None:
    images = []
    for rec in manifest.records:
        item: dict[str, Any] = {
            "image_id": rec.image_id,
            "label_index": rec.label_index,
            "split": rec.split,
        }
        if rec.image_path is not None:
            item["image_path"] = rec.image_path
        images.append(item)
    _write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "dataset_id": manifest.dataset_id,
            "classes": list(manifest.vocabulary.names),
            "images": images,
        },
    )


# ---------------------------------------------------------------------------
# Prediction sets

def _split_id_lines(text: str) -> list[str]:
    if text == "":
        return []
    if text.endswith("\n"):
        text = text[:-1]
    return text.split("\n")


def load_prediction_set(
    directory: Path | str, manifest: model.DatasetManifest
) -> model.PredictionSet:
    """Load meta.json + ids.txt + scores.bin, validated against the manifest."""
    directory = Path(directory)
    where = str(directory / META_NAME)
    meta = _read_json(directory / META_NAME)
    _check_version(meta, where)
    model_id = _field(meta, "model_id", str, where)
    method_id = _field(meta, "method_id", str, where)
    replicate_index = _field(meta, "replicate_index", int, where)
    if replicate_index < 0:
        raise MalformedJson(f"{where}: replicate_index must be non-negative")
    dataset_id = _field(meta, "dataset_id", str, where)
    num_images = _field(meta, "num_images", int, where)
    num_classes = _field(meta, "num_classes", int, where)
    if num_images < 0 or num_classes < 1:
        raise MalformedJson(f"{where}: bad num_images/num_classes")
    if _field(meta, "dtype", str, where) != "f32le":
        raise MalformedJson(f"{where}: dtype must be 'f32le'")
    if _field(meta, "layout", str, where) != "row-major":
        raise MalformedJson(f"{where}: layout must be 'row-major'")

    if dataset_id != manifest.dataset_id:
        raise DatasetIdMismatch(dataset_id, manifest.dataset_id)
    if num_classes != manifest.vocabulary.size:
        raise SizeMismatch(
            f"{where}: declares {num_classes} classes, "
            f"manifest has {manifest.vocabulary.size}"
        )

    ids_path = directory / IDS_NAME
    try:
        ids_text = ids_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {ids_path}: {exc}") from exc
    image_ids = _split_id_lines(ids_text)
    if len(image_ids) != num_images:
        raise SizeMismatch(
            f"{ids_path}: {len(image_ids)} ids for declared num_images {num_images}"
        )
    seen: set[str] = set()
    for image_id in image_ids:
        if image_id in seen:
            raise DuplicateImageId(image_id, where=str(ids_path))
        seen.add(image_id)
        if not manifest.has_image(image_id):
            raise UnknownImageId(image_id, where=str(ids_path))

    scores_path = directory / SCORES_NAME
    try:
        blob = scores_path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {scores_path}: {exc}") from exc
    expected = num_images * num_classes * SCORES_DTYPE.itemsize
    if len(blob) != expected:
        raise SizeMismatch(
            f"{scores_path}: {len(blob)} bytes, expected {expected} "
            f"({num_images} x {num_classes} x {SCORES_DTYPE.itemsize})"
        )
    scores = np.frombuffer(blob, dtype=SCORES_DTYPE).reshape(num_images, num_classes)

    return model.PredictionSet(
        model_id=model_id,
        method_id=method_id,
        replicate_index=replicate_index,
        dataset_id=dataset_id,
        image_ids=tuple(image_ids),
        scores=scores,
    )


def write_prediction_set(ps: model.PredictionSet, directory: Path | str) -> None:
    """Emit meta.json, ids.txt, scores.bin; overwrites any existing dump."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {directory}: {exc}") from exc
    meta = {
        "format_version": FORMAT_VERSION,
        "model_id": ps.model_id,
        "method_id": ps.method_id,
        "replicate_index": ps.replicate_index,
        "dataset_id": ps.dataset_id,
        "num_images": ps.num_images,
        "num_classes": ps.num_classes,
        "dtype": "f32le",
        "layout": "row-major",
    }
    try:
        _write_json(directory / META_NAME, meta)
        (directory / IDS_NAME).write_text(
            "".join(image_id + "\n" for image_id in ps.image_ids), encoding="utf-8"
        )
        blob = np.ascontiguousarray(ps.scores, dtype=SCORES_DTYPE).tobytes()
        (directory / SCORES_NAME).write_bytes(blob)
    except OSError as exc:
        raise IoFailure(f"cannot write prediction set to {directory}: {exc}") from exc


# ---------------------------------------------------------------------------
# Correction tables

def load_corrections(path: Path | str) -> model.LabelCorrectionTable:
    where = str(path)
    raw = _read_json(path)
    source = _field(raw, "source", str, where)
    corrections = _field(raw, "corrections", dict, where)
    for key, value in corrections.items():
        if not isinstance(value, str):
            raise MalformedJson(f"{where}: correction for {key!r} must be a class name")
    return model.LabelCorrectionTable(source=source, corrections=dict(corrections))


def write_corrections(table: model.LabelCorrectionTable, path: Path | str) -> None:
    _write_json(path, {"source": table.source, "corrections": dict(table.corrections)})


# ---------------------------------------------------------------------------
# Annotation journal (strictly append-only, single writer)

def annotation_payload(a: model.ErrorAnnotation) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "image_id": a.image_id,
        "error_class": a.error_class,
        "annotator": a.annotator,
        "timestamp": model.format_timestamp(a.timestamp),
    }
    if a.note is not None:
        payload["note"] = a.note
    return payload


def _annotation_from_payload(obj: Any, where: str) -> model.ErrorAnnotation:
    image_id = _field(obj, "image_id", str, where)
    error_class = _field(obj, "error_class", str, where)
    annotator = _field(obj, "annotator", str, where)
    ts_text = _field(obj, "timestamp", str, where)
    try:
        timestamp = model.parse_timestamp(ts_text)
    except ValueError as exc:
        raise MalformedJson(f"{where}: {exc}") from exc
    note = obj.get("note")
    if note is not None and not isinstance(note, str):
        raise MalformedJson(f"{where}: note must be a string")
    return model.ErrorAnnotation(
        image_id=image_id,
        error_class=error_class,
        annotator=annotator,
        timestamp=timestamp,
        note=note,
    )


def append_annotation(log_path: Path | str, a: model.ErrorAnnotation) -> None:
    """Append exactly one line and fsync before returning."""
    log_path = Path(log_path)
    line = json.dumps(annotation_payload(a))
    try:
        if log_path.parent and not log_path.parent.exists():
            log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        raise IoFailure(f"cannot append to {log_path}: {exc}") from exc


def read_annotations(log_path: Path | str) -> list[model.ErrorAnnotation]:
    """Read the journal in append order; a partial final line is discarded."""
    log_path = Path(log_path)
    if not log_path.exists():
        return []
    try:
        raw = log_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {log_path}: {exc}") from exc
    parts = raw.split("\n")
    complete, tail = parts[:-1], parts[-1]
    entries: list[model.ErrorAnnotation] = []
    for lineno, line in enumerate(complete, start=1):
        if not line:
            continue
        where = f"{log_path}:{lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedJson(f"{where}: {exc}") from exc
        entries.append(_annotation_from_payload(obj, where))
    if tail:
        # no trailing newline: the writer may have died mid-line
        try:
            obj = json.loads(tail)
        except json.JSONDecodeError:
            return entries
        entries.append(_annotation_from_payload(obj, f"{log_path}:{len(parts)}"))
    return entries


# ---------------------------------------------------------------------------
# Analysis artifacts

def write_partition(partition: model.OverlapPartition, path: Path | str) -> None:
    _write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "n_runs": partition.n_runs,
            "group_sizes": list(partition.group_sizes),
            "labels": {i: partition.labels[i] for i in sorted(partition.labels)},
        },
    )


def load_partition(path: Path | str) -> model.OverlapPartition:
    where = str(path)
    raw = _read_json(path)
    _check_version(raw, where)
    n_runs = _field(raw, "n_runs", int, where)
    group_sizes = _field(raw, "group_sizes", list, where)
    labels = _field(raw, "labels", dict, where)
    try:
        return model.OverlapPartition(
            n_runs=n_runs,
            labels={str(k): int(v) for k, v in labels.items()},
            group_sizes=tuple(int(g) for g in group_sizes),
        )
    except (TypeError, ValueError) as exc:
        raise MalformedJson(f"{where}: {exc}") from exc


def write_subset_table(table: model.SubsetCorrectnessTable, path: Path | str) -> None:
    _write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "methods": list(table.methods),
            "counts": {str(mask): table.counts[mask] for mask in sorted(table.counts)},
        },
    )


def load_subset_table(path: Path | str) -> model.SubsetCorrectnessTable:
    where = str(path)
    raw = _read_json(path)
    _check_version(raw, where)
    methods = _field(raw, "methods", list, where)
    counts_raw = _field(raw, "counts", dict, where)
    try:
        counts = {int(k): int(v) for k, v in counts_raw.items()}
        return model.SubsetCorrectnessTable(methods=tuple(methods), counts=counts)
    except (TypeError, ValueError) as exc:
        raise MalformedJson(f"{where}: {exc}") from exc


def write_ensemble_result(result: model.EnsembleResult, path: Path | str) -> None:
    _write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "rule": result.rule,
            "member_run_ids": list(result.member_run_ids),
            "predictions": {i: result.predictions[i] for i in sorted(result.predictions)},
            "accuracy": {
                "numerator": result.accuracy.numerator,
                "denominator": result.accuracy.denominator,
            },
        },
    )


def load_ensemble_result(path: Path | str) -> model.EnsembleResult:
    where = str(path)
    raw = _read_json(path)
    _check_version(raw, where)
    rule = _field(raw, "rule", str, where)
    member_run_ids = _field(raw, "member_run_ids", list, where)
    predictions = _field(raw, "predictions", dict, where)
    acc = _field(raw, "accuracy", dict, where)
    try:
        accuracy = Fraction(int(acc["numerator"]), int(acc["denominator"]))
        return model.EnsembleResult(
            rule=rule,
            member_run_ids=tuple(member_run_ids),
            predictions={str(k): int(v) for k, v in predictions.items()},
            accuracy=accuracy,
        )
    except (TypeError, ValueError, KeyError, ZeroDivisionError) as exc:
        raise MalformedJson(f"{where}: {exc}") from exc
