"""Builders for synthetic manifests and prediction sets."""

from __future__ import annotations

import numpy as np

from overlap_lab.model import (
    ClassVocabulary,
    DatasetManifest,
    ImageRecord,
    PredictionSet,
)


def make_manifest(
    truth: list[int],
    num_classes: int,
    split: str = "test",
    dataset_id: str = "synth",
    image_paths: dict[str, str] | None = None,
) -> DatasetManifest:
    """Manifest with ids img000, img001, ... and the given truth labels."""
    names = tuple(f"class_{c}" for c in range(num_classes))
    paths = image_paths or {}
    records = tuple(
        ImageRecord(
            image_id=f"img{i:03d}",
            label_index=label,
            split=split,
            image_path=paths.get(f"img{i:03d}"),
        )
        for i, label in enumerate(truth)
    )
    return DatasetManifest(
        dataset_id=dataset_id, vocabulary=ClassVocabulary(names), records=records
    )


def run_from_predictions(
    manifest: DatasetManifest,
    predicted: list[int],
    model_id: str = "run0",
    method_id: str = "methodA",
    replicate_index: int = 0,
    peak: float = 6.0,
) -> PredictionSet:
    """A run whose argmax labels equal `predicted` (one peaked logit per row)."""
    num_classes = manifest.vocabulary.size
    scores = np.zeros((len(predicted), num_classes), dtype=np.float32)
    for i, c in enumerate(predicted):
        scores[i, c] = peak
    return PredictionSet(
        model_id=model_id,
        method_id=method_id,
        replicate_index=replicate_index,
        dataset_id=manifest.dataset_id,
        image_ids=tuple(r.image_id for r in manifest.records),
        scores=scores,
    )


def run_random(
    rng: np.random.Generator,
    manifest: DatasetManifest,
    model_id: str = "run0",
    method_id: str = "methodA",
    replicate_index: int = 0,
) -> PredictionSet:
    scores = rng.standard_normal(
        (manifest.num_images, manifest.vocabulary.size)
    ).astype(np.float32)
    return PredictionSet(
        model_id=model_id,
        method_id=method_id,
        replicate_index=replicate_index,
        dataset_id=manifest.dataset_id,
        image_ids=tuple(r.image_id for r in manifest.records),
        scores=scores,
    )


def run_integer_scores(
    rng: np.random.Generator,
    manifest: DatasetManifest,
    model_id: str = "run0",
    method_id: str = "methodA",
    replicate_index: int = 0,
) -> PredictionSet:
    """Integer-valued scores: float32 arithmetic on them is exact, ties abound."""
    scores = rng.integers(
        -8, 9, size=(manifest.num_images, manifest.vocabulary.size)
    ).astype(np.float32)
    return PredictionSet(
        model_id=model_id,
        method_id=method_id,
        replicate_index=replicate_index,
        dataset_id=manifest.dataset_id,
        image_ids=tuple(r.image_id for r in manifest.records),
        scores=scores,
    )
