"""Per-image prediction overlap: labels, partitions, subset tables, accuracy.

Within-method and between-method overlap share one code path: callers pass
either several replicates of one method or one run from each of several
methods.  All operations are pure and deterministic.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Set

import numpy as np

from overlap_lab.errors import (
    EmptyImageSet,
    MissingImageCoverage,
    TooManyMethods,
    UnknownImageId,
)
from overlap_lab.model import (
    MAX_METHODS,
    DatasetManifest,
    OverlapPartition,
    PredictionSet,
    SubsetCorrectnessTable,
)


def argmax_labels(ps: PredictionSet) -> dict[str, int]:
    """Predicted class per image: row argmax, ties broken by lowest index."""
    winners = np.argmax(ps.scores, axis=1)  # np.argmax returns the first maximum
    return {image_id: int(c) for image_id, c in zip(ps.image_ids, winners)}


def _canonical_ids(images: Iterable[str]) -> list[str]:
    return sorted(set(images))


def aligned_rows(ps: PredictionSet, ids: Sequence[str]) -> np.ndarray:
    """Score rows of `ps` reordered to `ids`; every id must be covered."""
    rows = []
    for image_id in ids:
        if not ps.has_image(image_id):
            raise MissingImageCoverage(ps.model_id, image_id)
        rows.append(ps.row_of(image_id))
    if not rows:
        return ps.scores[:0]
    return ps.scores[np.asarray(rows, dtype=np.intp)]


def _truth_vector(manifest: DatasetManifest, ids: Sequence[str]) -> np.ndarray:
    truth = []
    for image_id in ids:
        if not manifest.has_image(image_id):
            raise UnknownImageId(image_id, where=manifest.dataset_id)
        truth.append(manifest.label_of(image_id))
    return np.asarray(truth, dtype=np.intp)


def overlap_labels(
    manifest: DatasetManifest,
    runs: Sequence[PredictionSet],
    images: Iterable[str],
) -> OverlapPartition:
    """Count, per image, how many runs predict the ground-truth class."""
    if not runs:
        raise ValueError("at least one run required")
    ids = _canonical_ids(images)
    truth = _truth_vector(manifest, ids)
    overlap = np.zeros(len(ids), dtype=np.intp)
    for run in runs:
        predicted = np.argmax(aligned_rows(run, ids), axis=1)
        overlap += predicted == truth
    labels = {image_id: int(o) for image_id, o in zip(ids, overlap)}
    return OverlapPartition.from_labels(len(runs), labels)


def correct_set(
    ps: PredictionSet, manifest: DatasetManifest, images: Iterable[str]
) -> set[str]:
    """The subset of `images` whose argmax label equals the ground truth."""
    ids = _canonical_ids(images)
    truth = _truth_vector(manifest, ids)
    predicted = np.argmax(aligned_rows(ps, ids), axis=1)
    return {image_id for image_id, ok in zip(ids, predicted == truth) if ok}


def subset_correctness(
    correct_sets: Mapping[str, Set[str]], universe: Iterable[str]
) -> SubsetCorrectnessTable:
    """Count images correct by exactly each subset of methods (all 2^k subsets)."""
    methods = list(correct_sets)
    if not methods:
        raise ValueError("at least one method required")
    if len(methods) > MAX_METHODS:
        raise TooManyMethods(len(methods), MAX_METHODS)
    universe_set = set(universe)
    for method, ids in correct_sets.items():
        extra = set(ids) - universe_set
        if extra:
            raise ValueError(
                f"correct set for {method!r} contains images outside the "
                f"universe, e.g. {sorted(extra)[0]!r}"
            )
    counts = {mask: 0 for mask in range(1 << len(methods))}
    for image_id in universe_set:
        mask = 0
        for j, method in enumerate(methods):
            if image_id in correct_sets[method]:
                mask |= 1 << j
        counts[mask] += 1
    return SubsetCorrectnessTable(methods=tuple(methods), counts=counts)


def accuracy(
    ps: PredictionSet, manifest: DatasetManifest, images: Iterable[str]
) -> Fraction:
    """Top-1 accuracy over `images` as an exact rational."""
    ids = _canonical_ids(images)
    if not ids:
        raise EmptyImageSet("accuracy over an empty image set")
    return Fraction(len(correct_set(ps, manifest, ids)), len(ids))


def per_class_accuracy(
    ps: PredictionSet, manifest: DatasetManifest, images: Iterable[str]
) -> dict[int, Fraction]:
    """Accuracy per ground-truth class; classes with no images are absent."""
    ids = _canonical_ids(images)
    if not ids:
        return {}
    truth = _truth_vector(manifest, ids)
    predicted = np.argmax(aligned_rows(ps, ids), axis=1)
    totals: dict[int, int] = {}
    hits: dict[int, int] = {}
    for label, ok in zip(truth, predicted == truth):
        label = int(label)
        totals[label] = totals.get(label, 0) + 1
        if ok:
            hits[label] = hits.get(label, 0) + 1
    return {c: Fraction(hits.get(c, 0), n) for c, n in sorted(totals.items())}


def export_subset(partition: OverlapPartition, which: int) -> list[str]:
    """Image ids with overlap exactly `which`, sorted lexicographically."""
    return partition.ids_with_overlap(which)
