"""Label correction: relabel in-vocabulary fixes, drop out-of-vocabulary images.

Corrections reference class names, not indices, so a table survives
vocabulary reordering.  Train and test splits are corrected in one pass.
"""

from __future__ import annotations

import dataclasses
from typing import Iterable

import numpy as np

from overlap_lab.errors import UnknownImageId
from overlap_lab.model import DatasetManifest, LabelCorrectionTable, PredictionSet


def apply_corrections(
    manifest: DatasetManifest, table: LabelCorrectionTable
) -> tuple[DatasetManifest, list[str], list[str]]:
    """Apply a correction table; returns (corrected manifest, dropped, relabeled).

    Images whose corrected class name resolves in the vocabulary get the new
    label index; images whose corrected name is outside the vocabulary are
    removed.  The corrected dataset id is the old one with "++" appended.
    """
    for image_id in table.corrections:
        if not manifest.has_image(image_id):
            raise UnknownImageId(image_id, where="correction table")

    vocabulary = manifest.vocabulary
    records = []
    dropped: list[str] = []
    relabeled: list[str] = []
    for rec in manifest.records:
        corrected = table.corrections.get(rec.image_id)
        if corrected is None:
            records.append(rec)
        elif corrected in vocabulary:
            records.append(
                dataclasses.replace(rec, label_index=vocabulary.index_of(corrected))
            )
            relabeled.append(rec.image_id)
        else:
            dropped.append(rec.image_id)
    corrected_manifest = DatasetManifest(
        dataset_id=manifest.dataset_id + "++",
        vocabulary=vocabulary,
        records=tuple(records),
    )
    return corrected_manifest, dropped, relabeled


def restrict_predictions(ps: PredictionSet, kept: Iterable[str]) -> PredictionSet:
    """Drop rows for images outside `kept`; remaining row order is preserved."""
    kept_set = set(kept)
    unknown = kept_set - set(ps.image_ids)
    if unknown:
        raise UnknownImageId(sorted(unknown)[0], where=f"run {ps.model_id}")
    keep_rows = [i for i, image_id in enumerate(ps.image_ids) if image_id in kept_set]
    return dataclasses.replace(
        ps,
        image_ids=tuple(ps.image_ids[i] for i in keep_rows),
        scores=ps.scores[np.asarray(keep_rows, dtype=np.intp)],
    )
