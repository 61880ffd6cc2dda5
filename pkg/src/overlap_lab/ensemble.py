"""Training-free ensembles over saved prediction sets.

Two rules:

* vote    -- each member's argmax label casts one vote; the class with the
             most votes wins.  Ties among top-vote classes are broken by
             the highest mean softmax probability across members, then by
             lowest class index.
* cp_avg  -- members' softmax rows are averaged and the argmax of the mean
             wins (ties by lowest index).

Both rules are deterministic and invariant under member reordering.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from overlap_lab.errors import (
    EmptyImageSet,
    ReplicateCountMismatch,
    TooManyMethods,
)
from overlap_lab.model import (
    MAX_METHODS,
    DatasetManifest,
    EnsembleResult,
    OverlapPartition,
    PredictionSet,
)
from overlap_lab.overlap import _canonical_ids, _truth_vector, aligned_rows


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax in 64-bit arithmetic, stable under large scores."""
    z = np.asarray(scores, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {z.shape}")
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _mean_member_probs(member_rows: Sequence[np.ndarray]) -> np.ndarray:
    """Mean softmax probabilities across members.

    Values are sorted along the member axis before summing so the float
    result cannot depend on member order.
    """
    stack = np.stack([softmax_rows(rows) for rows in member_rows])
    stack = np.sort(stack, axis=0)
    return stack.sum(axis=0) / len(member_rows)


def _prepare(
    runs: Sequence[PredictionSet],
    manifest: DatasetManifest,
    images: Iterable[str],
) -> tuple[list[str], np.ndarray, list[np.ndarray]]:
    if not runs:
        raise ValueError("at least one member run required")
    ids = _canonical_ids(images)
    if not ids:
        raise EmptyImageSet("ensemble over an empty image set")
    truth = _truth_vector(manifest, ids)
    member_rows = [aligned_rows(run, ids) for run in runs]
    return ids, truth, member_rows


def _finish(
    rule: str,
    runs: Sequence[PredictionSet],
    ids: list[str],
    truth: np.ndarray,
    predicted: np.ndarray,
) -> EnsembleResult:
    correct = int(np.count_nonzero(predicted == truth))
    return EnsembleResult(
        rule=rule,
        member_run_ids=tuple(run.model_id for run in runs),
        predictions={image_id: int(c) for image_id, c in zip(ids, predicted)},
        accuracy=Fraction(correct, len(ids)),
    )


def vote_ensemble(
    runs: Sequence[PredictionSet],
    manifest: DatasetManifest,
    images: Iterable[str],
) -> EnsembleResult:
    """Majority vote over member argmax labels."""
    ids, truth, member_rows = _prepare(runs, manifest, images)
    num_classes = member_rows[0].shape[1]
    member_preds = np.stack([np.argmax(rows, axis=1) for rows in member_rows])
    mean_probs = _mean_member_probs(member_rows)
    predicted = np.empty(len(ids), dtype=np.intp)
    for i in range(len(ids)):
        votes = np.bincount(member_preds[:, i], minlength=num_classes)
        tied = np.flatnonzero(votes == votes.max())
        if tied.size == 1:
            predicted[i] = tied[0]
        else:
            # tied is ascending, argmax keeps the first maximum: lowest index
            predicted[i] = tied[int(np.argmax(mean_probs[i, tied]))]
    return _finish("vote", runs, ids, truth, predicted)


def cp_avg_ensemble(
    runs: Sequence[PredictionSet],
    manifest: DatasetManifest,
    images: Iterable[str],
) -> EnsembleResult:
    """Argmax of the mean of member softmax rows."""
    ids, truth, member_rows = _prepare(runs, manifest, images)
    mean_probs = _mean_member_probs(member_rows)
    predicted = np.argmax(mean_probs, axis=1)
    return _finish("cp_avg", runs, ids, truth, predicted)


ENSEMBLE_FUNCTIONS = {"vote": vote_ensemble, "cp_avg": cp_avg_ensemble}


def oracle_upper_bound(partition: OverlapPartition) -> Fraction:
    """Accuracy of an oracle that is right whenever any member is.

    Equals 1 - hard/total: the subset nobody classifies correctly caps any
    selection-based ensemble.
    """
    total = partition.num_images
    if total == 0:
        raise EmptyImageSet("oracle bound over an empty partition")
    return Fraction(total - partition.group_sizes[0], total)


def sweep_subsets(
    runs_by_method: Mapping[str, Sequence[PredictionSet]],
    manifest: DatasetManifest,
    images: Iterable[str],
    rule: str,
) -> dict[int, Fraction]:
    """Mean ensemble accuracy for every non-empty subset of methods.

    Each method supplies the same number R of replicate runs.  For subset S
    and position r, the ensemble uses replicate r of every method in S, so
    the R ensembles are disjoint (no model reused across positions).  The
    returned map is keyed by bitmask over the method order of
    `runs_by_method` and holds the exact mean of the R accuracies.
    """
    if rule not in ENSEMBLE_FUNCTIONS:
        raise ValueError(f"unknown ensemble rule {rule!r}")
    methods = list(runs_by_method)
    if not methods:
        raise ValueError("at least one method required")
    if len(methods) > MAX_METHODS:
        raise TooManyMethods(len(methods), MAX_METHODS)
    replicates = len(runs_by_method[methods[0]])
    for method in methods:
        found = len(runs_by_method[method])
        if found != replicates:
            raise ReplicateCountMismatch(method, replicates, found)
    if replicates < 1:
        raise ReplicateCountMismatch(methods[0], 1, 0)

    build = ENSEMBLE_FUNCTIONS[rule]
    ids = _canonical_ids(images)
    means: dict[int, Fraction] = {}
    for mask in range(1, 1 << len(methods)):
        selected = [m for j, m in enumerate(methods) if mask >> j & 1]
        total = Fraction(0)
        for r in range(replicates):
            members = [runs_by_method[m][r] for m in selected]
            total += build(members, manifest, ids).accuracy
        means[mask] = total / replicates
    return means
