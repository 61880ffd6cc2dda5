"""Domain types shared by every other module.

All values are immutable after construction and safe to share across
threads.  Class identity is positional: an index into the vocabulary.
Score matrices are stored as 32-bit floats; derived statistics are
computed in 64-bit elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from overlap_lab.errors import (
    DuplicateImageId,
    InvalidErrorClass,
    LabelOutOfRange,
    NonFiniteScore,
    TooManyMethods,
)

SPLITS = ("train", "test", "extra")

ERROR_CLASSES = (
    "SimilarClassConfusion",
    "NonTargetSubject",
    "InadequateRepresentation",
    "PoorQuality",
    "Other",
)

ENSEMBLE_RULES = ("vote", "cp_avg")

MAX_METHODS = 16


@dataclass(frozen=True)
class ClassVocabulary:
    """Ordered list of class names; the index is the class identity."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(names) < 2:
            raise ValueError(f"vocabulary needs at least 2 classes, got {len(names)}")
        index: dict[str, int] = {}
        for i, name in enumerate(names):
            if name in index:
                raise ValueError(f"duplicate class name {name!r}")
            index[name] = i
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        return len(self.names)

    def __contains__(self, name: object) -> bool:
        return name in self._index  # type: ignore[attr-defined]

    def index_of(self, name: str) -> int:
        return self._index[name]  # type: ignore[attr-defined]

    def name_of(self, index: int) -> str:
        return self.names[index]


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    label_index: int
    split: str
    image_path: str | None = None

    def __post_init__(self) -> None:
        # numpy integers arrive here frequently; normalize for serialization
        object.__setattr__(self, "label_index", int(self.label_index))
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}, expected one of {SPLITS}")


@dataclass(frozen=True)
class DatasetManifest:
    """A dataset's vocabulary plus one record per image."""

    dataset_id: str
    vocabulary: ClassVocabulary
    records: tuple[ImageRecord, ...]

    def __post_init__(self) -> None:
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        by_id: dict[str, ImageRecord] = {}
        for rec in records:
            if rec.image_id in by_id:
                raise DuplicateImageId(rec.image_id, where=self.dataset_id)
            if not 0 <= rec.label_index < self.vocabulary.size:
                raise LabelOutOfRange(rec.image_id, rec.label_index, self.vocabulary.size)
            by_id[rec.image_id] = rec
        object.__setattr__(self, "_by_id", by_id)

    @property
    def num_images(self) -> int:
        return len(self.records)

    def has_image(self, image_id: str) -> bool:
        return image_id in self._by_id  # type: ignore[attr-defined]

    def record(self, image_id: str) -> ImageRecord:
        return self._by_id[image_id]  # type: ignore[attr-defined]

    def label_of(self, image_id: str) -> int:
        return self.record(image_id).label_index

    def ids_for_split(self, split: str) -> list[str]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}, expected one of {SPLITS}")
        return [r.image_id for r in self.records if r.split == split]

    def split_counts(self) -> dict[str, int]:
        counts = {split: 0 for split in SPLITS}
        for rec in self.records:
            counts[rec.split] += 1
        return counts


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """One model run's raw pre-softmax scores, row-aligned to image_ids."""

    model_id: str
    method_id: str
    replicate_index: int
    dataset_id: str
    image_ids: tuple[str, ...]
    scores: np.ndarray  # float32, shape (num_images, num_classes)

    def __post_init__(self) -> None:
        image_ids = tuple(self.image_ids)
        object.__setattr__(self, "image_ids", image_ids)
        if self.replicate_index < 0:
            raise ValueError("replicate_index must be non-negative")
        arr = np.array(self.scores, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"scores must be a 2-D matrix, got shape {arr.shape}")
        if arr.shape[0] != len(image_ids):
            raise ValueError(
                f"{arr.shape[0]} score rows for {len(image_ids)} image ids "
                f"in run {self.model_id!r}"
            )
        if arr.shape[1] < 1:
            raise ValueError("scores need at least one class column")
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            row, col = (int(v) for v in bad[0])
            raise NonFiniteScore(self.model_id, row, col)
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)
        index: dict[str, int] = {}
        for i, image_id in enumerate(image_ids):
            if image_id in index:
                raise DuplicateImageId(image_id, where=self.model_id)
            index[image_id] = i
        object.__setattr__(self, "_row_index", index)

    @property
    def num_images(self) -> int:
        return len(self.image_ids)

    @property
    def num_classes(self) -> int:
        return int(self.scores.shape[1])

    def has_image(self, image_id: str) -> bool:
        return image_id in self._row_index  # type: ignore[attr-defined]

    def row_of(self, image_id: str) -> int:
        return self._row_index[image_id]  # type: ignore[attr-defined]

    def __eq__(self, other: object) -> bool:
        # scores compare as raw 32-bit patterns, not by float semantics
        if not isinstance(other, PredictionSet):
            return NotImplemented
        return (
            self.model_id == other.model_id
            and self.method_id == other.method_id
            and self.replicate_index == other.replicate_index
            and self.dataset_id == other.dataset_id
            and self.image_ids == other.image_ids
            and self.scores.shape == other.scores.shape
            and self.scores.tobytes() == other.scores.tobytes()
        )


@dataclass(frozen=True)
class OverlapPartition:
    """Per-image count of runs that predicted the ground-truth class."""

    n_runs: int
    labels: dict[str, int]  # image_id -> overlap value in 0..n_runs
    group_sizes: tuple[int, ...]  # index o -> number of images with that overlap

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", dict(self.labels))
        object.__setattr__(self, "group_sizes", tuple(self.group_sizes))
        if self.n_runs < 1:
            raise ValueError("a partition needs at least one run")
        if len(self.group_sizes) != self.n_runs + 1:
            raise ValueError(
                f"group_sizes has {len(self.group_sizes)} entries, "
                f"expected {self.n_runs + 1}"
            )
        counts = [0] * (self.n_runs + 1)
        for image_id, overlap in self.labels.items():
            if not 0 <= overlap <= self.n_runs:
                raise ValueError(f"overlap {overlap} out of range for {image_id!r}")
            counts[overlap] += 1
        if tuple(counts) != self.group_sizes:
            raise ValueError("group_sizes inconsistent with labels")

    @classmethod
    def from_labels(cls, n_runs: int, labels: Mapping[str, int]) -> "OverlapPartition":
        counts = [0] * (n_runs + 1)
        for image_id, overlap in labels.items():
            if not 0 <= overlap <= n_runs:
                raise ValueError(f"overlap {overlap} out of range for {image_id!r}")
            counts[overlap] += 1
        return cls(n_runs=n_runs, labels=dict(labels), group_sizes=tuple(counts))

    @property
    def num_images(self) -> int:
        return len(self.labels)

    def ids_with_overlap(self, overlap: int) -> list[str]:
        if not 0 <= overlap <= self.n_runs:
            raise ValueError(f"overlap value {overlap} out of range 0..{self.n_runs}")
        return sorted(i for i, o in self.labels.items() if o == overlap)

    @property
    def hard_ids(self) -> list[str]:
        return self.ids_with_overlap(0)

    @property
    def easy_ids(self) -> list[str]:
        return self.ids_with_overlap(self.n_runs)


@dataclass(frozen=True)
class SubsetCorrectnessTable:
    """How many images exactly each subset of methods gets correct.

    counts is keyed by bitmask over `methods`: bit j set means methods[j]
    is in the subset.  Every one of the 2^k masks is present.
    """

    methods: tuple[str, ...]
    counts: dict[int, int]

    def __post_init__(self) -> None:
        methods = tuple(self.methods)
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "counts", dict(self.counts))
        if not methods:
            raise ValueError("at least one method required")
        if len(methods) > MAX_METHODS:
            raise TooManyMethods(len(methods), MAX_METHODS)
        if len(set(methods)) != len(methods):
            raise ValueError("method ids must be distinct")
        expected = set(range(1 << len(methods)))
        if set(self.counts) != expected:
            raise ValueError("counts must cover every subset mask exactly once")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("counts must be non-negative")

    @property
    def num_images(self) -> int:
        return sum(self.counts.values())

    def mask_of(self, names: Iterable[str]) -> int:
        mask = 0
        for name in names:
            mask |= 1 << self.methods.index(name)
        return mask

    def subset_names(self, mask: int) -> tuple[str, ...]:
        return tuple(m for j, m in enumerate(self.methods) if mask >> j & 1)

    def count_for(self, names: Iterable[str]) -> int:
        return self.counts[self.mask_of(names)]


@dataclass(frozen=True)
class EnsembleResult:
    rule: str  # "vote" or "cp_avg"
    member_run_ids: tuple[str, ...]
    predictions: dict[str, int]  # image_id -> predicted class index
    accuracy: Fraction

    def __post_init__(self) -> None:
        if self.rule not in ENSEMBLE_RULES:
            raise ValueError(f"unknown ensemble rule {self.rule!r}")
        object.__setattr__(self, "member_run_ids", tuple(self.member_run_ids))
        object.__setattr__(self, "predictions", dict(self.predictions))
        object.__setattr__(self, "accuracy", Fraction(self.accuracy))


@dataclass(frozen=True)
class LabelCorrectionTable:
    """Externally supplied relabeling, keyed by image id, values are class names."""

    source: str
    corrections: dict[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "corrections", dict(self.corrections))


@dataclass(frozen=True)
class ErrorAnnotation:
    """A human-assigned error class for one hard image."""

    image_id: str
    error_class: str
    annotator: str
    timestamp: datetime  # UTC, millisecond precision
    note: str | None = None

    def __post_init__(self) -> None:
        if self.error_class not in ERROR_CLASSES:
            raise InvalidErrorClass(self.error_class)
        ts = self.timestamp
        if ts.tzinfo is None:
            raise ValueError("annotation timestamp must be timezone-aware")
        ts = ts.astimezone(timezone.utc)
        ts = ts.replace(microsecond=ts.microsecond // 1000 * 1000)
        object.__setattr__(self, "timestamp", ts)


def utc_now_ms() -> datetime:
    """Current UTC time truncated to millisecond precision."""
    now = datetime.now(timezone.utc)
    return now.replace(microsecond=now.microsecond // 1000 * 1000)


def format_timestamp(ts: datetime) -> str:
    """Render as RFC 3339 UTC with milliseconds, e.g. 2024-05-01T12:30:00.250Z."""
    ts = ts.astimezone(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ts.microsecond // 1000:03d}Z"


def parse_timestamp(text: str) -> datetime:
    if not text.endswith("Z"):
        raise ValueError(f"timestamp must be UTC ('Z' suffix): {text!r}")
    base = datetime.strptime(text[:-1], "%Y-%m-%dT%H:%M:%S.%f")
    return base.replace(tzinfo=timezone.utc)
