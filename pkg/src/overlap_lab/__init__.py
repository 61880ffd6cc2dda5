"""Prediction-overlap analysis, ensembling, and hard-image triage."""

from overlap_lab.corrections import apply_corrections, restrict_predictions
from overlap_lab.ensemble import (
    cp_avg_ensemble,
    oracle_upper_bound,
    softmax_rows,
    sweep_subsets,
    vote_ensemble,
)
from overlap_lab.model import (
    ERROR_CLASSES,
    ClassVocabulary,
    DatasetManifest,
    EnsembleResult,
    ErrorAnnotation,
    ImageRecord,
    LabelCorrectionTable,
    OverlapPartition,
    PredictionSet,
    SubsetCorrectnessTable,
)
from overlap_lab.overlap import (
    accuracy,
    argmax_labels,
    correct_set,
    export_subset,
    overlap_labels,
    per_class_accuracy,
    subset_correctness,
)
from overlap_lab.report import (
    AccuracyGrid,
    PrevalenceReport,
    emit_report,
    format_percent,
    prevalence,
    resolve_annotations,
)

__version__ = "0.1.0"

__all__ = [
    "ERROR_CLASSES",
    "AccuracyGrid",
    "ClassVocabulary",
    "DatasetManifest",
    "EnsembleResult",
    "ErrorAnnotation",
    "ImageRecord",
    "LabelCorrectionTable",
    "OverlapPartition",
    "PredictionSet",
    "PrevalenceReport",
    "SubsetCorrectnessTable",
    "accuracy",
    "apply_corrections",
    "argmax_labels",
    "correct_set",
    "cp_avg_ensemble",
    "emit_report",
    "export_subset",
    "format_percent",
    "oracle_upper_bound",
    "overlap_labels",
    "per_class_accuracy",
    "prevalence",
    "resolve_annotations",
    "restrict_predictions",
    "softmax_rows",
    "subset_correctness",
    "sweep_subsets",
    "vote_ensemble",
]
