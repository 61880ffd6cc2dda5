"""Dump classifier scores in the prediction-set directory format.

The adapter knows nothing about model internals: the scorer callback is
the entire integration surface.  It reads a dataset manifest.json, calls
the scorer once per image of the chosen split (in manifest record order),
and writes meta.json, ids.txt, and scores.bin:

    meta.json    {"format_version":1, "model_id", "method_id",
                  "replicate_index", "dataset_id", "num_images",
                  "num_classes", "dtype":"f32le", "layout":"row-major"}
    ids.txt      one image id per line, LF, UTF-8; the row order
    scores.bin   IEEE-754 binary32, little-endian, row-major, no header

Scores are cast to 32-bit floats at write time.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__version__ = "0.1.0"

SCORES_DTYPE = np.dtype("<f4")

Scorer = Callable[[str], Sequence[float]]


class ExportError(Exception):
    """Base class for exporter failures."""


class ManifestError(ExportError):
    """The manifest file is missing, unreadable, or malformed."""


class ScorerFailure(ExportError):
    def __init__(self, image_id: str, cause: BaseException) -> None:
        self.image_id = image_id
        super().__init__(f"scorer raised for image {image_id!r}: {cause}")


class BadScoreVector(ExportError):
    def __init__(self, image_id: str, reason: str) -> None:
        self.image_id = image_id
        super().__init__(f"bad score vector for image {image_id!r}: {reason}")


def _load_manifest(path: Path) -> tuple[str, int, list[dict]]:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    try:
        dataset_id = raw["dataset_id"]
        classes = raw["classes"]
        images = raw["images"]
    except (TypeError, KeyError) as exc:
        raise ManifestError(f"{path}: missing manifest field {exc}") from exc
    if not isinstance(classes, list) or len(classes) < 2:
        raise ManifestError(f"{path}: needs at least two classes")
    return str(dataset_id), len(classes), list(images)


def export(
    scorer: Scorer,
    manifest_path: Path | str,
    out_dir: Path | str,
    *,
    model_id: str,
    method_id: str,
    replicate_index: int = 0,
    split: str = "test",
) -> Path:
    """Score every image of `split` and write a prediction-set directory.

    The scorer receives an image id and must return a finite vector with
    one raw (pre-softmax) score per class.  Any scorer exception or
    malformed vector aborts the export naming the offending image.
    """
    dataset_id, num_classes, images = _load_manifest(Path(manifest_path))
    selected = [item for item in images if item.get("split") == split]
    image_ids = [str(item["image_id"]) for item in selected]

    rows = np.empty((len(image_ids), num_classes), dtype=SCORES_DTYPE)
    for i, image_id in enumerate(image_ids):
        try:
            vector = scorer(image_id)
        except Exception as exc:
            raise ScorerFailure(image_id, exc) from exc
        row = np.asarray(vector, dtype=np.float64)
        if row.ndim != 1 or row.shape[0] != num_classes:
            raise BadScoreVector(
                image_id, f"expected {num_classes} scores, got shape {row.shape}"
            )
        with np.errstate(over="ignore"):  # overflow is caught by the check below
            cast = row.astype(SCORES_DTYPE)
        if not np.all(np.isfinite(cast)):
            raise BadScoreVector(image_id, "non-finite score after float32 cast")
        rows[i] = cast

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": 1,
        "model_id": model_id,
        "method_id": method_id,
        "replicate_index": int(replicate_index),
        "dataset_id": dataset_id,
        "num_images": len(image_ids),
        "num_classes": num_classes,
        "dtype": "f32le",
        "layout": "row-major",
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    (out_dir / "ids.txt").write_text(
        "".join(image_id + "\n" for image_id in image_ids), encoding="utf-8"
    )
    (out_dir / "scores.bin").write_bytes(np.ascontiguousarray(rows).tobytes())
    return out_dir
