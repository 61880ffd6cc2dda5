"""Cross-package conformance: exporter output loads through the analysis toolkit."""

from __future__ import annotations

import json

import numpy as np
import pytest

from prediction_exporter import export

overlap_lab_store = pytest.importorskip("overlap_lab.store")


def test_export_loads_bit_exact_on_10x5_fixture(tmp_path):
    num_images, num_classes = 10, 5
    manifest_payload = {
        "format_version": 1,
        "dataset_id": "conformance",
        "classes": [f"class_{c}" for c in range(num_classes)],
        "images": [
            {"image_id": f"img{i:03d}", "label_index": i % num_classes, "split": "test"}
            for i in range(num_images)
        ],
    }
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(json.dumps(manifest_payload), encoding="utf-8")

    rng = np.random.default_rng(2024)
    table = {
        f"img{i:03d}": rng.standard_normal(num_classes) * 7.5 for i in range(num_images)
    }
    out = export(
        lambda image_id: table[image_id], manifest_path, tmp_path / "dump",
        model_id="frozen-net", method_id="ExportedMethod", replicate_index=2,
    )

    manifest = overlap_lab_store.load_manifest(manifest_path)
    loaded = overlap_lab_store.load_prediction_set(out, manifest)
    assert loaded.model_id == "frozen-net"
    assert loaded.method_id == "ExportedMethod"
    assert loaded.replicate_index == 2
    assert loaded.image_ids == tuple(f"img{i:03d}" for i in range(num_images))

    expected = np.stack(
        [table[f"img{i:03d}"] for i in range(num_images)]
    ).astype("<f4")
    assert loaded.scores.tobytes() == expected.tobytes()
    print("[acceptance] exporter-conformance (10x5 fixture, bit-exact): PASS")
