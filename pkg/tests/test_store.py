from __future__ import annotations

import json
import os
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from overlap_lab import store
from overlap_lab.errors import (
    DatasetIdMismatch,
    DuplicateImageId,
    InvalidErrorClass,
    IoFailure,
    LabelOutOfRange,
    MalformedJson,
    NonFiniteScore,
    SizeMismatch,
    UnknownImageId,
)
from overlap_lab.model import (
    EnsembleResult,
    ErrorAnnotation,
    LabelCorrectionTable,
    OverlapPartition,
    PredictionSet,
    SubsetCorrectnessTable,
    parse_timestamp,
)

from helpers import make_manifest, run_random


def write_manifest_json(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")


def minimal_manifest_payload():
    return {
        "format_version": 1,
        "dataset_id": "demo",
        "classes": ["a", "b"],
        "images": [
            {"image_id": "img1", "label_index": 0, "split": "test"},
            {"image_id": "img2", "label_index": 1, "split": "test"},
            {"image_id": "img3", "label_index": 0, "split": "train"},
        ],
    }


class TestManifestIO:
    def test_minimal_valid(self, tmp_path):
        path = tmp_path / "manifest.json"
        write_manifest_json(path, minimal_manifest_payload())
        manifest = store.load_manifest(path)
        assert manifest.vocabulary.size == 2
        assert manifest.num_images == 3

    def test_duplicate_image_id(self, tmp_path):
        payload = minimal_manifest_payload()
        payload["images"].append({"image_id": "img1", "label_index": 1, "split": "test"})
        path = tmp_path / "manifest.json"
        write_manifest_json(path, payload)
        with pytest.raises(DuplicateImageId) as err:
            store.load_manifest(path)
        assert err.value.image_id == "img1"

    def test_label_out_of_range(self, tmp_path):
        payload = minimal_manifest_payload()
        payload["images"][0]["label_index"] = 2  # == C
        path = tmp_path / "manifest.json"
        write_manifest_json(path, payload)
        with pytest.raises(LabelOutOfRange):
            store.load_manifest(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(MalformedJson):
            store.load_manifest(path)

    def test_missing_field(self, tmp_path):
        payload = minimal_manifest_payload()
        del payload["classes"]
        path = tmp_path / "manifest.json"
        write_manifest_json(path, payload)
        with pytest.raises(MalformedJson, match="classes"):
            store.load_manifest(path)

    def test_unknown_split_collapses_to_extra(self, tmp_path):
        payload = minimal_manifest_payload()
        payload["images"][0]["split"] = "val2024"
        path = tmp_path / "manifest.json"
        write_manifest_json(path, payload)
        manifest = store.load_manifest(path)
        assert manifest.record("img1").split == "extra"

    def test_round_trip_identity(self, tmp_path):
        manifest = make_manifest([0, 1, 2, 1], num_classes=3, image_paths={"img000": "x/y.jpg"})
        path = tmp_path / "manifest.json"
        store.write_manifest(manifest, path)
        assert store.load_manifest(path) == manifest


class TestPredictionSetIO:
    def test_round_trip(self, tmp_path, rng):
        manifest = make_manifest([0, 1, 2], num_classes=3)
        ps = run_random(rng, manifest)
        store.write_prediction_set(ps, tmp_path / "dump")
        loaded = store.load_prediction_set(tmp_path / "dump", manifest)
        assert loaded == ps
        assert loaded.scores.tobytes() == ps.scores.tobytes()

    def test_size_arithmetic(self, tmp_path):
        # 2 images x 3 classes -> exactly 24 bytes of scores
        manifest = make_manifest([0, 1], num_classes=3)
        ps = PredictionSet(
            "m", "meth", 0, "synth", ("img000", "img001"), np.zeros((2, 3))
        )
        store.write_prediction_set(ps, tmp_path / "dump")
        assert (tmp_path / "dump" / "scores.bin").stat().st_size == 24
        loaded = store.load_prediction_set(tmp_path / "dump", manifest)
        assert loaded.scores.shape == (2, 3)

    def test_truncated_scores(self, tmp_path, rng):
        manifest = make_manifest([0, 1], num_classes=3)
        ps = run_random(rng, manifest)
        store.write_prediction_set(ps, tmp_path / "dump")
        blob = (tmp_path / "dump" / "scores.bin").read_bytes()
        (tmp_path / "dump" / "scores.bin").write_bytes(blob[:-1])
        with pytest.raises(SizeMismatch):
            store.load_prediction_set(tmp_path / "dump", manifest)

    def test_duplicate_id_in_ids_txt(self, tmp_path, rng):
        manifest = make_manifest([0, 1], num_classes=3)
        ps = run_random(rng, manifest)
        store.write_prediction_set(ps, tmp_path / "dump")
        (tmp_path / "dump" / "ids.txt").write_text("img000\nimg000\n", encoding="utf-8")
        with pytest.raises(DuplicateImageId):
            store.load_prediction_set(tmp_path / "dump", manifest)

    def test_unknown_image_id(self, tmp_path, rng):
        manifest = make_manifest([0, 1], num_classes=3)
        ps = run_random(rng, manifest)
        store.write_prediction_set(ps, tmp_path / "dump")
        (tmp_path / "dump" / "ids.txt").write_text("img000\nghost\n", encoding="utf-8")
        with pytest.raises(UnknownImageId) as err:
            store.load_prediction_set(tmp_path / "dump", manifest)
        assert err.value.image_id == "ghost"

    def test_nan_scores(self, tmp_path, rng):
        manifest = make_manifest([0, 1], num_classes=3)
        ps = run_random(rng, manifest)
        store.write_prediction_set(ps, tmp_path / "dump")
        scores = np.frombuffer(
            (tmp_path / "dump" / "scores.bin").read_bytes(), dtype="<f4"
        ).reshape(2, 3).copy()
        scores[1, 0] = np.nan
        (tmp_path / "dump" / "scores.bin").write_bytes(scores.astype("<f4").tobytes())
        with pytest.raises(NonFiniteScore) as err:
            store.load_prediction_set(tmp_path / "dump", manifest)
        assert (err.value.row, err.value.column) == (1, 0)

    def test_dataset_id_mismatch(self, tmp_path, rng):
        manifest = make_manifest([0, 1], num_classes=3)
        other = make_manifest([0, 1], num_classes=3, dataset_id="other")
        ps = run_random(rng, manifest)
        store.write_prediction_set(ps, tmp_path / "dump")
        with pytest.raises(DatasetIdMismatch):
            store.load_prediction_set(tmp_path / "dump", other)

    def test_ids_count_mismatch(self, tmp_path, rng):
        manifest = make_manifest([0, 1], num_classes=3)
        ps = run_random(rng, manifest)
        store.write_prediction_set(ps, tmp_path / "dump")
        (tmp_path / "dump" / "ids.txt").write_text("img000\n", encoding="utf-8")
        with pytest.raises(SizeMismatch):
            store.load_prediction_set(tmp_path / "dump", manifest)

    def test_write_to_unusable_target(self, tmp_path, rng):
        manifest = make_manifest([0], num_classes=2)
        ps = run_random(rng, manifest)
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        with pytest.raises(IoFailure):
            store.write_prediction_set(ps, blocker / "dump")

    def test_overwrite_is_idempotent(self, tmp_path, rng):
        manifest = make_manifest([0, 1], num_classes=2)
        ps = run_random(rng, manifest)
        store.write_prediction_set(ps, tmp_path / "dump")
        store.write_prediction_set(ps, tmp_path / "dump")
        assert store.load_prediction_set(tmp_path / "dump", manifest) == ps

    @settings(max_examples=25, deadline=None)
    @given(
        scores=arrays(
            dtype=np.float32,
            shape=st.tuples(st.integers(1, 5), st.integers(2, 4)),
            elements=st.floats(
                allow_nan=False, allow_infinity=False, width=32, min_value=-1e9, max_value=1e9
            ),
        )
    )
    def test_round_trip_bit_exact_property(self, tmp_path_factory, scores):
        n, c = scores.shape
        manifest = make_manifest([0] * n, num_classes=c)
        ps = PredictionSet(
            "m", "meth", 0, "synth",
            tuple(f"img{i:03d}" for i in range(n)), scores,
        )
        directory = tmp_path_factory.mktemp("dump")
        store.write_prediction_set(ps, directory)
        loaded = store.load_prediction_set(directory, manifest)
        assert loaded.scores.tobytes() == ps.scores.tobytes()


class TestAnnotationJournal:
    def entry(self, image_id="img1", error_class="PoorQuality", ts="2024-05-01T10:00:00.000Z"):
        return ErrorAnnotation(image_id, error_class, "alice", parse_timestamp(ts))

    def test_single_append(self, tmp_path):
        log = tmp_path / "ann.jsonl"
        store.append_annotation(log, self.entry())
        assert log.read_text(encoding="utf-8").count("\n") == 1
        entries = store.read_annotations(log)
        assert len(entries) == 1
        assert entries[0].error_class == "PoorQuality"

    def test_appends_preserve_order(self, tmp_path):
        log = tmp_path / "ann.jsonl"
        store.append_annotation(log, self.entry("a"))
        store.append_annotation(log, self.entry("b"))
        entries = store.read_annotations(log)
        assert [e.image_id for e in entries] == ["a", "b"]

    def test_invalid_error_class_never_enters_journal(self, tmp_path):
        with pytest.raises(InvalidErrorClass):
            self.entry(error_class="Blurry")

    def test_partial_final_line_discarded(self, tmp_path):
        log = tmp_path / "ann.jsonl"
        store.append_annotation(log, self.entry("a"))
        with open(log, "a", encoding="utf-8") as fh:
            fh.write('{"image_id": "b", "error_cl')  # writer died mid-line
        entries = store.read_annotations(log)
        assert [e.image_id for e in entries] == ["a"]

    def test_complete_final_line_without_newline_kept(self, tmp_path):
        log = tmp_path / "ann.jsonl"
        store.append_annotation(log, self.entry("a"))
        raw = log.read_text(encoding="utf-8")
        log.write_text(raw + json.dumps(store.annotation_payload(self.entry("b"))), encoding="utf-8")
        entries = store.read_annotations(log)
        assert [e.image_id for e in entries] == ["a", "b"]

    def test_corrupt_interior_line_is_an_error(self, tmp_path):
        log = tmp_path / "ann.jsonl"
        log.write_text("garbage\n" + json.dumps(store.annotation_payload(self.entry())) + "\n")
        with pytest.raises(MalformedJson):
            store.read_annotations(log)

    def test_missing_journal_reads_empty(self, tmp_path):
        assert store.read_annotations(tmp_path / "none.jsonl") == []

    def test_round_trip_with_note(self, tmp_path):
        log = tmp_path / "ann.jsonl"
        a = ErrorAnnotation(
            "img9", "Other", "bob", parse_timestamp("2024-06-01T00:00:00.001Z"), note="nest only"
        )
        store.append_annotation(log, a)
        assert store.read_annotations(log) == [a]


class TestCorrectionsIO:
    def test_round_trip(self, tmp_path):
        table = LabelCorrectionTable("vetted relabeling", {"img1": "b", "img2": "zzz"})
        path = tmp_path / "corrections.json"
        store.write_corrections(table, path)
        assert store.load_corrections(path) == table

    def test_rejects_non_string_values(self, tmp_path):
        path = tmp_path / "corrections.json"
        path.write_text(json.dumps({"source": "s", "corrections": {"img1": 3}}))
        with pytest.raises(MalformedJson):
            store.load_corrections(path)


class TestArtifactIO:
    def test_partition_round_trip(self, tmp_path):
        part = OverlapPartition.from_labels(3, {"a": 0, "b": 3, "c": 2, "d": 3})
        path = tmp_path / "part.json"
        store.write_partition(part, path)
        assert store.load_partition(path) == part

    def test_partition_rejects_inconsistent(self, tmp_path):
        path = tmp_path / "part.json"
        path.write_text(json.dumps({
            "format_version": 1, "n_runs": 1, "group_sizes": [1, 1], "labels": {"a": 1},
        }))
        with pytest.raises(MalformedJson):
            store.load_partition(path)

    def test_subset_table_round_trip(self, tmp_path):
        table = SubsetCorrectnessTable(("A", "B"), {0: 3, 1: 3, 2: 4, 3: 0})
        path = tmp_path / "subsets.json"
        store.write_subset_table(table, path)
        assert store.load_subset_table(path) == table

    def test_ensemble_round_trip(self, tmp_path):
        result = EnsembleResult("cp_avg", ("m1", "m2"), {"a": 1, "b": 0}, Fraction(1, 2))
        path = tmp_path / "ens.json"
        store.write_ensemble_result(result, path)
        assert store.load_ensemble_result(path) == result
