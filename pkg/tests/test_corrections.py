from __future__ import annotations

import pytest

from overlap_lab.corrections import apply_corrections, restrict_predictions
from overlap_lab.errors import UnknownImageId
from overlap_lab.model import LabelCorrectionTable

from helpers import make_manifest, run_random


class TestApplyCorrections:
    def test_empty_table_is_identity_on_records(self):
        manifest = make_manifest([0, 1, 2], num_classes=3)
        corrected, dropped, relabeled = apply_corrections(
            manifest, LabelCorrectionTable("none", {})
        )
        assert corrected.records == manifest.records
        assert corrected.dataset_id == "synth++"
        assert dropped == [] and relabeled == []

    def test_in_vocabulary_relabel(self):
        manifest = make_manifest([0, 1], num_classes=3)
        table = LabelCorrectionTable("fix", {"img000": "class_2"})
        corrected, dropped, relabeled = apply_corrections(manifest, table)
        assert corrected.label_of("img000") == 2
        assert relabeled == ["img000"]
        assert dropped == []

    def test_out_of_vocabulary_drop(self):
        manifest = make_manifest([0, 1, 0], num_classes=2)
        table = LabelCorrectionTable("fix", {"img001": "not_a_known_species"})
        corrected, dropped, relabeled = apply_corrections(manifest, table)
        assert dropped == ["img001"]
        assert relabeled == []
        assert not corrected.has_image("img001")
        assert corrected.num_images == 2

    def test_hand_enumerated_mixed_table(self):
        # 10 images; 2 corrections resolve in-vocabulary, 1 does not
        manifest = make_manifest([0] * 10, num_classes=3)
        table = LabelCorrectionTable(
            "fix",
            {"img002": "class_1", "img005": "class_2", "img007": "mystery"},
        )
        corrected, dropped, relabeled = apply_corrections(manifest, table)
        assert relabeled == ["img002", "img005"]
        assert dropped == ["img007"]
        assert corrected.num_images == 9
        assert corrected.label_of("img002") == 1
        assert corrected.label_of("img005") == 2

    def test_unknown_image_rejected(self):
        manifest = make_manifest([0], num_classes=2)
        table = LabelCorrectionTable("fix", {"ghost": "class_1"})
        with pytest.raises(UnknownImageId):
            apply_corrections(manifest, table)

    def test_dropped_and_relabeled_partition_the_table(self):
        manifest = make_manifest([0] * 6, num_classes=2)
        table = LabelCorrectionTable(
            "fix", {"img000": "class_1", "img001": "zzz", "img002": "class_0"}
        )
        _, dropped, relabeled = apply_corrections(manifest, table)
        assert len(dropped) + len(relabeled) == len(table.corrections)
        assert not set(dropped) & set(relabeled)

    def test_corrected_manifest_revalidates(self):
        manifest = make_manifest([0, 1, 0, 1], num_classes=2)
        table = LabelCorrectionTable("fix", {"img000": "class_1", "img003": "gone"})
        corrected, _, _ = apply_corrections(manifest, table)
        # reconstructing from the same parts runs full validation again
        type(corrected)(corrected.dataset_id, corrected.vocabulary, corrected.records)

    def test_reapplying_surviving_corrections_changes_no_labels(self):
        manifest = make_manifest([0] * 5, num_classes=3)
        table = LabelCorrectionTable(
            "fix", {"img001": "class_2", "img003": "unknown_name"}
        )
        once, dropped, _ = apply_corrections(manifest, table)
        survivors = {
            k: v for k, v in table.corrections.items() if k not in dropped
        }
        twice, dropped_again, relabeled_again = apply_corrections(
            once, LabelCorrectionTable("fix", survivors)
        )
        assert dropped_again == []
        assert relabeled_again == ["img001"]
        assert twice.records == once.records


class TestRestrictPredictions:
    def test_keep_all_is_identity(self, rng):
        manifest = make_manifest([0, 1, 2], num_classes=3)
        ps = run_random(rng, manifest)
        restricted = restrict_predictions(ps, ps.image_ids)
        assert restricted == ps

    def test_keep_none_gives_zero_rows(self, rng):
        manifest = make_manifest([0, 1], num_classes=3)
        ps = run_random(rng, manifest)
        restricted = restrict_predictions(ps, [])
        assert restricted.num_images == 0
        assert restricted.scores.shape == (0, 3)
        assert restricted.model_id == ps.model_id

    def test_dropping_one_row_preserves_bits_and_order(self, rng):
        manifest = make_manifest([0, 1, 0], num_classes=4)
        ps = run_random(rng, manifest)
        restricted = restrict_predictions(ps, ["img000", "img002"])
        assert restricted.image_ids == ("img000", "img002")
        assert restricted.scores.shape == (2, 4)
        assert restricted.scores[0].tobytes() == ps.scores[0].tobytes()
        assert restricted.scores[1].tobytes() == ps.scores[2].tobytes()

    def test_unknown_kept_id(self, rng):
        manifest = make_manifest([0], num_classes=2)
        ps = run_random(rng, manifest)
        with pytest.raises(UnknownImageId):
            restrict_predictions(ps, ["ghost"])
