import random

import pytest

from crossguard.fusion import (
    Detection,
    FusedDetection,
    ModelWeights,
    calibrate_confidence,
    ensemble_loss,
    fuse_frame,
    load_weights,
    save_weights,
    update_model_weights,
)
from crossguard.geometry import BBox, iou

from conftest import random_frame


def det(conf, box, source="m0", label="car", frame=0):
    return Detection(frame, source, label, conf, BBox(*box))


class TestDetectionValidation:
    def test_bad_confidence(self):
        with pytest.raises(ValueError):
            det(1.5, (0, 0, 1, 1))

    def test_unregistered_class(self):
        with pytest.raises(ValueError):
            det(0.5, (0, 0, 1, 1), label="bicycle")

    def test_whitespace_source(self):
        with pytest.raises(ValueError):
            det(0.5, (0, 0, 1, 1), source="a b")


class TestCalibrateConfidence:
    def test_identity_weight(self):
        w = ModelWeights(weights={"m0": 1.0})
        assert calibrate_confidence(det(0.8, (0, 0, 1, 1)), w).confidence == 0.8

    def test_halving(self):
        w = ModelWeights(weights={"m0": 0.5})
        assert calibrate_confidence(det(0.8, (0, 0, 1, 1)), w).confidence == pytest.approx(0.4)

    def test_clamped_at_one(self):
        w = ModelWeights(weights={"m0": 2.0})
        assert calibrate_confidence(det(0.7, (0, 0, 1, 1)), w).confidence == 1.0

    def test_missing_source_defaults_to_one(self):
        w = ModelWeights(weights={})
        assert calibrate_confidence(det(0.6, (0, 0, 1, 1)), w).confidence == 0.6


class TestFuseFrame:
    def test_single_detection_identity(self):
        d = det(0.8, (0, 0, 2, 2))
        [f] = fuse_frame([d], 1)
        assert f.box == d.box
        assert f.class_label == d.class_label
        assert f.confidence == pytest.approx(0.8)
        assert f.cluster_size == 1

    def test_two_source_agreement(self):
        dets = [det(0.8, (0, 0, 2, 2), source="a"),
                det(0.6, (0, 0, 2, 2), source="b")]
        [f] = fuse_frame(dets, 2)
        assert f.box == BBox(0, 0, 2, 2)
        assert f.confidence == pytest.approx(0.7)
        assert f.cluster_size == 2
        assert f.contributing_sources == {"a", "b"}

    def test_low_overlap_stays_split(self):
        dets = [det(0.8, (0, 0, 2, 2), source="a"),
                det(0.6, (1, 1, 3, 3), source="b")]
        out = fuse_frame(dets, 2)  # IoU = 1/7 < 0.5
        assert len(out) == 2
        assert sorted(f.confidence for f in out) == [pytest.approx(0.3),
                                                     pytest.approx(0.4)]

    def test_weighted_mean_coordinates(self):
        dets = [det(0.9, (0, 0, 10, 10), source="a"),
                det(0.3, (2, 2, 10, 10), source="b")]
        [f] = fuse_frame(dets, 2)
        # weights 0.75 / 0.25 on each corner coordinate
        assert f.box.x1 == pytest.approx(0.5)
        assert f.box.y1 == pytest.approx(0.5)
        assert f.box.x2 == pytest.approx(10.0)

    def test_cross_class_never_merges(self):
        dets = [det(0.8, (0, 0, 2, 2), source="a", label="car"),
                det(0.7, (0, 0, 2, 2), source="b", label="truck")]
        assert len(fuse_frame(dets, 2)) == 2

    def test_heterogeneous_frame_rejected(self):
        dets = [det(0.8, (0, 0, 2, 2), frame=0), det(0.7, (0, 0, 2, 2), frame=1)]
        with pytest.raises(ValueError, match="heterogeneous frame"):
            fuse_frame(dets, 2)

    def test_k_underestimate_rejected(self):
        dets = [det(0.8, (0, 0, 2, 2), source="a"),
                det(0.7, (0, 0, 2, 2), source="b")]
        with pytest.raises(ValueError, match="K underestimates ensemble"):
            fuse_frame(dets, 1)

    def test_empty_frame(self):
        assert fuse_frame([], 3) == []


class TestFuseFrameProperties:
    N_FRAMES = 200

    def test_non_overlap_and_cardinality(self, rng):
        for _ in range(self.N_FRAMES):
            dets, k = random_frame(rng)
            out = fuse_frame(dets, k)
            assert len(out) <= len(dets)
            assert sum(f.cluster_size for f in out) == len(dets)
            for i, a in enumerate(out):
                for b in out[i + 1:]:
                    if a.class_label == b.class_label:
                        assert iou(a.box, b.box) < 0.5

    def test_permutation_invariance(self, rng):
        for _ in range(self.N_FRAMES):
            dets, k = random_frame(rng)
            baseline = fuse_frame(dets, k)
            for _ in range(5):
                shuffled = dets[:]
                rng.shuffle(shuffled)
                assert fuse_frame(shuffled, k) == baseline

    def test_idempotence(self, rng):
        for _ in range(self.N_FRAMES):
            dets, k = random_frame(rng)
            once = fuse_frame(dets, k)
            twice = fuse_frame(once, 1)
            assert [(f.box, f.class_label) for f in twice] == \
                   [(f.box, f.class_label) for f in once]
            for a, b in zip(twice, once):
                assert a.confidence == pytest.approx(b.confidence)

    def test_full_agreement_preserves_confidence(self):
        for k in (1, 2, 5):
            dets = [det(0.6, (0, 0, 4, 4), source=f"m{i}") for i in range(k)]
            [f] = fuse_frame(dets, k)
            assert f.confidence == pytest.approx(0.6)


class TestWeightUpdates:
    def test_positive_residual(self):
        w = ModelWeights(weights={"m": 1.0}, alpha=0.1)
        out = update_model_weights(w, [("m", 0.8, 1)])
        assert out.get("m") == pytest.approx(1.02)

    def test_zero_residual(self):
        w = ModelWeights(weights={"m": 1.0}, alpha=0.1)
        assert update_model_weights(w, [("m", 1.0, 1)]).get("m") == 1.0

    def test_clamped_at_zero(self):
        w = ModelWeights(weights={"m": 0.1}, alpha=0.5)
        assert update_model_weights(w, [("m", 0.9, 0)]).get("m") == 0.0

    def test_bad_label_rejected(self):
        w = ModelWeights(weights={"m": 1.0})
        with pytest.raises(ValueError):
            update_model_weights(w, [("m", 0.5, 2)])

    def test_monotone_dynamics(self):
        w = ModelWeights(weights={"m": 1.0}, alpha=0.05)
        prev = w.get("m")
        for _ in range(100):
            w = update_model_weights(w, [("m", 0.7, 1)])
            assert w.get("m") > prev
            prev = w.get("m")
        w = ModelWeights(weights={"m": 1.0}, alpha=0.05)
        prev = w.get("m")
        for _ in range(100):
            w = update_model_weights(w, [("m", 0.7, 0)])
            assert w.get("m") < prev or (prev == 0.0 and w.get("m") == 0.0)
            prev = w.get("m")


class TestEnsembleLoss:
    def test_perfect(self):
        assert ensemble_loss([(1, 1.0), (0, 0.0)]) == 0.0

    def test_half(self):
        assert ensemble_loss([(1, 0.5), (0, 0.5)]) == pytest.approx(0.5)

    def test_unit_residual(self):
        assert ensemble_loss([(1, 0.0)]) == pytest.approx(1.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no instances"):
            ensemble_loss([])


class TestWeightsFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "weights.txt"
        save_weights({"yolo-s": 0.75, "yolo-m": 1.0}, path)
        assert load_weights(path) == {"yolo-s": 0.75, "yolo-m": 1.0}

    def test_comments_ignored(self, tmp_path):
        path = tmp_path / "weights.txt"
        path.write_text("# calibrated\nm0 0.5  # trailing\n\nm1 1.25\n")
        assert load_weights(path) == {"m0": 0.5, "m1": 1.25}

    def test_bad_line_reports_number(self, tmp_path):
        path = tmp_path / "weights.txt"
        path.write_text("m0 0.5\nm1 oops\n")
        with pytest.raises(ValueError, match="line 2"):
            load_weights(path)
