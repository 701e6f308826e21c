import dataclasses

import numpy as np
import pytest

from crossguard.controller import Action
from crossguard.fusion import Detection
from crossguard.geometry import BBox, iou
from crossguard.segmentation import threshold_mask, train_presence_score
from crossguard.simulator import (
    DetectorNoise,
    MaskNoise,
    ObjectTrack,
    Scenario,
    ground_truth_at,
    load_scenario,
    mask_track_region,
    parse_scenario,
    run_simulation,
    simulate_detections,
    simulate_masks,
)

from conftest import make_scenario, per_class_line


class TestGroundTruthAt:
    def test_before_track_start(self):
        s = make_scenario(objects=(
            ObjectTrack("car", 10, 20, BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)),))
        assert ground_truth_at(s, 5) == []

    def test_linear_interpolation(self):
        s = make_scenario(objects=(
            ObjectTrack("car", 0, 10, BBox(0, 0, 10, 10), BBox(100, 0, 110, 10)),))
        [g] = ground_truth_at(s, 5)
        assert g.box == BBox(50, 0, 60, 10)

    def test_stationary_track(self):
        s = make_scenario(objects=(
            ObjectTrack("car", 0, 59, BBox(5, 5, 15, 15), BBox(5, 5, 15, 15)),))
        boxes = {ground_truth_at(s, t)[0].box for t in range(60)}
        assert boxes == {BBox(5, 5, 15, 15)}

    def test_clipping_drops_degenerate(self):
        s = make_scenario(objects=(
            ObjectTrack("car", 0, 10, BBox(-50, 0, -10, 10), BBox(700, 0, 740, 10)),))
        assert ground_truth_at(s, 0) == []  # entirely left of frame

    def test_out_of_range_tick(self):
        with pytest.raises(ValueError, match="out of range"):
            ground_truth_at(make_scenario(), 60)


class TestSimulateDetections:
    def test_zero_noise_identity(self):
        s = make_scenario(detector_params=DetectorNoise(
            sources=("a",), p_detect={"a": 1.0}))
        gt = ground_truth_at(s, 5)
        dets = simulate_detections(s, 5)
        assert [d.box for d in dets] == [g.box for g in gt]
        assert all(0.7 <= d.confidence <= 0.95 for d in dets)

    def test_p_zero_no_detections(self):
        s = make_scenario(detector_params=DetectorNoise(
            sources=("a",), p_detect={"a": 0.0}))
        assert simulate_detections(s, 5) == []

    def test_false_positive_rate(self):
        s = make_scenario(
            num_frames=2000, objects=(),
            detector_params=DetectorNoise(
                sources=("a",), p_detect={"a": 1.0}, fp_rate_lambda=2.0))
        counts = [len(simulate_detections(s, t)) for t in range(2000)]
        assert 1.9 <= np.mean(counts) <= 2.1

    def test_tick_regeneration_is_reproducible(self):
        s = make_scenario(detector_params=DetectorNoise(
            sources=("a", "b"), p_detect={"a": 0.8, "b": 0.8},
            box_jitter_sigma=2.0, fp_rate_lambda=1.0))
        assert simulate_detections(s, 17) == simulate_detections(s, 17)

    def test_jitter_degrades_localization(self):
        mean_ious = []
        for sigma in (0.0, 2.0, 5.0):
            s = make_scenario(detector_params=DetectorNoise(
                sources=("a",), p_detect={"a": 1.0}, box_jitter_sigma=sigma))
            vals = []
            for t in range(60):
                gt = {g.box for g in ground_truth_at(s, t)}
                for d in simulate_detections(s, t):
                    vals.append(max(iou(d.box, g) for g in gt))
            mean_ious.append(np.mean(vals))
        assert mean_ious[0] > mean_ious[1] > mean_ious[2]


class TestSimulateMasks:
    def test_object_pixels_during_window(self):
        s = make_scenario(mask_params=MaskNoise(0.9, 0.0, 0.1, 0.0))
        m1, _ = simulate_masks(s, 25)  # inside train window
        region = mask_track_region(s)
        assert train_presence_score(m1, region) == 1.0

    def test_background_outside_window(self):
        s = make_scenario(mask_params=MaskNoise(0.9, 0.0, 0.1, 0.0))
        m1, m2 = simulate_masks(s, 5)
        region = mask_track_region(s)
        assert train_presence_score(m1, region) == 0.0
        assert not threshold_mask(m2).values.any()

    def test_cameras_draw_independently(self):
        s = make_scenario(mask_params=MaskNoise(0.9, 0.05, 0.1, 0.05))
        m1, m2 = simulate_masks(s, 25)
        assert not np.array_equal(m1.values, m2.values)

    def test_deterministic(self):
        s = make_scenario(mask_params=MaskNoise(0.9, 0.05, 0.1, 0.05))
        a1, a2 = simulate_masks(s, 25)
        b1, b2 = simulate_masks(s, 25)
        assert np.array_equal(a1.values, b1.values)
        assert np.array_equal(a2.values, b2.values)


class TestRunSimulation:
    def test_zero_noise_perfect_metrics(self):
        art = run_simulation(make_scenario())
        parts = per_class_line(art.report, "car").split()
        assert float(parts[4]) == 1.0 and float(parts[5]) == 1.0

    def test_canonical_event_sequence(self):
        # car crosses below the ROI; one lower/raise pair for the train window
        s = make_scenario(objects=(
            ObjectTrack("car", 0, 59, BBox(0, 400, 60, 460), BBox(580, 400, 640, 460)),))
        art = run_simulation(s)
        actions = [e.action for e in art.events if e.action is not Action.NONE]
        assert actions == [Action.LOWER_BAR, Action.RAISE_BAR]

    def test_warning_when_roi_occupied_during_window(self):
        s = make_scenario(objects=(
            ObjectTrack("car", 0, 59, BBox(250, 200, 310, 260), BBox(250, 200, 310, 260)),))
        art = run_simulation(s)
        actions = [e.action for e in art.events if e.action is not Action.NONE]
        assert Action.BROADCAST_WARNING in actions
        assert Action.LOWER_BAR not in actions

    def test_artifact_files_round_trip(self, tmp_path):
        from crossguard import logs
        from crossguard.segmentation import read_prob_mask

        s = make_scenario(num_frames=5, train_windows=((1, 4),))
        art = run_simulation(s, out_dir=tmp_path)
        gt = [r for r in logs.load_detection_log(tmp_path / "gt.log")]
        assert len(gt) == len(art.ground_truth)
        fused = logs.load_detection_log(tmp_path / "fused.log")
        assert len(fused) == len(art.fused)
        sig = logs.load_signals(tmp_path / "signals.txt")
        assert [t for t, _, _ in sig] == list(range(5))
        mask = read_prob_mask(tmp_path / "masks" / "t00000_cam1.pmask")
        assert mask.width == 32

    def test_byte_identical_reruns(self, tmp_path):
        s = make_scenario(num_frames=8, train_windows=((2, 6),),
                          detector_params=DetectorNoise(
            sources=("a", "b"), p_detect={"a": 0.9, "b": 0.9},
            box_jitter_sigma=1.5, fp_rate_lambda=0.5),
            mask_params=MaskNoise(0.9, 0.05, 0.1, 0.05))
        run_simulation(s, out_dir=tmp_path / "one")
        run_simulation(s, out_dir=tmp_path / "two")
        for name in ("gt.log", "detections.log", "fused.log", "signals.txt",
                     "events.log", "report.txt"):
            assert (tmp_path / "one" / name).read_bytes() == \
                (tmp_path / "two" / name).read_bytes()


SCENARIO_TEXT = """\
# minimal crossing scenario
frame = 640 480
roi = 200 150 440 330
track_region = 240 0 400 480
frames = 30
seed = 11
train_window = 5 20
object = car 0 0 200 60 260 29 580 200 640 260
source = a 1.0
source = b 0.9
jitter_sigma = 1.0
fp_lambda = 0.2
tp_conf = 0.7 0.95
fp_conf = 0.1 0.5
mask_obj = 0.9 0.02
mask_bg = 0.1 0.02
score_threshold = 0.1
n_on = 3
n_off = 5
min_confidence = 0.25
"""


class TestScenarioParsing:
    def test_full_parse(self):
        s = parse_scenario(SCENARIO_TEXT)
        assert s.frame_width == 640
        assert s.roi == BBox(200, 150, 440, 330)
        assert s.train_windows == ((5, 20),)
        assert s.detector_params.sources == ("a", "b")
        assert s.detector_params.p_detect["b"] == 0.9
        assert s.n_off == 5
        assert len(s.objects) == 1

    def test_missing_roi_names_key(self):
        text = "\n".join(l for l in SCENARIO_TEXT.splitlines()
                         if not l.startswith("roi"))
        with pytest.raises(ValueError, match="roi"):
            parse_scenario(text)

    def test_missing_source_rejected(self):
        text = "\n".join(l for l in SCENARIO_TEXT.splitlines()
                         if not l.startswith("source"))
        with pytest.raises(ValueError, match="source"):
            parse_scenario(text)

    def test_bad_arity_names_key(self):
        with pytest.raises(ValueError, match="train_window"):
            parse_scenario(SCENARIO_TEXT + "train_window = 3\n")

    def test_load(self, tmp_path):
        path = tmp_path / "scenario.txt"
        path.write_text(SCENARIO_TEXT)
        assert load_scenario(path) == parse_scenario(SCENARIO_TEXT)
