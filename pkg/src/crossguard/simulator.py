"""Deterministic synthetic crossing scenarios.

A scenario holds linear object trajectories, a train schedule, and
noise parameters for K simulated detectors and two track cameras. All
randomness derives from (seed, tick, stream) so any tick regenerates
identically in isolation; identical scenario + seed gives byte-equal
output artifacts.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import controller, fusion, logs, metrics, segmentation
from .controller import ControllerConfig, ControlEvent, CrossingState, TickInput
from .fusion import Detection, FusedDetection, KNOWN_CLASSES, ModelWeights
from .geometry import BBox
from .metrics import ConfusionMatrix, GroundTruthObject
from .segmentation import ProbMask


@dataclass(frozen=True)
class ObjectTrack:
    """Linear motion between two keyframe boxes; present on [start, end]."""

    class_label: str
    start_tick: int
    end_tick: int
    start_box: BBox
    end_box: BBox

    def __post_init__(self) -> None:
        if self.class_label not in KNOWN_CLASSES:
            raise ValueError(f"unregistered class: {self.class_label!r}")
        if self.end_tick < self.start_tick:
            raise ValueError("end_tick before start_tick")

    def box_at(self, tick: int) -> Optional[BBox]:
        if tick < self.start_tick or tick > self.end_tick:
            return None
        if self.end_tick == self.start_tick:
            return self.start_box
        t = (tick - self.start_tick) / (self.end_tick - self.start_tick)
        a, b = self.start_box, self.end_box
        return BBox(
            a.x1 + t * (b.x1 - a.x1), a.y1 + t * (b.y1 - a.y1),
            a.x2 + t * (b.x2 - a.x2), a.y2 + t * (b.y2 - a.y2),
        )


@dataclass(frozen=True)
class DetectorNoise:
    sources: tuple[str, ...]
    p_detect: dict[str, float]
    box_jitter_sigma: float = 0.0
    tp_conf_range: tuple[float, float] = (0.7, 0.95)
    fp_rate_lambda: float = 0.0
    fp_conf_range: tuple[float, float] = (0.1, 0.5)

    def __post_init__(self) -> None:
        if not self.sources:
            raise ValueError("need at least one detector source")
        for s in self.sources:
            p = self.p_detect.get(s)
            if p is None or not 0.0 <= p <= 1.0:
                raise ValueError(f"bad p_detect for source {s!r}: {p}")
        for lo, hi in (self.tp_conf_range, self.fp_conf_range):
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"bad confidence range ({lo}, {hi})")
        if self.box_jitter_sigma < 0.0 or self.fp_rate_lambda < 0.0:
            raise ValueError("sigma and lambda must be non-negative")


@dataclass(frozen=True)
class MaskNoise:
    object_prob_mean: float = 0.9
    object_prob_sigma: float = 0.05
    background_prob_mean: float = 0.1
    background_prob_sigma: float = 0.05

    def __post_init__(self) -> None:
        for mean in (self.object_prob_mean, self.background_prob_mean):
            if not 0.0 <= mean <= 1.0:
                raise ValueError(f"mask mean out of [0,1]: {mean}")
        for sigma in (self.object_prob_sigma, self.background_prob_sigma):
            if sigma < 0.0:
                raise ValueError(f"negative mask sigma: {sigma}")


@dataclass(frozen=True)
class Scenario:
    frame_width: int
    frame_height: int
    roi: BBox
    track_region: BBox
    num_frames: int
    objects: tuple[ObjectTrack, ...]
    train_windows: tuple[tuple[int, int], ...]
    detector_params: DetectorNoise
    mask_params: MaskNoise = field(default_factory=MaskNoise)
    seed: int = 0
    mask_size: tuple[int, int] = (64, 64)
    score_threshold: float = 0.10
    n_on: int = 3
    n_off: int = 5
    min_confidence: float = 0.25
    iou_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.frame_width < 1 or self.frame_height < 1:
            raise ValueError("frame dimensions must be positive")
        if self.num_frames < 1:
            raise ValueError("num_frames must be positive")
        frame = BBox(0, 0, self.frame_width, self.frame_height)
        for name, box in (("roi", self.roi), ("track_region", self.track_region)):
            if not (0 <= box.x1 and box.x2 <= self.frame_width
                    and 0 <= box.y1 and box.y2 <= self.frame_height):
                raise ValueError(f"{name} outside frame extent")
        for start, end in self.train_windows:
            if not 0 <= start < end <= self.num_frames:
                raise ValueError(f"bad train window [{start}, {end})")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")

    def controller_config(self) -> ControllerConfig:
        return ControllerConfig(
            score_threshold=self.score_threshold, n_on=self.n_on,
            n_off=self.n_off, min_confidence=self.min_confidence)

    def train_active(self, tick: int) -> bool:
        return any(start <= tick < end for start, end in self.train_windows)


def _rng(seed: int, tick: int, stream: str) -> np.random.Generator:
    digest = hashlib.blake2b(stream.encode(), digest_size=8).digest()
    entropy = [seed, tick, int.from_bytes(digest, "big")]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def ground_truth_at(scenario: Scenario, tick: int) -> list[GroundTruthObject]:
    """Interpolated boxes of all present tracks, clipped to the frame."""
    if not 0 <= tick < scenario.num_frames:
        raise ValueError(f"tick out of range: {tick}")
    truths: list[GroundTruthObject] = []
    for track in scenario.objects:
        box = track.box_at(tick)
        if box is None:
            continue
        x1 = max(0.0, box.x1)
        y1 = max(0.0, box.y1)
        x2 = min(float(scenario.frame_width), box.x2)
        y2 = min(float(scenario.frame_height), box.y2)
        if x1 >= x2 or y1 >= y2:
            continue
        truths.append(GroundTruthObject(tick, track.class_label,
                                        BBox(x1, y1, x2, y2)))
    return truths


def _jittered_box(box: BBox, sigma: float, rng: np.random.Generator,
                  width: int, height: int) -> Optional[BBox]:
    x1, y1, x2, y2 = box.as_tuple()
    if sigma > 0.0:
        dx1, dy1, dx2, dy2 = rng.normal(0.0, sigma, 4)
        x1, y1, x2, y2 = x1 + dx1, y1 + dy1, x2 + dx2, y2 + dy2
    x1, x2 = min(x1, x2), max(x1, x2)
    y1, y2 = min(y1, y2), max(y1, y2)
    x1, x2 = max(0.0, x1), min(float(width), x2)
    y1, y2 = max(0.0, y1), min(float(height), y2)
    if x2 - x1 < 1.0 or y2 - y1 < 1.0:
        return None  # collapsed under jitter: counts as a miss
    return BBox(x1, y1, x2, y2)


def simulate_detections(scenario: Scenario, tick: int) -> list[Detection]:
    """Noisy per-source detections for one tick, reproducible in isolation."""
    truths = ground_truth_at(scenario, tick)
    noise = scenario.detector_params
    classes = sorted(KNOWN_CLASSES)
    dets: list[Detection] = []
    for source in noise.sources:
        rng = _rng(scenario.seed, tick, f"det:{source}")
        p = noise.p_detect[source]
        for truth in truths:
            if rng.random() >= p:
                continue
            box = _jittered_box(truth.box, noise.box_jitter_sigma, rng,
                                scenario.frame_width, scenario.frame_height)
            conf = rng.uniform(*noise.tp_conf_range)
            if box is None:
                continue
            dets.append(Detection(tick, source, truth.class_label, conf, box))
        for _ in range(rng.poisson(noise.fp_rate_lambda)):
            x1 = rng.uniform(0.0, scenario.frame_width - 1.0)
            y1 = rng.uniform(0.0, scenario.frame_height - 1.0)
            w = rng.uniform(1.0, scenario.frame_width - x1)
            h = rng.uniform(1.0, scenario.frame_height - y1)
            label = classes[rng.integers(len(classes))]
            conf = rng.uniform(*noise.fp_conf_range)
            dets.append(Detection(tick, source, label, conf,
                                  BBox(x1, y1, x1 + w, y1 + h)))
    return dets


def mask_track_region(scenario: Scenario) -> BBox:
    """The track region mapped from frame coordinates into mask pixels."""
    mw, mh = scenario.mask_size
    sx = mw / scenario.frame_width
    sy = mh / scenario.frame_height
    r = scenario.track_region
    return BBox(r.x1 * sx, r.y1 * sy, r.x2 * sx, r.y2 * sy)


def simulate_masks(scenario: Scenario, tick: int) -> tuple[ProbMask, ProbMask]:
    """Synthetic track-camera probability masks for both cameras at one tick."""
    if not 0 <= tick < scenario.num_frames:
        raise ValueError(f"tick out of range: {tick}")
    mw, mh = scenario.mask_size
    region = mask_track_region(scenario)
    cols = np.arange(mw) + 0.5
    rows = np.arange(mh) + 0.5
    inside = np.outer((rows >= region.y1) & (rows <= region.y2),
                      (cols >= region.x1) & (cols <= region.x2))
    active = scenario.train_active(tick)
    mp = scenario.mask_params
    masks = []
    for cam in (1, 2):
        rng = _rng(scenario.seed, tick, f"mask:cam{cam}")
        grid = rng.normal(mp.background_prob_mean, mp.background_prob_sigma,
                          (mh, mw))
        if active:
            obj = rng.normal(mp.object_prob_mean, mp.object_prob_sigma, (mh, mw))
            grid = np.where(inside, obj, grid)
        masks.append(ProbMask(values=np.clip(grid, 0.0, 1.0)))
    return masks[0], masks[1]


@dataclass(frozen=True)
class TickTrace:
    """Per-tick observability for invariant checking."""

    tick: int
    train_asserted: bool
    roi_clear: bool
    mode: controller.Mode
    bar: controller.Bar
    cms_active: bool


@dataclass
class EpisodeArtifacts:
    ground_truth: list[GroundTruthObject]
    detections: list[Detection]
    fused: list[FusedDetection]
    signals: list[tuple[int, float, float]]
    events: list[ControlEvent]
    trace: list[TickTrace]
    final_state: CrossingState
    confusion: ConfusionMatrix
    report: str


def run_simulation(scenario: Scenario,
                   config: Optional[ControllerConfig] = None,
                   weights: Optional[ModelWeights] = None,
                   out_dir=None) -> EpisodeArtifacts:
    """Drive the whole pipeline over one scenario.

    Per tick: ground truth, noisy detections, optional calibration,
    fusion, mask scoring, and one controller step. Artifacts are
    written under out_dir when given (gt.log, detections.log,
    fused.log, signals.txt, events.log, report.txt, masks/).
    """
    config = config or scenario.controller_config()
    k = len(scenario.detector_params.sources)
    region = mask_track_region(scenario)

    all_gt: list[GroundTruthObject] = []
    all_dets: list[Detection] = []
    all_fused: list[FusedDetection] = []
    signals: list[tuple[int, float, float]] = []
    events: list[ControlEvent] = []
    trace: list[TickTrace] = []
    state = CrossingState()

    mask_dir = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        mask_dir = os.path.join(out_dir, "masks")
        os.makedirs(mask_dir, exist_ok=True)

    for tick in range(scenario.num_frames):
        gt = ground_truth_at(scenario, tick)
        dets = simulate_detections(scenario, tick)
        if weights is not None:
            dets = [fusion.calibrate_confidence(d, weights) for d in dets]
        fused = fusion.fuse_frame(dets, k, scenario.iou_threshold)
        m1, m2 = simulate_masks(scenario, tick)
        s1 = segmentation.train_presence_score(m1, region)
        s2 = segmentation.train_presence_score(m2, region)
        clear = controller.roi_is_clear(fused, scenario.roi,
                                        config.min_confidence)
        state, tick_events = controller.step(
            state, TickInput(s1, s2, fused, scenario.roi), config)

        all_gt.extend(gt)
        all_dets.extend(dets)
        all_fused.extend(fused)
        signals.append((tick, s1, s2))
        events.extend(tick_events)
        trace.append(TickTrace(tick, state.train_signal.asserted, clear,
                               state.mode, state.bar, state.cms_active))
        if mask_dir is not None:
            segmentation.write_mask(
                m1, os.path.join(mask_dir, f"t{tick:05d}_cam1.pmask"))
            segmentation.write_mask(
                m2, os.path.join(mask_dir, f"t{tick:05d}_cam2.pmask"))

    confusion = metrics.evaluate_detections(all_fused, all_gt,
                                            scenario.iou_threshold)
    report = metrics.render_report(confusion, all_fused, all_gt,
                                   scenario.iou_threshold)
    artifacts = EpisodeArtifacts(
        ground_truth=all_gt, detections=all_dets, fused=all_fused,
        signals=signals, events=events, trace=trace, final_state=state,
        confusion=confusion, report=report)

    if out_dir is not None:
        logs.save_detection_log(all_gt, os.path.join(out_dir, "gt.log"))
        logs.save_detection_log(all_dets, os.path.join(out_dir, "detections.log"))
        logs.save_detection_log(all_fused, os.path.join(out_dir, "fused.log"))
        logs.save_signals(signals, os.path.join(out_dir, "signals.txt"))
        with open(os.path.join(out_dir, "events.log"), "w", encoding="ascii") as fh:
            for e in events:
                fh.write(controller.render_event(e) + "\n")
        with open(os.path.join(out_dir, "report.txt"), "w", encoding="ascii") as fh:
            fh.write(report)
    return artifacts


_REQUIRED_KEYS = ("frame", "roi", "track_region", "frames", "seed")


def parse_scenario(text: str) -> Scenario:
    """Parse the `key = value` scenario format (lists as repeated keys)."""
    single: dict[str, list[str]] = {}
    objects: list[ObjectTrack] = []
    windows: list[tuple[int, int]] = []
    sources: list[tuple[str, float]] = []

    def fail(key: str, detail: str):
        raise ValueError(f"scenario key {key!r}: {detail}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected `key = value`, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        parts = value.split()
        try:
            if key == "object":
                if len(parts) != 11:
                    fail(key, "needs class t0 x1 y1 x2 y2 t1 x1 y1 x2 y2")
                label = parts[0]
                t0, t1 = int(parts[1]), int(parts[6])
                b0 = BBox(*(float(v) for v in parts[2:6]))
                b1 = BBox(*(float(v) for v in parts[7:11]))
                objects.append(ObjectTrack(label, t0, t1, b0, b1))
            elif key == "train_window":
                if len(parts) != 2:
                    fail(key, "needs start end")
                windows.append((int(parts[0]), int(parts[1])))
            elif key == "source":
                if len(parts) != 2:
                    fail(key, "needs id p_detect")
                sources.append((parts[0], float(parts[1])))
            else:
                single[key] = parts
        except (ValueError, TypeError) as exc:
            if "scenario key" in str(exc):
                raise
            fail(key, str(exc))

    for key in _REQUIRED_KEYS:
        if key not in single:
            raise ValueError(f"missing required scenario key: {key}")
    if not sources:
        raise ValueError("missing required scenario key: source")

    def get(key: str, arity: int, default=None) -> Optional[list[str]]:
        if key not in single:
            return default
        parts = single[key]
        if len(parts) != arity:
            fail(key, f"expected {arity} values, got {len(parts)}")
        return parts

    def get_floats(key: str, arity: int, default=None):
        parts = get(key, arity)
        if parts is None:
            return default
        return [float(v) for v in parts]

    try:
        fw, fh = (int(v) for v in get("frame", 2))
        roi = BBox(*get_floats("roi", 4))
        track_region = BBox(*get_floats("track_region", 4))
        num_frames = int(get("frames", 1)[0])
        seed = int(get("seed", 1)[0])
        mask_size = tuple(int(v) for v in (get("mask_size", 2) or (64, 64)))
        noise = DetectorNoise(
            sources=tuple(s for s, _ in sources),
            p_detect={s: p for s, p in sources},
            box_jitter_sigma=get_floats("jitter_sigma", 1, [0.0])[0],
            tp_conf_range=tuple(get_floats("tp_conf", 2, [0.7, 0.95])),
            fp_rate_lambda=get_floats("fp_lambda", 1, [0.0])[0],
            fp_conf_range=tuple(get_floats("fp_conf", 2, [0.1, 0.5])),
        )
        mask_obj = get_floats("mask_obj", 2, [0.9, 0.05])
        mask_bg = get_floats("mask_bg", 2, [0.1, 0.05])
        return Scenario(
            frame_width=fw, frame_height=fh, roi=roi,
            track_region=track_region, num_frames=num_frames,
            objects=tuple(objects), train_windows=tuple(windows),
            detector_params=noise,
            mask_params=MaskNoise(mask_obj[0], mask_obj[1],
                                  mask_bg[0], mask_bg[1]),
            seed=seed, mask_size=mask_size,
            score_threshold=get_floats("score_threshold", 1, [0.10])[0],
            n_on=int(get("n_on", 1, ["3"])[0]),
            n_off=int(get("n_off", 1, ["5"])[0]),
            min_confidence=get_floats("min_confidence", 1, [0.25])[0],
            iou_threshold=get_floats("iou_threshold", 1, [0.5])[0],
        )
    except ValueError as exc:
        if "scenario key" in str(exc) or "missing required" in str(exc):
            raise
        raise ValueError(f"bad scenario: {exc}") from exc


def load_scenario(path) -> Scenario:
    with open(path, encoding="ascii") as fh:
        return parse_scenario(fh.read())
