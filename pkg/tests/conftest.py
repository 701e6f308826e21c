import random

import pytest

from crossguard.fusion import Detection
from crossguard.geometry import BBox
from crossguard.metrics import GroundTruthObject
from crossguard.simulator import DetectorNoise, MaskNoise, ObjectTrack, Scenario


def raster_iou(a: BBox, b: BBox) -> float:
    """Pixel-set IoU oracle for integer-coordinate boxes."""
    pa = {(x, y) for x in range(int(a.x1), int(a.x2))
          for y in range(int(a.y1), int(a.y2))}
    pb = {(x, y) for x in range(int(b.x1), int(b.x2))
          for y in range(int(b.y1), int(b.y2))}
    return len(pa & pb) / len(pa | pb)


def random_int_box(rng: random.Random, grid: int = 64) -> BBox:
    x1 = rng.randrange(0, grid - 1)
    y1 = rng.randrange(0, grid - 1)
    x2 = rng.randrange(x1 + 1, grid)
    y2 = rng.randrange(y1 + 1, grid)
    return BBox(x1, y1, x2, y2)


def random_frame(rng: random.Random, frame_id: int = 0, max_dets: int = 30,
                 k_max: int = 5) -> tuple[list[Detection], int]:
    """A random multi-source frame plus a valid ensemble size K."""
    n_sources = rng.randint(1, k_max)
    sources = [f"m{i}" for i in range(n_sources)]
    k = rng.randint(n_sources, k_max)
    classes = ["car", "bus", "truck", "person", "train"]
    dets = []
    for _ in range(rng.randint(0, max_dets)):
        box = random_int_box(rng)
        dets.append(Detection(
            frame_id, rng.choice(sources), rng.choice(classes),
            round(rng.random(), 3), box))
    return dets, k


def random_truths(rng: random.Random, n: int, frame_id: int = 0):
    classes = ["car", "bus", "truck", "person", "train"]
    return [GroundTruthObject(frame_id, rng.choice(classes),
                              random_int_box(rng)) for _ in range(n)]


def make_scenario(**overrides) -> Scenario:
    base = dict(
        frame_width=640, frame_height=480,
        roi=BBox(200, 150, 440, 330),
        track_region=BBox(240, 0, 400, 480),
        num_frames=60,
        objects=(
            ObjectTrack("car", 0, 59, BBox(0, 200, 60, 260), BBox(580, 200, 640, 260)),
        ),
        train_windows=((20, 40),),
        detector_params=DetectorNoise(
            sources=("a", "b", "c"),
            p_detect={"a": 1.0, "b": 1.0, "c": 1.0},
        ),
        mask_params=MaskNoise(0.9, 0.0, 0.1, 0.0),
        seed=7,
        mask_size=(32, 32),
    )
    base.update(overrides)
    return Scenario(**base)


def per_class_line(report_text: str, label: str) -> str:
    """The per-class metrics line for a label (after the confusion block)."""
    lines = report_text.splitlines()
    for line in lines[lines.index("") + 1:]:
        if line.startswith(label + " "):
            return line
    raise AssertionError(f"no per-class line for {label!r}")


@pytest.fixture
def rng():
    return random.Random(20260824)
