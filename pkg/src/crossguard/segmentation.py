"""Binary segmentation scoring and the two-camera train-approach signal.

Probability masks are thresholded strictly above 0.5 (0.5 exactly is
background). Scoring covers two-class mean IoU and pixel-averaged
binary cross-entropy; the approach signal is an area fraction over a
track region, OR-combined across two cameras and debounced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BBox


@dataclass(frozen=True)
class ProbMask:
    """Per-pixel object probabilities, shape (height, width), values in [0,1]."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"mask must be non-empty 2-D, got shape {arr.shape}")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("mask values out of [0,1]")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """Hard labels, shape (height, width), 1 = object/rail, 0 = background."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"mask must be non-empty 2-D, got shape {arr.shape}")
        if not np.all(np.isin(arr, (0, 1))):
            raise ValueError("binary mask values must be 0 or 1")
        object.__setattr__(self, "values", arr.astype(np.uint8))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class TrainSignalState:
    """Debounced train-approach signal with consecutive-frame counters."""

    on_count: int = 0
    off_count: int = 0
    asserted: bool = False


def threshold_mask(m: ProbMask) -> BinaryMask:
    """Hard-label a probability mask: object iff value > 0.5 (strict)."""
    return BinaryMask(values=(m.values > 0.5).astype(np.uint8))


def binary_to_prob(m: BinaryMask) -> ProbMask:
    """Embed hard labels as probabilities (0 -> 0.0, 1 -> 1.0)."""
    return ProbMask(values=m.values.astype(np.float64))


def mask_mean_iou(pred: BinaryMask, truth: BinaryMask) -> float:
    """Mean of per-class IoU over {object, background}.

    A class absent from both masks contributes IoU 1 (vacuous agreement).
    """
    if pred.values.shape != truth.values.shape:
        raise ValueError(
            f"dimension mismatch: {pred.values.shape} vs {truth.values.shape}"
        )
    ious = []
    for cls in (1, 0):
        p = pred.values == cls
        t = truth.values == cls
        union = np.count_nonzero(p | t)
        if union == 0:
            ious.append(1.0)
        else:
            ious.append(np.count_nonzero(p & t) / union)
    return float(np.mean(ious))


def bce_loss(truth: BinaryMask, pred: ProbMask, eps: float = 1e-7) -> float:
    """Pixel-averaged binary cross-entropy, predictions clamped to [eps, 1-eps]."""
    if pred.values.shape != truth.values.shape:
        raise ValueError(
            f"dimension mismatch: {pred.values.shape} vs {truth.values.shape}"
        )
    y = truth.values.astype(np.float64)
    p = np.clip(pred.values, eps, 1.0 - eps)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def _region_pixel_mask(m: ProbMask, region: BBox) -> np.ndarray:
    cols = np.arange(m.width) + 0.5
    rows = np.arange(m.height) + 0.5
    in_x = (cols >= region.x1) & (cols <= region.x2)
    in_y = (rows >= region.y1) & (rows <= region.y2)
    return np.outer(in_y, in_x)


def train_presence_score(m: ProbMask, track_region: BBox) -> float:
    """Fraction of region pixels (by center) labelled object after thresholding."""
    inside = _region_pixel_mask(m, track_region)
    n = np.count_nonzero(inside)
    if n == 0:
        raise ValueError("region outside mask extent: no pixel centers inside")
    bits = threshold_mask(m).values
    return float(np.count_nonzero(bits[inside]) / n)


def update_train_signal(
    state: TrainSignalState,
    score_cam1: float,
    score_cam2: float,
    score_threshold: float,
    n_on: int,
    n_off: int,
) -> TrainSignalState:
    """Advance the debounced signal by one frame.

    Raw signal is true when either camera's score reaches the
    threshold. Assertion flips on after n_on consecutive raw-true
    frames and off after n_off consecutive raw-false frames.
    """
    if not 0.0 <= score_threshold <= 1.0:
        raise ValueError(f"score_threshold out of [0,1]: {score_threshold}")
    if n_on < 1 or n_off < 1:
        raise ValueError("debounce counts must be positive")
    raw = score_cam1 >= score_threshold or score_cam2 >= score_threshold
    if raw:
        on_count, off_count = state.on_count + 1, 0
    else:
        on_count, off_count = 0, state.off_count + 1
    asserted = state.asserted
    if not asserted and on_count >= n_on:
        asserted = True
    elif asserted and off_count >= n_off:
        asserted = False
    return TrainSignalState(on_count=on_count, off_count=off_count,
                            asserted=asserted)


def _read_mask_grid(path) -> np.ndarray:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines) and (not lines[i].strip() or lines[i].lstrip().startswith("#")):
        i += 1
    if i == len(lines):
        raise ValueError(f"{path}: missing PMASK header")
    header = lines[i].split()
    if len(header) != 3 or header[0] != "PMASK":
        raise ValueError(f"{path}: bad header {lines[i]!r}")
    width, height = int(header[1]), int(header[2])
    if width < 1 or height < 1:
        raise ValueError(f"{path}: bad dimensions {width}x{height}")
    rows = lines[i + 1 : i + 1 + height]
    if len(rows) < height:
        raise ValueError(f"{path}: expected {height} data rows, got {len(rows)}")
    grid = np.empty((height, width), dtype=np.float64)
    for r, line in enumerate(rows):
        vals = line.split()
        if len(vals) != width:
            raise ValueError(f"{path}: row {r} has {len(vals)} values, expected {width}")
        grid[r] = [float(v) for v in vals]
    return grid


def read_prob_mask(path) -> ProbMask:
    return ProbMask(values=_read_mask_grid(path))


def read_binary_mask(path) -> BinaryMask:
    grid = _read_mask_grid(path)
    if not np.all(np.isin(grid, (0.0, 1.0))):
        raise ValueError(f"{path}: not a binary mask")
    return BinaryMask(values=grid.astype(np.uint8))


def write_mask(mask: ProbMask | BinaryMask, path) -> None:
    """Write the ASCII mask format; probabilities at 6 decimals, bits as ints."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"PMASK {mask.width} {mask.height}\n")
        if isinstance(mask, BinaryMask):
            for row in mask.values:
                fh.write(" ".join(str(int(v)) for v in row) + "\n")
        else:
            for row in mask.values:
                fh.write(" ".join(f"{v:.6f}" for v in row) + "\n")
