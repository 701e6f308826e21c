"""Multi-detector ensemble fusion.

Merges per-frame detections from K detector sources into one consensus
set by greedy NMS-style clustering with confidence-weighted box
averaging, plus per-source confidence calibration (a clamped
delta-rule weight update) and a squared-error ensemble loss report.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .geometry import BBox, iou

# Extensible class registry; add labels via register_class().
KNOWN_CLASSES: set[str] = {"car", "bus", "truck", "person", "train"}

ENSEMBLE_SOURCE = "ensemble"


def register_class(label: str) -> None:
    if not label or any(c.isspace() for c in label):
        raise ValueError(f"bad class label: {label!r}")
    KNOWN_CLASSES.add(label)


@dataclass(frozen=True)
class Detection:
    """One classified, scored bounding box from one detector in one frame."""

    frame_id: int
    source_id: str
    class_label: str
    confidence: float
    box: BBox

    def __post_init__(self) -> None:
        if self.frame_id < 0:
            raise ValueError(f"negative frame_id: {self.frame_id}")
        if not self.source_id or any(c.isspace() for c in self.source_id):
            raise ValueError(f"bad source_id: {self.source_id!r}")
        if self.class_label not in KNOWN_CLASSES:
            raise ValueError(f"unregistered class: {self.class_label!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0,1]: {self.confidence}")


@dataclass(frozen=True)
class FusedDetection:
    """Consensus detection emitted by fuse_frame for one cluster."""

    frame_id: int
    class_label: str
    confidence: float
    box: BBox
    contributing_sources: frozenset[str]
    cluster_size: int

    source_id = ENSEMBLE_SOURCE

    def __post_init__(self) -> None:
        if self.cluster_size < 1:
            raise ValueError("cluster_size must be >= 1")
        if not self.contributing_sources:
            raise ValueError("contributing_sources must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0,1]: {self.confidence}")


@dataclass(frozen=True)
class ModelWeights:
    """Per-source multiplicative calibration scalars and a learning rate."""

    weights: dict[str, float]
    alpha: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha out of (0,1]: {self.alpha}")
        for source, w in self.weights.items():
            if w < 0.0:
                raise ValueError(f"negative weight for {source}: {w}")

    def get(self, source_id: str) -> float:
        return self.weights.get(source_id, 1.0)


def calibrate_confidence(d: Detection, w: ModelWeights) -> Detection:
    """Scale the detection's confidence by its source weight, clamped to [0,1]."""
    scaled = min(1.0, max(0.0, w.get(d.source_id) * d.confidence))
    return replace(d, confidence=scaled)


def _sort_key(d):
    return (-d.confidence, d.source_id, d.box.as_tuple())


def _merge_cluster(members: Sequence, k: int, frame_id: int,
                   class_label: str) -> FusedDetection:
    confs = [m.confidence for m in members]
    total = sum(confs)
    if total > 0.0:
        weights = [c / total for c in confs]
    else:
        weights = [1.0 / len(members)] * len(members)
    x1 = sum(w * m.box.x1 for w, m in zip(weights, members))
    y1 = sum(w * m.box.y1 for w, m in zip(weights, members))
    x2 = sum(w * m.box.x2 for w, m in zip(weights, members))
    y2 = sum(w * m.box.y2 for w, m in zip(weights, members))
    sources = frozenset(m.source_id for m in members)
    confidence = (total / len(members)) * (len(sources) / k)
    return FusedDetection(
        frame_id=frame_id,
        class_label=class_label,
        confidence=min(1.0, max(0.0, confidence)),
        box=BBox(x1, y1, x2, y2),
        contributing_sources=sources,
        cluster_size=len(members),
    )


def fuse_frame(dets: Sequence, k: int,
               iou_threshold: float = 0.5) -> list[FusedDetection]:
    """Greedy per-class clustering of one frame's detections.

    Highest-confidence remaining detection seeds a cluster and absorbs
    every same-class detection with IoU >= iou_threshold against the
    seed. Each cluster becomes one FusedDetection with
    confidence-weighted mean coordinates and confidence
    mean(confidences) * (distinct sources / k). Because averaged boxes
    can drift into overlap, clusters whose merged boxes still meet the
    threshold are re-merged (stats always recomputed from the original
    members) until no same-class output pair reaches it. Deterministic
    under input permutation via total tie-breaking.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold out of (0,1): {iou_threshold}")
    if k < 1:
        raise ValueError(f"k must be positive: {k}")
    dets = list(dets)
    frames = {d.frame_id for d in dets}
    if len(frames) > 1:
        raise ValueError(f"heterogeneous frame: {sorted(frames)}")
    sources = {d.source_id for d in dets}
    if k < len(sources):
        raise ValueError(
            f"K underestimates ensemble: k={k} < {len(sources)} sources"
        )

    by_class: dict[str, list] = {}
    for d in dets:
        by_class.setdefault(d.class_label, []).append(d)

    fused: list[FusedDetection] = []
    for label in sorted(by_class):
        clusters: list[list] = []
        pool = sorted(by_class[label], key=_sort_key)
        while pool:
            seed = pool[0]
            clusters.append(
                [d for d in pool if iou(seed.box, d.box) >= iou_threshold])
            pool = [d for d in pool if iou(seed.box, d.box) < iou_threshold]
        frame_id = clusters[0][0].frame_id
        while True:
            reps = [_merge_cluster(c, k, frame_id, label) for c in clusters]
            order = sorted(range(len(reps)),
                           key=lambda i: (-reps[i].confidence,
                                          reps[i].box.as_tuple()))
            used = [False] * len(reps)
            regrouped: list[list] = []
            changed = False
            for i in order:
                if used[i]:
                    continue
                group = [j for j in order if not used[j]
                         and iou(reps[i].box, reps[j].box) >= iou_threshold]
                for j in group:
                    used[j] = True
                changed = changed or len(group) > 1
                regrouped.append([m for j in group for m in clusters[j]])
            if not changed:
                fused.extend(reps)
                break
            clusters = regrouped
    fused.sort(key=lambda f: (-f.confidence, f.class_label, f.box.as_tuple()))
    return fused


def update_model_weights(
    w: ModelWeights,
    matches: Iterable[tuple[str, float, int]],
) -> ModelWeights:
    """Apply the delta-rule update w[s] += alpha * (y - confidence), clamped at 0.

    `matches` are (source_id, confidence, y) with y in {0, 1}; updates
    are applied sequentially in input order.
    """
    new = dict(w.weights)
    for source_id, confidence, y in matches:
        if y not in (0, 1):
            raise ValueError(f"y must be 0 or 1, got {y!r}")
        old = new.get(source_id, 1.0)
        new[source_id] = max(0.0, old + w.alpha * (y - confidence))
    return ModelWeights(weights=new, alpha=w.alpha)


def ensemble_loss(pairs: Sequence[tuple[int, float]]) -> float:
    """Sum of squared residuals between match labels and fused confidences."""
    if not pairs:
        raise ValueError("no instances")
    return sum((y - conf) ** 2 for y, conf in pairs)


def load_weights(path) -> dict[str, float]:
    """Read a weights file: one `<source_id> <weight>` per line, # comments."""
    weights: dict[str, float] = {}
    with open(path, encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected `source weight`, got {raw!r}")
            source, text = parts
            try:
                value = float(text)
            except ValueError:
                raise ValueError(f"line {lineno}: bad weight {text!r}") from None
            if value < 0.0:
                raise ValueError(f"line {lineno}: negative weight {value}")
            weights[source] = value
    return weights


def save_weights(weights: dict[str, float], path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for source in sorted(weights):
            fh.write(f"{source} {weights[source]:.6f}\n")
