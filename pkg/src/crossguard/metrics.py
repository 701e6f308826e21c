"""Detection evaluation: matching, confusion matrix, P/R/F1, PR curve, AP.

Matching is the greedy confidence-ordered one-to-one protocol with a
second cross-class stage so class confusions land in the off-diagonal
cells. Confusion counts are reals so normalized-rate arithmetic works.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .fusion import KNOWN_CLASSES
from .geometry import BBox, iou

BACKGROUND = "background"


@dataclass(frozen=True)
class GroundTruthObject:
    frame_id: int
    class_label: str
    box: BBox

    def __post_init__(self) -> None:
        if self.frame_id < 0:
            raise ValueError(f"negative frame_id: {self.frame_id}")
        if self.class_label not in KNOWN_CLASSES:
            raise ValueError(f"unregistered class: {self.class_label!r}")


@dataclass
class ConfusionMatrix:
    """True-label x predicted-label counts with a trailing background slot."""

    classes: tuple[str, ...]
    counts: np.ndarray  # (n+1, n+1), last row/column = background

    @classmethod
    def empty(cls, classes: Optional[Sequence[str]] = None) -> "ConfusionMatrix":
        labels = tuple(classes) if classes is not None else tuple(sorted(KNOWN_CLASSES))
        n = len(labels) + 1
        return cls(classes=labels, counts=np.zeros((n, n), dtype=np.float64))

    @property
    def labels(self) -> tuple[str, ...]:
        return self.classes + (BACKGROUND,)

    def index(self, label: str) -> int:
        if label == BACKGROUND:
            return len(self.classes)
        return self.classes.index(label)

    def add(self, true_label: str, pred_label: str, amount: float = 1.0) -> None:
        self.counts[self.index(true_label), self.index(pred_label)] += amount

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.classes != other.classes:
            raise ValueError("label mismatch in confusion-matrix merge")
        return ConfusionMatrix(classes=self.classes,
                               counts=self.counts + other.counts)


@dataclass(frozen=True)
class ClassMetrics:
    class_label: str
    tp: float
    fp: float
    fn: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MatchResult:
    """One prediction's outcome: matched truth index (or None) and TP flag."""

    pred_index: int
    truth_index: Optional[int]
    is_tp: bool


def _pred_order(preds: Sequence) -> list[int]:
    return sorted(
        range(len(preds)),
        key=lambda i: (-preds[i].confidence, preds[i].source_id,
                       preds[i].box.as_tuple()),
    )


def match_detections(preds: Sequence, truths: Sequence[GroundTruthObject],
                     iou_threshold: float = 0.5) -> list[MatchResult]:
    """Greedy one-to-one matching of one frame's predictions to truths.

    Confidence-descending order; each prediction takes the unmatched
    same-class truth with highest IoU >= threshold (a TP), else the
    unmatched any-class truth with highest IoU >= threshold (a class
    confusion, not a TP), else stays unmatched. Each truth is used at
    most once; truths left unmatched are FNs.
    """
    frames = {p.frame_id for p in preds} | {t.frame_id for t in truths}
    if len(frames) > 1:
        raise ValueError(f"mixed frames: {sorted(frames)}")

    taken: set[int] = set()
    results: list[MatchResult] = []
    for pi in _pred_order(preds):
        pred = preds[pi]
        best_same: tuple[float, int] | None = None
        best_any: tuple[float, int] | None = None
        for ti, truth in enumerate(truths):
            if ti in taken:
                continue
            overlap = iou(pred.box, truth.box)
            if overlap < iou_threshold:
                continue
            # tie-break on lower truth index via strict > on the IoU
            if truth.class_label == pred.class_label:
                if best_same is None or overlap > best_same[0]:
                    best_same = (overlap, ti)
            elif best_any is None or overlap > best_any[0]:
                best_any = (overlap, ti)
        if best_same is not None:
            taken.add(best_same[1])
            results.append(MatchResult(pi, best_same[1], True))
        elif best_any is not None:
            taken.add(best_any[1])
            results.append(MatchResult(pi, best_any[1], False))
        else:
            results.append(MatchResult(pi, None, False))
    return results


def build_confusion_matrix(matches: Sequence[MatchResult], preds: Sequence,
                           truths: Sequence[GroundTruthObject],
                           classes: Optional[Sequence[str]] = None) -> ConfusionMatrix:
    """Turn one frame's match results into confusion counts.

    Aggregate frames by summing the returned matrices.
    """
    cm = ConfusionMatrix.empty(classes)
    matched_truths: set[int] = set()
    for m in matches:
        pred = preds[m.pred_index]
        if m.truth_index is None:
            cm.add(BACKGROUND, pred.class_label)
        else:
            matched_truths.add(m.truth_index)
            cm.add(truths[m.truth_index].class_label, pred.class_label)
    for ti, truth in enumerate(truths):
        if ti not in matched_truths:
            cm.add(truth.class_label, BACKGROUND)
    return cm


def evaluate_detections(preds: Sequence, truths: Sequence[GroundTruthObject],
                        iou_threshold: float = 0.5,
                        classes: Optional[Sequence[str]] = None) -> ConfusionMatrix:
    """Match frame by frame and merge the resulting confusion matrices."""
    frames = sorted({p.frame_id for p in preds} | {t.frame_id for t in truths})
    total = ConfusionMatrix.empty(classes)
    for frame in frames:
        fp = [p for p in preds if p.frame_id == frame]
        ft = [t for t in truths if t.frame_id == frame]
        total = total + build_confusion_matrix(
            match_detections(fp, ft, iou_threshold), fp, ft, classes)
    return total


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0.0 else 0.0


def class_metrics(cm: ConfusionMatrix, class_label: str) -> ClassMetrics:
    if class_label == BACKGROUND:
        raise ValueError("metrics are undefined for the background pseudo-class")
    c = cm.index(class_label)
    tp = float(cm.counts[c, c])
    fp = float(cm.counts[:, c].sum() - cm.counts[c, c])
    fn = float(cm.counts[c, :].sum() - cm.counts[c, c])
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2.0 * precision * recall, precision + recall)
    return ClassMetrics(class_label, tp, fp, fn, precision, recall, f1)


def pr_curve(preds: Sequence, truths: Sequence[GroundTruthObject],
             class_label: str,
             iou_threshold: float = 0.5) -> list[tuple[float, float]]:
    """(recall, precision) points swept over descending confidence cutoffs."""
    class_truths = [t for t in truths if t.class_label == class_label]
    if not class_truths:
        raise ValueError(f"undefined recall: no ground truth for {class_label!r}")
    class_preds = [p for p in preds if p.class_label == class_label]
    if not class_preds:
        return [(0.0, 0.0)]

    # Match each frame once over all predictions. A confidence cutoff keeps
    # a prefix of the greedy ranking, and each prediction's greedy outcome
    # depends only on higher-ranked predictions, so the full-run outcomes
    # hold at every cutoff and cumulative sums give the swept curve exactly.
    scored: list[tuple[float, bool]] = []
    frames = sorted({p.frame_id for p in class_preds} |
                    {t.frame_id for t in class_truths})
    for frame in frames:
        fp_ = [p for p in class_preds if p.frame_id == frame]
        ft = [t for t in class_truths if t.frame_id == frame]
        for m in match_detections(fp_, ft, iou_threshold):
            scored.append((fp_[m.pred_index].confidence, m.is_tp))
    scored.sort(key=lambda item: -item[0])

    points: list[tuple[float, float]] = []
    tp = retained = index = 0
    for cutoff in sorted({p.confidence for p in class_preds}, reverse=True):
        while index < len(scored) and scored[index][0] >= cutoff:
            tp += scored[index][1]
            retained += 1
            index += 1
        points.append((tp / len(class_truths), tp / retained))
    return points


def average_precision(curve: Sequence[tuple[float, float]]) -> float:
    """All-points interpolated AP over a (recall, precision) curve."""
    if not curve:
        raise ValueError("empty curve")
    ap = 0.0
    prev_recall = 0.0
    for recall, _ in curve:
        best = max(p for r, p in curve if r >= recall)
        ap += (recall - prev_recall) * best
        prev_recall = recall
    return ap


def macro_micro(cm: ConfusionMatrix) -> tuple[ClassMetrics, ClassMetrics]:
    """Aggregate metrics: macro averages classes with any support, micro pools counts."""
    per_class = [class_metrics(cm, c) for c in cm.classes]
    active = [m for m in per_class if m.tp + m.fp + m.fn > 0.0]
    if active:
        macro = ClassMetrics(
            "macro",
            sum(m.tp for m in active), sum(m.fp for m in active),
            sum(m.fn for m in active),
            sum(m.precision for m in active) / len(active),
            sum(m.recall for m in active) / len(active),
            sum(m.f1 for m in active) / len(active),
        )
    else:
        macro = ClassMetrics("macro", 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    tp = sum(m.tp for m in per_class)
    fp = sum(m.fp for m in per_class)
    fn = sum(m.fn for m in per_class)
    p = _safe_div(tp, tp + fp)
    r = _safe_div(tp, tp + fn)
    micro = ClassMetrics("micro", tp, fp, fn, p, r,
                         _safe_div(2.0 * p * r, p + r))
    return macro, micro


def render_report(cm: ConfusionMatrix, preds: Optional[Sequence] = None,
                  truths: Optional[Sequence[GroundTruthObject]] = None,
                  iou_threshold: float = 0.5) -> str:
    """ASCII evaluation report: confusion block, per-class lines, aggregates, PR."""
    lines = ["labels " + " ".join(cm.labels)]
    for i, label in enumerate(cm.labels):
        lines.append(label + " " + " ".join(f"{v:.6f}" for v in cm.counts[i]))
    lines.append("")
    for label in cm.classes:
        m = class_metrics(cm, label)
        flags = []
        if m.tp + m.fp == 0.0:
            flags.append("no-predictions")
        if m.tp + m.fn == 0.0:
            flags.append("no-truths")
        suffix = f"  # {','.join(flags)}" if flags else ""
        lines.append(
            f"{label} {m.tp:.6f} {m.fp:.6f} {m.fn:.6f} "
            f"{m.precision:.6f} {m.recall:.6f} {m.f1:.6f}{suffix}"
        )
    macro, micro = macro_micro(cm)
    for m in (macro, micro):
        lines.append(f"{m.class_label} {m.precision:.6f} {m.recall:.6f} {m.f1:.6f}")
    if preds is not None and truths is not None:
        for label in cm.classes:
            if not any(t.class_label == label for t in truths):
                continue
            lines.append("")
            lines.append(f"pr {label}")
            for recall, precision in pr_curve(preds, truths, label, iou_threshold):
                lines.append(f"{recall:.6f} {precision:.6f}")
    return "\n".join(lines) + "\n"


def load_confusion_matrix(path) -> ConfusionMatrix:
    """Read the confusion block of the report format (labels header + rows)."""
    with open(path, encoding="ascii") as fh:
        rows = [ln for ln in fh.read().splitlines()
                if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or not rows[0].startswith("labels "):
        raise ValueError(f"{path}: missing labels header")
    labels = rows[0].split()[1:]
    if not labels or labels[-1] != BACKGROUND:
        raise ValueError(f"{path}: labels must end with {BACKGROUND!r}")
    n = len(labels)
    if len(rows) < 1 + n:
        raise ValueError(f"{path}: expected {n} matrix rows")
    counts = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        parts = rows[1 + i].split()
        if parts[0] != labels[i] or len(parts) != n + 1:
            raise ValueError(f"{path}: bad matrix row {rows[1 + i]!r}")
        counts[i] = [float(v) for v in parts[1:]]
    if np.any(counts < 0.0):
        raise ValueError(f"{path}: negative counts")
    return ConfusionMatrix(classes=tuple(labels[:-1]), counts=counts)
