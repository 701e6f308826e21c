"""Axis-aligned bounding-box arithmetic.

Shared by detection fusion, evaluation metrics, and the crossing
controller's occupancy test. Boxes use the image convention: (x1, y1)
is the top-left corner, (x2, y2) the bottom-right, y grows downward.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class BBox:
    """Axis-aligned box with strictly positive width and height."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(
                f"degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2}): "
                "need x1 < x2 and y1 < y2"
            )

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


def intersection_area(a: BBox, b: BBox) -> float:
    """Overlap area of two boxes; 0 for disjoint or edge-touching boxes."""
    width = min(a.x2, b.x2) - max(a.x1, b.x1)
    height = min(a.y2, b.y2) - max(a.y1, b.y1)
    return max(0.0, width) * max(0.0, height)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union in [0, 1]. Union is positive for valid boxes."""
    inter = intersection_area(a, b)
    return inter / (a.area + b.area - inter)


def overlaps_roi(box: BBox, roi: BBox) -> bool:
    """True iff the box overlaps the region with strictly positive area.

    Edge contact does not count as occupancy.
    """
    return intersection_area(box, roi) > 0.0
