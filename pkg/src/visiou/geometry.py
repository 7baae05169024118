"""Axis-aligned box arithmetic: areas, IoU, and visible-ratio computation.

All functions are pure and stateless. Coordinates are corner-form
(x1, y1, x2, y2) real pixels with x1 <= x2 and y1 <= y2; degenerate
(zero-area) boxes are allowed. Any ratio whose denominator is zero
evaluates to 0, so degenerate or fully occluded ground truths can
never promote a sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in corner form."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x1, self.y1, self.x2, self.y2)):
            raise ValueError(f"box coordinates must be finite, got {self}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(f"box corners out of order: {self}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


@dataclass(frozen=True)
class GroundTruth:
    """A full-body box plus its visible region.

    `visible` is the axis-aligned bounding box of the visible part
    (the annotation format ships boxes, not masks). When the exact
    visible area is known (synthetic scenes track it through the
    occluder stack), pass it as `vis_area`; otherwise the area of the
    visible box is used for the occlusion ratio.
    """

    full: Box
    visible: Box
    vis_area: float | None = None

    def __post_init__(self):
        v, f = self.visible, self.full
        if v.x1 < f.x1 - 1e-9 or v.y1 < f.y1 - 1e-9 or v.x2 > f.x2 + 1e-9 or v.y2 > f.y2 + 1e-9:
            raise ValueError("visible box must be contained in the full box")
        if self.vis_area is not None:
            if not (0.0 <= self.vis_area <= area(self.visible) + 1e-6):
                raise ValueError("vis_area must lie in [0, area(visible)]")

    @property
    def height(self) -> float:
        return self.full.height

    @property
    def visible_area(self) -> float:
        return self.vis_area if self.vis_area is not None else area(self.visible)

    @property
    def occlusion(self) -> float:
        full_area = area(self.full)
        if full_area <= 0.0:
            return 1.0
        return 1.0 - self.visible_area / full_area


def area(b: Box) -> float:
    """Area of a box; 0 for degenerate boxes."""
    return (b.x2 - b.x1) * (b.y2 - b.y1)


def intersect_area(a: Box, b: Box) -> float:
    """Overlap area of two boxes; 0 when disjoint."""
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iou(a: Box, b: Box) -> float:
    """Intersection over union; 0 when the union is empty."""
    inter = intersect_area(a, b)
    union = area(a) + area(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def vis_ratio(roi: Box, gt: GroundTruth) -> float:
    """Fraction of the ground truth's visible region covered by the RoI.

    Returns 0 when the visible region has zero area.
    """
    denom = area(gt.visible)
    if denom <= 0.0:
        return 0.0
    return intersect_area(roi, gt.visible) / denom
