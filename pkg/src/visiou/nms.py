"""Greedy non-maximum suppression.

Inaccurate boxes in a crowd do their damage here: one drifted box can
suppress a correct neighbor. Suppression is strict (IoU > threshold);
a pair at exactly the threshold survives, which fixes tie behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .geometry import Box, iou


@dataclass(frozen=True)
class Detection:
    """A scored box."""

    box: Box
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError("detection score must be finite")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must be in [0,1], got {self.score}")


def nms(dets: Sequence[Detection], iou_thresh: float) -> list[Detection]:
    """Keep the highest-scoring detections, suppressing overlaps.

    Detections are visited in descending score order (ties keep input
    order); a detection is dropped when its IoU with an already kept
    box exceeds `iou_thresh`. The kept order is the visit order.
    """
    if not 0.0 < iou_thresh < 1.0:
        raise ValueError("iou_thresh must be in (0, 1)")
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    kept: list[Detection] = []
    for i in order:
        d = dets[i]
        if all(iou(d.box, k.box) <= iou_thresh for k in kept):
            kept.append(d)
    return kept
