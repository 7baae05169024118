"""Positive/negative labeling of candidate RoIs by decayed overlap.

Each RoI is matched to the ground truth maximizing the plain IoU (ties
go to the lowest index); the decayed score is that IoU multiplied by
the decay function of the visible ratio against the matched ground
truth. An RoI is positive when the decayed score reaches the
threshold. Since decay values never exceed 1, positives under any
decay are a subset of the positives under no decay.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

from .decay import DecaySpec, eval_decay
from .geometry import Box, GroundTruth, iou, vis_ratio

POSITIVE = "positive"
NEGATIVE = "negative"

DISTRIBUTION_HEADER = ("vis_ratio", "iou_ori", "kept_decay", "kept_baseline")


@dataclass(frozen=True)
class AssignmentConfig:
    decay: DecaySpec
    threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")


@dataclass(frozen=True)
class AssignmentRecord:
    roi_index: int
    matched_gt: int | None
    iou_ori: float
    vis_ratio: float
    iou_vis: float
    label: str


def assign(
    rois: Sequence[Box],
    gts: Sequence[GroundTruth],
    cfg: AssignmentConfig,
) -> list[AssignmentRecord]:
    """Label every RoI against the ground truths.

    With no ground truths (or no overlap) an RoI is negative with zero
    scores and no match.
    """
    records = []
    for ri, roi in enumerate(rois):
        best_gt, best_iou = None, 0.0
        for gi, gt in enumerate(gts):
            ov = iou(roi, gt.full)
            if ov > best_iou:
                best_gt, best_iou = gi, ov
        if best_gt is None:
            records.append(AssignmentRecord(ri, None, 0.0, 0.0, 0.0, NEGATIVE))
            continue
        vr = vis_ratio(roi, gts[best_gt])
        decayed = best_iou * eval_decay(cfg.decay, vr)
        label = POSITIVE if decayed >= cfg.threshold else NEGATIVE
        records.append(AssignmentRecord(ri, best_gt, best_iou, vr, decayed, label))
    return records


def distribution_dump(
    records: Sequence[AssignmentRecord],
    baseline: Sequence[AssignmentRecord],
) -> list[tuple[float, float, bool, bool]]:
    """Rows (vis_ratio, iou_ori, kept_decay, kept_baseline), one per RoI.

    `records` and `baseline` must come from the same (rois, gts) with
    the decayed and decay-free config respectively; the dump is the
    data behind the positive-sample distribution diagnostic.
    """
    if len(records) != len(baseline):
        raise ValueError("records and baseline length mismatch")
    rows = []
    for rec, base in zip(records, baseline):
        rows.append((rec.vis_ratio, rec.iou_ori, rec.label == POSITIVE, base.label == POSITIVE))
    return rows


def write_distribution_csv(rows: Sequence[tuple[float, float, bool, bool]], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DISTRIBUTION_HEADER)
        for vr, ov, kept_decay, kept_base in rows:
            writer.writerow([repr(vr), repr(ov), str(kept_decay).lower(), str(kept_base).lower()])
