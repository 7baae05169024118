"""Log-average miss rate (MR^-2) and occlusion-defined evaluation subsets.

The metric follows the established pedestrian-benchmark protocol:
detections are greedily matched per image at IoU >= 0.5 in descending
score order, ground truths outside the evaluated subset act as ignore
regions, and the miss rate is averaged in log space over nine FPPI
reference points spaced evenly in [1e-2, 1].

Because greedy matching processes detections in score order, the match
outcome of each detection is independent of the score threshold; the
threshold sweep therefore reduces to prefix sums over per-detection
labels. An exhaustive re-matching oracle in the test suite checks this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import GroundTruth, iou
from .nms import Detection

TP = "tp"
FP = "fp"
IGNORED = "ignored"

# floor only guards log(0); a miss rate this small reports as 0.0
MISS_FLOOR = 1e-10

FPPI_REFS = tuple(10.0 ** e for e in np.linspace(-2.0, 0.0, 9))


@dataclass(frozen=True)
class SubsetSpec:
    """Evaluated iff height > min_height and occ_low < occlusion <= occ_high.

    A negative occ_low (the canonical subsets use -1) makes the lower
    bound vacuous so that fully visible ground truths are included.
    """

    name: str
    min_height: float
    occ_low: float
    occ_high: float

    def __post_init__(self):
        if not -1.0 <= self.occ_low <= self.occ_high <= 1.0:
            raise ValueError("need -1 <= occ_low <= occ_high <= 1")
        if self.min_height < 0:
            raise ValueError("min_height must be >= 0")


REASONABLE = SubsetSpec("reasonable", min_height=50.0, occ_low=-1.0, occ_high=0.35)
PARTIAL = SubsetSpec("partial", min_height=50.0, occ_low=0.10, occ_high=0.35)
BARE = SubsetSpec("bare", min_height=50.0, occ_low=-1.0, occ_high=0.10)
HEAVY = SubsetSpec("heavy", min_height=50.0, occ_low=0.35, occ_high=1.0)

SUBSETS = {s.name: s for s in (REASONABLE, PARTIAL, BARE, HEAVY)}


@dataclass(frozen=True)
class EvalResult:
    mr2: float
    curve: tuple[tuple[float, float], ...]  # (fppi, miss_rate) per threshold
    num_gt: int
    num_det: int
    num_tp: int
    num_fp: int


def in_subset(gt: GroundTruth, spec: SubsetSpec) -> bool:
    return gt.height > spec.min_height and spec.occ_low < gt.occlusion <= spec.occ_high


def subset_filter(
    gts: Sequence[GroundTruth], spec: SubsetSpec
) -> tuple[list[int], list[int]]:
    """Partition ground-truth indices into (evaluated, ignored)."""
    evaluated, ignored = [], []
    for i, gt in enumerate(gts):
        (evaluated if in_subset(gt, spec) else ignored).append(i)
    return evaluated, ignored


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    spec: SubsetSpec,
    iou_thresh: float = 0.5,
) -> tuple[list[str], list[bool]]:
    """Greedy per-image matching.

    Detections are visited in descending score order (ties keep input
    order). Each is matched to the unmatched in-subset ground truth of
    highest IoU when that IoU reaches `iou_thresh` (-> tp). Failing
    that, a detection overlapping any ignored ground truth at the
    threshold counts neither way; everything else is a false positive.
    In-subset ground truths match at most once; ignore regions may
    absorb any number of detections.

    Returns per-detection labels ("tp"/"fp"/"ignored") in input order
    and a matched flag per ground truth.
    """
    evaluated, ignored = subset_filter(gts, spec)
    matched = [False] * len(gts)
    labels = [FP] * len(dets)
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    for di in order:
        box = dets[di].box
        best_gt, best_iou = -1, 0.0
        for gi in evaluated:
            if matched[gi]:
                continue
            ov = iou(box, gts[gi].full)
            if ov > best_iou:
                best_gt, best_iou = gi, ov
        if best_gt >= 0 and best_iou >= iou_thresh:
            matched[best_gt] = True
            labels[di] = TP
            continue
        if any(iou(box, gts[gi].full) >= iou_thresh for gi in ignored):
            labels[di] = IGNORED
    return labels, matched


def mr2(
    images: Sequence[tuple[Sequence[Detection], Sequence[GroundTruth]]],
    spec: SubsetSpec,
    iou_thresh: float = 0.5,
) -> EvalResult:
    """Log-average miss rate over a dataset of (detections, gts) pairs.

    Sweeps every distinct score as a threshold, takes at each FPPI
    reference the lowest miss rate among thresholds whose FPPI stays at
    or below it (falling back to the strictest threshold when none
    qualifies), and averages the log miss rates. A dataset whose
    evaluated subset is empty is an error.
    """
    if len(images) == 0:
        raise ValueError("mr2 needs at least one image")
    num_gt = 0
    num_det = 0
    scored: list[tuple[float, str]] = []
    for dets, gts in images:
        evaluated, _ = subset_filter(gts, spec)
        num_gt += len(evaluated)
        num_det += len(dets)
        labels, _ = match_detections(dets, gts, spec, iou_thresh)
        scored.extend((d.score, lab) for d, lab in zip(dets, labels))
    if num_gt == 0:
        raise ValueError(f"no ground truths fall in subset {spec.name!r}")

    scored.sort(key=lambda t: -t[0])
    n_images = len(images)
    curve: list[tuple[float, float]] = []
    tp = fp = 0
    i = 0
    while i < len(scored):
        thresh = scored[i][0]
        while i < len(scored) and scored[i][0] == thresh:
            if scored[i][1] == TP:
                tp += 1
            elif scored[i][1] == FP:
                fp += 1
            i += 1
        curve.append((fp / n_images, 1.0 - tp / num_gt))

    misses = []
    for ref in FPPI_REFS:
        at_or_below = [m for f, m in curve if f <= ref]
        if at_or_below:
            misses.append(min(at_or_below))
        elif curve:
            misses.append(curve[0][1])
        else:
            misses.append(1.0)

    if all(m <= MISS_FLOOR for m in misses):
        value = 0.0
    else:
        value = math.exp(sum(math.log(max(m, MISS_FLOOR)) for m in misses) / len(misses))
    return EvalResult(
        mr2=value,
        curve=tuple(curve),
        num_gt=num_gt,
        num_det=num_det,
        num_tp=tp,
        num_fp=fp,
    )
