"""Deterministic crowded-scene generator and JSONL formats.

Pedestrian boxes are placed with a painter's-algorithm depth order:
later boxes are nearer and occlude earlier ones. Each ground truth
carries the tight bounding box of its un-occluded region plus the
exact visible area, computed on the rectangle set by coordinate
compression, so occlusion ratios reflect true visibility rather than
bounding-box area.

File formats (one JSON object per line):

    scene:      {"image_id": str,
                 "gts": [{"full": [x1,y1,x2,y2], "visible": [...], "vis_area": f}, ...],
                 "rois": [[x1,y1,x2,y2], ...]}
    detections: {"image_id": str, "dets": [{"box": [x1,y1,x2,y2], "score": f}, ...]}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import Box, GroundTruth, area, intersect_area, iou
from .nms import Detection

_PLACEMENT_TRIES = 50


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 0
    num_peds: tuple[int, int] = (3, 8)
    image_size: tuple[float, float] = (640.0, 480.0)
    height_range: tuple[float, float] = (55.0, 200.0)
    aspect_ratio: float = 0.41
    overlap_intensity: float = 0.5
    rois_per_gt: int = 8
    roi_jitter: float = 0.15

    def __post_init__(self):
        lo, hi = self.num_peds
        if not (0 < lo <= hi):
            raise ValueError("num_peds must be a positive inclusive range")
        w, h = self.image_size
        hlo, hhi = self.height_range
        if not (0 < hlo <= hhi):
            raise ValueError("height_range must be a positive range")
        if not (w > 0 and h > 0):
            raise ValueError("image_size must be positive")
        if hhi > h or self.aspect_ratio * hhi > w:
            raise ValueError("pedestrians must fit inside the image")
        if not 0.0 <= self.overlap_intensity <= 1.0:
            raise ValueError("overlap_intensity must be in [0,1]")
        if self.rois_per_gt < 1:
            raise ValueError("rois_per_gt must be >= 1")
        if not (self.roi_jitter >= 0 and self.aspect_ratio > 0):
            raise ValueError("roi_jitter and aspect_ratio must be positive")


@dataclass(frozen=True)
class Scene:
    image_id: str
    gts: tuple[GroundTruth, ...]
    rois: tuple[Box, ...]


def visible_region(full: Box, occluders: Sequence[Box]) -> tuple[Box, float]:
    """Bounding box and exact area of `full` minus the occluder union.

    Coordinate compression over the clipped occluders keeps the area
    exact (cells of the induced grid are either fully covered or fully
    free). A fully covered box yields a degenerate visible box at the
    full box's corner and area 0.
    """
    clipped = []
    for oc in occluders:
        x1, y1 = max(oc.x1, full.x1), max(oc.y1, full.y1)
        x2, y2 = min(oc.x2, full.x2), min(oc.y2, full.y2)
        if x2 > x1 and y2 > y1:
            clipped.append((x1, y1, x2, y2))
    if not clipped:
        return full, area(full)
    xs = sorted({full.x1, full.x2, *(c[0] for c in clipped), *(c[2] for c in clipped)})
    ys = sorted({full.y1, full.y2, *(c[1] for c in clipped), *(c[3] for c in clipped)})
    vis_area = 0.0
    bx1 = by1 = math.inf
    bx2 = by2 = -math.inf
    for i in range(len(xs) - 1):
        cx1, cx2 = xs[i], xs[i + 1]
        if cx2 <= full.x1 or cx1 >= full.x2:
            continue
        mx = 0.5 * (cx1 + cx2)
        for j in range(len(ys) - 1):
            cy1, cy2 = ys[j], ys[j + 1]
            if cy2 <= full.y1 or cy1 >= full.y2:
                continue
            my = 0.5 * (cy1 + cy2)
            if any(c[0] <= mx <= c[2] and c[1] <= my <= c[3] for c in clipped):
                continue
            vis_area += (cx2 - cx1) * (cy2 - cy1)
            bx1, by1 = min(bx1, cx1), min(by1, cy1)
            bx2, by2 = max(bx2, cx2), max(by2, cy2)
    if vis_area <= 0.0:
        return Box(full.x1, full.y1, full.x1, full.y1), 0.0
    return Box(bx1, by1, bx2, by2), vis_area


def _box_from_center(cx: float, cy: float, w: float, h: float) -> Box:
    return Box(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)


def _place_pedestrians(cfg: SceneConfig, rng: np.random.Generator) -> list[Box]:
    img_w, img_h = cfg.image_size
    n = int(rng.integers(cfg.num_peds[0], cfg.num_peds[1] + 1))
    boxes: list[Box] = []
    for _ in range(n):
        h = float(rng.uniform(*cfg.height_range))
        w = cfg.aspect_ratio * h
        if boxes and rng.random() < cfg.overlap_intensity:
            anchor = boxes[int(rng.integers(0, len(boxes)))]
            acx, acy = anchor.center
            cx = acx + float(rng.uniform(-0.8, 0.8)) * anchor.width
            cy = acy + float(rng.uniform(-0.25, 0.25)) * anchor.height
            cx = min(max(cx, 0.5 * w), img_w - 0.5 * w)
            cy = min(max(cy, 0.5 * h), img_h - 0.5 * h)
            boxes.append(_box_from_center(cx, cy, w, h))
            continue
        # free-space placement; guarantees zero occlusion at intensity 0
        for _ in range(_PLACEMENT_TRIES):
            cx = float(rng.uniform(0.5 * w, img_w - 0.5 * w))
            cy = float(rng.uniform(0.5 * h, img_h - 0.5 * h))
            cand = _box_from_center(cx, cy, w, h)
            if all(intersect_area(cand, b) == 0.0 for b in boxes):
                boxes.append(cand)
                break
    return boxes


def _jittered_box(base: Box, frac: float, rng: np.random.Generator) -> Box:
    cx, cy = base.center
    w, h = base.width, base.height
    ncx = cx + float(rng.normal(0.0, frac)) * w
    ncy = cy + float(rng.normal(0.0, frac)) * h
    nw = w * math.exp(float(rng.normal(0.0, frac)))
    nh = h * math.exp(float(rng.normal(0.0, frac)))
    return _box_from_center(ncx, ncy, nw, nh)


def _uniform_box(cfg: SceneConfig, rng: np.random.Generator) -> Box:
    img_w, img_h = cfg.image_size
    h = float(rng.uniform(*cfg.height_range))
    w = cfg.aspect_ratio * h
    cx = float(rng.uniform(0.5 * w, img_w - 0.5 * w))
    cy = float(rng.uniform(0.5 * h, img_h - 0.5 * h))
    return _box_from_center(cx, cy, w, h)


def generate(cfg: SceneConfig, n_scenes: int) -> list[Scene]:
    """Generate scenes deterministically from the config seed."""
    if n_scenes < 1:
        raise ValueError("n_scenes must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    scenes = []
    for idx in range(n_scenes):
        boxes = _place_pedestrians(cfg, rng)
        gts = []
        for i, full in enumerate(boxes):
            vis_box, vis_area = visible_region(full, boxes[i + 1 :])
            gts.append(GroundTruth(full, vis_box, vis_area=vis_area))
        rois = []
        for gt in gts:
            for _ in range(cfg.rois_per_gt):
                rois.append(_jittered_box(gt.full, cfg.roi_jitter, rng))
        for _ in range(2 * len(gts) + 4):
            rois.append(_uniform_box(cfg, rng))
        scenes.append(Scene(f"scene_{idx:05d}", tuple(gts), tuple(rois)))
    return scenes


def simulate_detections(
    scene: Scene,
    noise: float = 0.0,
    miss_prob_by_occlusion: float | Callable[[float], float] = 0.0,
    n_false_positives: int = 0,
    rng: np.random.Generator | int | None = None,
) -> list[Detection]:
    """Simulate a detector of tunable quality on one scene.

    Each ground truth is detected with probability 1 minus the miss
    curve at its occlusion; detected boxes are jittered at scale
    `noise` and scored by their overlap with the ground truth (noisy
    when `noise` > 0). False positives are uniform boxes with low
    scores. With noise 0, no misses and no false positives the output
    is a perfect detection set.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    if callable(miss_prob_by_occlusion):
        curve = miss_prob_by_occlusion
    else:
        const = float(miss_prob_by_occlusion)
        curve = lambda occ: const  # noqa: E731
    img_w, img_h = _scene_extent(scene)
    dets = []
    for gt in scene.gts:
        if rng.random() < curve(gt.occlusion):
            continue
        box = _jittered_box(gt.full, noise * 0.1, rng) if noise > 0 else gt.full
        score = iou(box, gt.full) + noise * float(rng.normal(0.0, 0.05))
        dets.append(Detection(box, min(1.0, max(0.0, score))))
    for _ in range(n_false_positives):
        h = float(rng.uniform(20.0, 0.5 * img_h))
        w = 0.41 * h
        cx = float(rng.uniform(0.5 * w, img_w - 0.5 * w))
        cy = float(rng.uniform(0.5 * h, img_h - 0.5 * h))
        dets.append(Detection(_box_from_center(cx, cy, w, h), float(rng.uniform(0.05, 0.6))))
    return dets


def _scene_extent(scene: Scene) -> tuple[float, float]:
    xs = [b.x2 for gt in scene.gts for b in (gt.full,)] + [r.x2 for r in scene.rois]
    ys = [b.y2 for gt in scene.gts for b in (gt.full,)] + [r.y2 for r in scene.rois]
    return (max(xs, default=640.0), max(ys, default=480.0))


# ---------------------------------------------------------------------------
# JSONL serialization


def scene_to_dict(scene: Scene) -> dict:
    return {
        "image_id": scene.image_id,
        "gts": [
            {
                "full": gt.full.as_list(),
                "visible": gt.visible.as_list(),
                "vis_area": gt.visible_area,
            }
            for gt in scene.gts
        ],
        "rois": [r.as_list() for r in scene.rois],
    }


def scene_from_dict(d: dict) -> Scene:
    gts = tuple(
        GroundTruth(Box(*g["full"]), Box(*g["visible"]), vis_area=g.get("vis_area"))
        for g in d["gts"]
    )
    rois = tuple(Box(*r) for r in d["rois"])
    return Scene(str(d["image_id"]), gts, rois)


def write_scenes_jsonl(scenes: Sequence[Scene], path) -> None:
    with open(path, "w") as fh:
        for scene in scenes:
            fh.write(json.dumps(scene_to_dict(scene)) + "\n")


def read_scenes_jsonl(path) -> list[Scene]:
    return _read_jsonl(path, scene_from_dict)


def write_detections_jsonl(items: Sequence[tuple[str, Sequence[Detection]]], path) -> None:
    with open(path, "w") as fh:
        for image_id, dets in items:
            record = {
                "image_id": image_id,
                "dets": [{"box": d.box.as_list(), "score": d.score} for d in dets],
            }
            fh.write(json.dumps(record) + "\n")


def read_detections_jsonl(path) -> list[tuple[str, list[Detection]]]:
    def parse(d: dict) -> tuple[str, list[Detection]]:
        dets = [Detection(Box(*item["box"]), float(item["score"])) for item in d["dets"]]
        return (str(d["image_id"]), dets)

    return _read_jsonl(path, parse)


def _read_jsonl(path, parse):
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(parse(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: bad record on line {lineno}: {exc}") from exc
    return out
