"""Occlusion-aware sample assignment and sign-refined box regression.

The library covers the desk-scale machinery of occluded pedestrian
detection: box geometry with visible ratios, decayed-overlap sample
assignment, the box codec, detector losses with a direction (sign)
prediction term and refinement, greedy NMS, log-average miss-rate
evaluation on occlusion subsets, a deterministic crowded-scene
generator and a toy trainer.
"""

from .assignment import AssignmentConfig, AssignmentRecord, assign, distribution_dump
from .boxcodec import BoxDeltas, SignTargets, clip_box, decode, encode, sign_targets
from .decay import DecaySpec, eval_decay, parse_decay
from .evalmr import (
    BARE,
    HEAVY,
    PARTIAL,
    REASONABLE,
    SUBSETS,
    EvalResult,
    SubsetSpec,
    match_detections,
    mr2,
    subset_filter,
)
from .geometry import Box, GroundTruth, area, intersect_area, iou, vis_ratio
from .losses import (
    LossConfig,
    SignProbs,
    box_loss,
    cls_loss,
    refine,
    sign_loss,
    smooth_l1,
    total_loss,
)
from .nms import Detection, nms
from .synth import (
    Scene,
    SceneConfig,
    generate,
    read_detections_jsonl,
    read_scenes_jsonl,
    simulate_detections,
    visible_region,
    write_detections_jsonl,
    write_scenes_jsonl,
)
from .trainer import (
    ToyHead,
    TrainerConfig,
    TrainingDiverged,
    TrainReport,
    ablation,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentConfig",
    "AssignmentRecord",
    "BARE",
    "Box",
    "BoxDeltas",
    "Detection",
    "DecaySpec",
    "EvalResult",
    "GroundTruth",
    "HEAVY",
    "LossConfig",
    "PARTIAL",
    "REASONABLE",
    "SUBSETS",
    "Scene",
    "SceneConfig",
    "SignProbs",
    "SignTargets",
    "SubsetSpec",
    "ToyHead",
    "TrainReport",
    "TrainerConfig",
    "TrainingDiverged",
    "ablation",
    "area",
    "assign",
    "box_loss",
    "clip_box",
    "cls_loss",
    "decode",
    "distribution_dump",
    "encode",
    "eval_decay",
    "generate",
    "intersect_area",
    "iou",
    "match_detections",
    "mr2",
    "nms",
    "parse_decay",
    "read_detections_jsonl",
    "read_scenes_jsonl",
    "refine",
    "sign_loss",
    "sign_targets",
    "simulate_detections",
    "smooth_l1",
    "subset_filter",
    "total_loss",
    "train",
    "vis_ratio",
    "visible_region",
    "write_detections_jsonl",
    "write_scenes_jsonl",
]
