import numpy as np
import pytest

from visiou.geometry import Box, iou
from visiou.nms import Detection, nms

from oracles import brute_nms_indices


def random_detections(rng, n):
    dets = []
    for _ in range(n):
        x1, y1 = rng.uniform(0, 80, 2)
        w, h = rng.uniform(5, 40, 2)
        dets.append(Detection(Box(x1, y1, x1 + w, y1 + h), float(rng.uniform(0, 1))))
    return dets


def test_duplicate_suppressed():
    b = Box(0, 0, 10, 10)
    kept = nms([Detection(b, 0.9), Detection(b, 0.8)], 0.5)
    assert kept == [Detection(b, 0.9)]


def test_disjoint_kept():
    a, b = Detection(Box(0, 0, 10, 10), 0.8), Detection(Box(50, 50, 60, 60), 0.9)
    kept = nms([a, b], 0.5)
    assert kept == [b, a]  # descending score order


def test_exact_threshold_survives():
    # IoU exactly 1/3; suppression is strictly-greater
    a, b = Detection(Box(0, 0, 10, 10), 0.9), Detection(Box(5, 0, 15, 10), 0.8)
    assert iou(a.box, b.box) == pytest.approx(1 / 3, abs=1e-12)
    assert len(nms([a, b], 1 / 3)) == 2
    assert len(nms([a, b], 0.3)) == 1


def test_empty_input():
    assert nms([], 0.5) == []


def test_score_tie_broken_by_input_order():
    a = Detection(Box(0, 0, 10, 10), 0.7)
    b = Detection(Box(1, 0, 11, 10), 0.7)
    assert nms([a, b], 0.5)[0] is a
    assert nms([b, a], 0.5)[0] is b


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(2024)
    for trial in range(200):
        dets = random_detections(rng, int(rng.integers(0, 21)))
        thresh = float(rng.uniform(0.2, 0.8))
        kept = nms(dets, thresh)
        boxes = [(d.box.x1, d.box.y1, d.box.x2, d.box.y2) for d in dets]
        scores = [d.score for d in dets]
        expected = [dets[i] for i in brute_nms_indices(boxes, scores, thresh)]
        assert kept == expected


def test_idempotent_and_pairwise_bounded():
    rng = np.random.default_rng(77)
    for _ in range(50):
        dets = random_detections(rng, 15)
        kept = nms(dets, 0.5)
        assert nms(kept, 0.5) == kept
        assert all(d in dets for d in kept)
        for i in range(len(kept)):
            for j in range(i + 1, len(kept)):
                assert iou(kept[i].box, kept[j].box) <= 0.5


def test_validation():
    with pytest.raises(ValueError):
        nms([], 0.0)
    with pytest.raises(ValueError):
        Detection(Box(0, 0, 1, 1), 1.5)
    with pytest.raises(ValueError):
        Detection(Box(0, 0, 1, 1), float("nan"))
