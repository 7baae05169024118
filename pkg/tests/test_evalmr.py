import numpy as np
import pytest

from visiou.evalmr import (
    BARE,
    FPPI_REFS,
    HEAVY,
    PARTIAL,
    REASONABLE,
    SUBSETS,
    SubsetSpec,
    in_subset,
    match_detections,
    mr2,
    subset_filter,
)
from visiou.geometry import Box, GroundTruth
from visiou.nms import Detection

from oracles import mr2_enum_oracle


def gt_with(height=60.0, occlusion=0.0, x=0.0, y=0.0):
    """Ground truth of given height/occlusion; visible box shrinks from the top."""
    full = Box(x, y, x + 0.41 * height, y + height)
    vis_h = (1.0 - occlusion) * height
    visible = Box(x, y + height - vis_h, x + 0.41 * height, y + height)
    gt = GroundTruth(full, visible)
    assert gt.occlusion == pytest.approx(occlusion, abs=1e-9)
    return gt


def exact_det(gt, score):
    return Detection(gt.full, score)


class TestSubsets:
    def test_paper_definitions(self):
        assert in_subset(gt_with(60, 0.0), REASONABLE)
        assert in_subset(gt_with(60, 0.0), BARE)
        assert not in_subset(gt_with(60, 0.0), PARTIAL)
        assert in_subset(gt_with(60, 0.2), PARTIAL)
        assert not in_subset(gt_with(60, 0.2), BARE)
        assert in_subset(gt_with(60, 0.2), REASONABLE)
        assert not in_subset(gt_with(40, 0.0), REASONABLE)
        assert in_subset(gt_with(60, 0.5), HEAVY)
        assert not in_subset(gt_with(60, 0.5), REASONABLE)

    def test_boundaries(self):
        assert in_subset(gt_with(60, 0.35), REASONABLE)
        assert in_subset(gt_with(60, 0.35), PARTIAL)
        assert not in_subset(gt_with(60, 0.35), HEAVY)
        assert in_subset(gt_with(60, 0.10), BARE)
        assert not in_subset(gt_with(60, 0.10), PARTIAL)
        # height is strictly greater-than
        assert not in_subset(gt_with(50, 0.0), REASONABLE)

    def test_partition_laws(self):
        rng = np.random.default_rng(88)
        gts = [gt_with(float(h), float(o)) for h, o in
               zip(rng.uniform(30, 120, 400), rng.uniform(0, 1, 400))]
        for gt in gts:
            reasonable = in_subset(gt, REASONABLE)
            partial, bare, heavy = (in_subset(gt, s) for s in (PARTIAL, BARE, HEAVY))
            assert reasonable == (partial or bare)
            assert not (partial and bare)
            assert not (heavy and reasonable)

    def test_subset_filter_partition(self):
        gts = [gt_with(60, 0.0), gt_with(40, 0.0), gt_with(60, 0.8)]
        evaluated, ignored = subset_filter(gts, REASONABLE)
        assert evaluated == [0]
        assert ignored == [1, 2]

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SubsetSpec("bad", min_height=-1, occ_low=0, occ_high=1)
        with pytest.raises(ValueError):
            SubsetSpec("bad", min_height=0, occ_low=0.5, occ_high=0.2)
        assert set(SUBSETS) == {"reasonable", "partial", "bare", "heavy"}


class TestMatching:
    def test_perfect_match(self):
        gt = gt_with(60, 0.0)
        labels, matched = match_detections([exact_det(gt, 0.9)], [gt], REASONABLE)
        assert labels == ["tp"]
        assert matched == [True]

    def test_duplicate_is_fp(self):
        gt = gt_with(80, 0.0, x=10, y=10)
        near = Detection(Box(11, 11, 10 + 0.41 * 80, 89), 0.6)
        labels, _ = match_detections([near, exact_det(gt, 0.9)], [gt], REASONABLE)
        # higher score wins the gt; the other overlapping det is a duplicate
        assert labels == ["fp", "tp"]

    def test_ignore_region_absorbs(self):
        short = gt_with(40, 0.0)  # below the height filter
        tall = gt_with(80, 0.0, x=200)
        dets = [exact_det(short, 0.8), exact_det(tall, 0.7)]
        labels, matched = match_detections(dets, [short, tall], REASONABLE)
        assert labels == ["ignored", "tp"]
        assert matched == [False, True]
        # ignore regions may absorb several detections
        labels, _ = match_detections(
            [exact_det(short, 0.8), exact_det(short, 0.6)], [short, tall], REASONABLE
        )
        assert labels == ["ignored", "ignored"]

    def test_low_iou_is_fp(self):
        gt = gt_with(80, 0.0)
        far = Detection(Box(300, 300, 320, 360), 0.9)
        labels, matched = match_detections([far], [gt], REASONABLE)
        assert labels == ["fp"]
        assert matched == [False]


class TestMr2:
    def test_perfect_detector(self):
        images = []
        for i in range(5):
            gts = [gt_with(70, 0.0, x=100.0 * i), gt_with(90, 0.2, x=300 + 100.0 * i)]
            images.append(([exact_det(g, 1.0) for g in gts], gts))
        result = mr2(images, REASONABLE)
        assert result.mr2 == 0.0
        assert result.num_tp == result.num_gt == 10
        assert result.num_fp == 0

    def test_no_detections(self):
        images = [([], [gt_with(70, 0.0)]) for _ in range(4)]
        result = mr2(images, REASONABLE)
        assert result.mr2 == 1.0
        assert result.curve == ()

    def test_single_fp_only(self):
        gt = gt_with(70, 0.0)
        images = [([Detection(Box(400, 400, 420, 460), 0.9)], [gt])]
        result = mr2(images, REASONABLE)
        assert result.mr2 == 1.0  # nothing found, miss stays 1 everywhere

    def test_fppi_reference_points(self):
        assert len(FPPI_REFS) == 9
        assert FPPI_REFS[0] == pytest.approx(1e-2)
        assert FPPI_REFS[-1] == pytest.approx(1.0)
        ratios = [FPPI_REFS[i + 1] / FPPI_REFS[i] for i in range(8)]
        assert all(r == pytest.approx(10 ** 0.25) for r in ratios)

    def test_errors(self):
        with pytest.raises(ValueError):
            mr2([], REASONABLE)
        with pytest.raises(ValueError):
            mr2([([], [gt_with(40, 0.0)])], REASONABLE)  # nothing in subset

    def test_monotone_in_extra_fp(self):
        rng = np.random.default_rng(31)
        images = _random_dataset(rng, n_images=8)
        base = mr2(images, REASONABLE).mr2
        worse = [(list(dets) + [Detection(Box(500, 5, 520, 45), 0.99)], gts)
                 for dets, gts in images]
        assert mr2(worse, REASONABLE).mr2 >= base

    def test_found_missed_gt_never_hurts(self):
        rng = np.random.default_rng(32)
        images = _random_dataset(rng, n_images=8, miss_first=True)
        base = mr2(images, REASONABLE).mr2
        better = []
        for i, (dets, gts) in enumerate(images):
            dets = list(dets)
            if i == 0:
                dets.append(exact_det(gts[0], 1.0))  # recover the missed gt
            better.append((dets, gts))
        assert mr2(better, REASONABLE).mr2 <= base

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(2025)
        for trial in range(25):
            images = _random_dataset(rng, n_images=int(rng.integers(2, 7)))
            ours = mr2(images, REASONABLE).mr2
            oracle = mr2_enum_oracle(images, 50.0, -1.0, 0.35)
            assert ours == pytest.approx(oracle, abs=1e-9)


def _random_dataset(rng, n_images=6, miss_first=False):
    """Images with mixed tp/fp/ignored detections and noisy scores."""
    images = []
    for i in range(n_images):
        gts = []
        for g in range(int(rng.integers(1, 5))):
            h = float(rng.uniform(40, 110))
            occ = float(rng.uniform(0, 0.9)) if rng.random() < 0.5 else 0.0
            gts.append(gt_with(h, occ, x=150.0 * g, y=float(rng.uniform(0, 40))))
        dets = []
        for gi, gt in enumerate(gts):
            if miss_first and i == 0 and gi == 0:
                continue
            if rng.random() < 0.75:
                dx, dy = rng.normal(0, 2, 2)
                b = Box(gt.full.x1 + dx, gt.full.y1 + dy, gt.full.x2 + dx, gt.full.y2 + dy)
                dets.append(Detection(b, float(rng.uniform(0.4, 1.0))))
        for _ in range(int(rng.integers(0, 3))):
            x, y = rng.uniform(0, 600, 2)
            dets.append(Detection(Box(x, y, x + 20, y + 50), float(rng.uniform(0, 0.6))))
        images.append((dets, gts))
    return images
