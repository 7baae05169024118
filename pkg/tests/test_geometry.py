import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from visiou.geometry import Box, GroundTruth, area, intersect_area, iou, vis_ratio

from oracles import raster_area, raster_intersect, raster_iou


def int_box(draw_lo=0, draw_hi=32):
    return st.tuples(
        st.integers(draw_lo, draw_hi),
        st.integers(draw_lo, draw_hi),
        st.integers(draw_lo, draw_hi),
        st.integers(draw_lo, draw_hi),
    ).map(lambda t: Box(min(t[0], t[2]), min(t[1], t[3]), max(t[0], t[2]), max(t[1], t[3])))


def test_area_examples():
    assert area(Box(0, 0, 10, 10)) == 100
    assert area(Box(3, 3, 3, 9)) == 0
    assert area(Box(0, 0, 1, 1)) == 1


def test_intersect_examples():
    assert intersect_area(Box(0, 0, 10, 10), Box(5, 0, 15, 10)) == 50
    assert intersect_area(Box(0, 0, 10, 10), Box(20, 20, 30, 30)) == 0
    assert intersect_area(Box(0, 0, 10, 10), Box(0, 0, 10, 10)) == 100


def test_iou_examples():
    assert iou(Box(0, 0, 10, 10), Box(5, 0, 15, 10)) == pytest.approx(1 / 3, abs=1e-12)
    assert iou(Box(2, 2, 8, 8), Box(2, 2, 8, 8)) == 1.0
    assert iou(Box(0, 0, 1, 1), Box(5, 5, 6, 6)) == 0.0
    # union of two degenerate boxes is empty
    assert iou(Box(1, 1, 1, 1), Box(1, 1, 1, 1)) == 0.0


def test_vis_ratio_examples():
    gt = GroundTruth(Box(5, 5, 15, 15), Box(5, 5, 15, 15))
    assert vis_ratio(Box(0, 0, 10, 10), gt) == pytest.approx(0.25)
    assert vis_ratio(Box(0, 0, 30, 30), gt) == 1.0
    assert vis_ratio(Box(20, 20, 25, 25), gt) == 0.0
    # zero-area visible region can never contribute
    empty = GroundTruth(Box(0, 0, 10, 10), Box(2, 2, 2, 2))
    assert vis_ratio(Box(0, 0, 10, 10), empty) == 0.0


def test_box_validation():
    with pytest.raises(ValueError):
        Box(5, 0, 0, 5)
    with pytest.raises(ValueError):
        Box(0, 0, float("nan"), 1)
    with pytest.raises(ValueError):
        GroundTruth(Box(0, 0, 10, 10), Box(5, 5, 15, 15))


def test_occlusion_from_areas():
    gt = GroundTruth(Box(0, 0, 10, 10), Box(0, 0, 10, 5))
    assert gt.occlusion == pytest.approx(0.5)
    assert gt.height == 10
    exact = GroundTruth(Box(0, 0, 10, 10), Box(0, 0, 10, 5), vis_area=25.0)
    assert exact.occlusion == pytest.approx(0.75)
    degenerate = GroundTruth(Box(0, 0, 0, 10), Box(0, 0, 0, 10))
    assert degenerate.occlusion == 1.0


@given(int_box(), int_box())
def test_iou_symmetric_and_bounded(a, b):
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0
    assert intersect_area(a, b) <= min(area(a), area(b))


@given(int_box())
def test_iou_identity(b):
    expected = 1.0 if area(b) > 0 else 0.0
    assert iou(b, b) == expected


def test_rasterization_agreement_random_integer_boxes():
    rng = np.random.default_rng(20240)
    for _ in range(300):
        xs = np.sort(rng.integers(0, 33, 4))
        a = Box(int(xs[0]), int(rng.integers(0, 16)), int(xs[2]), int(rng.integers(16, 33)))
        ys = np.sort(rng.integers(0, 33, 4))
        b = Box(int(rng.integers(0, 16)), int(ys[0]), int(rng.integers(16, 33)), int(ys[2]))
        assert area(a) == raster_area(a)
        assert intersect_area(a, b) == raster_intersect(a, b)
        assert iou(a, b) == raster_iou(a, b)


def test_vis_ratio_monotone_in_roi_growth():
    rng = np.random.default_rng(7)
    for _ in range(200):
        g1, g2 = np.sort(rng.integers(0, 30, 2))
        h1, h2 = np.sort(rng.integers(0, 30, 2))
        gt = GroundTruth(Box(0, 0, 30, 30), Box(int(g1), int(h1), int(g2), int(h2)))
        x1, y1 = rng.integers(0, 15, 2)
        x2, y2 = rng.integers(15, 30, 2)
        small = Box(int(x1), int(y1), int(x2), int(y2))
        grown = Box(int(x1) - 3, int(y1) - 2, int(x2) + 4, int(y2) + 1)
        assert vis_ratio(grown, gt) >= vis_ratio(small, gt)
