#!/usr/bin/env python3


#######################################################
# Unit tests for rotated box IoU
#
#######################################################


import unittest
import math

import numpy as np

## Functions and classes to tests
#
from ..rotated_iou import rotated_iou, iou_matrix, polygon_area, clip_polygon, intersection_area
from ..boxes import BoxBEV
from lib_geometry.pose import Pose2


def _raster_iou(first, second, samples):
    """
    IoU estimated by testing a grid of points covering both boxes
    """
    corners = np.concatenate([first.corners(), second.corners()])
    low = corners.min(axis=0)
    high = corners.max(axis=0)
    step = (high - low) / samples
    xs = low[0] + (np.arange(samples) + 0.5) * step[0]
    ys = low[1] + (np.arange(samples) + 0.5) * step[1]
    grid_x, grid_y = np.meshgrid(xs, ys)
    in_first = first.contains(grid_x, grid_y)
    in_second = second.contains(grid_x, grid_y)
    union = np.count_nonzero(in_first | in_second)
    return np.count_nonzero(in_first & in_second) / union


def _random_box(rng):
    return BoxBEV(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(1.0, 2.5),
                  rng.uniform(2.5, 5.0), rng.uniform(-math.pi, math.pi))


## Responsible for testing rotated_iou
#
# Note:
# + = positive test, (valid input handling)
# - = stress test, (invalid input handling)
#
# ==Current Tests==
# + Test identical boxes give 1
# + Test disjoint boxes give 0
# + Test unit squares half overlapping give 1/3
# + Test a 45 degree square against a fine raster
# + Test random pairs against a raster
# + Test symmetry and rigid motion invariance
# + Test touching boxes give 0
# + Test the pairwise matrix
# - Test clipping against a polygon that misses entirely
#
class Test_Rotated_IoU(unittest.TestCase):


    ## Same box
    #
    def test_identical(self):

        box = BoxBEV(3.0, -1.0, 1.9, 4.3, 0.6)
        assert abs(rotated_iou(box, box) - 1.0) < 1e-12


    ## Far apart
    #
    def test_disjoint(self):

        assert rotated_iou(BoxBEV(0.0, 0.0, 2.0, 4.0, 0.0), BoxBEV(10.0, 0.0, 2.0, 4.0, 0.3)) == 0.0


    ## Offset 0.5
    #
    def test_one_third(self):

        first = BoxBEV(0.0, 0.0, 1.0, 1.0, 0.0)
        second = BoxBEV(0.5, 0.0, 1.0, 1.0, 0.0)
        assert abs(rotated_iou(first, second) - 1.0 / 3.0) < 1e-12


    ## Square turned by 45 degrees
    #
    def test_rotated_square(self):

        first = BoxBEV(0.0, 0.0, 1.0, 1.0, 0.0)
        second = BoxBEV(0.0, 0.0, 1.0, 1.0, math.pi / 4.0)
        exact = 2.0 * (math.sqrt(2.0) - 1.0)
        assert abs(rotated_iou(first, second) - exact / (2.0 - exact)) < 1e-12
        assert abs(rotated_iou(first, second) - _raster_iou(first, second, 2000)) < 1e-3


    ## Random pairs
    #
    def test_raster_oracle(self):

        rng = np.random.default_rng(0)
        for _ in range(100):
            first = _random_box(rng)
            second = _random_box(rng)
            if rotated_iou(first, second) == 0.0:
                continue
            assert abs(rotated_iou(first, second) - _raster_iou(first, second, 1000)) < 2e-3


    ## Symmetric and rigid
    #
    def test_invariance(self):

        rng = np.random.default_rng(1)
        frame = Pose2(12.0, -7.0, 1.1)
        origin = Pose2(0.0, 0.0, 0.0)
        for _ in range(50):
            first = _random_box(rng)
            second = _random_box(rng)
            value = rotated_iou(first, second)
            assert abs(value - rotated_iou(second, first)) < 1e-12
            moved = rotated_iou(first.to_frame(origin, frame), second.to_frame(origin, frame))
            assert abs(value - moved) < 1e-9
            assert 0.0 <= value <= 1.0


    ## Sharing an edge only
    #
    def test_touching(self):

        first = BoxBEV(0.0, 0.0, 2.0, 4.0, 0.0)
        second = BoxBEV(4.0, 0.0, 2.0, 4.0, 0.0)
        assert rotated_iou(first, second) < 1e-12


    ## Matrix
    #
    def test_matrix(self):

        boxes = [BoxBEV(0.0, 0.0, 1.0, 1.0, 0.0), BoxBEV(0.5, 0.0, 1.0, 1.0, 0.0)]
        matrix = iou_matrix(boxes, boxes[:1])
        assert matrix.shape == (2, 1)
        assert abs(matrix[1, 0] - 1.0 / 3.0) < 1e-12
        assert iou_matrix([], boxes).shape == (0, 2)


    ## Empty clip
    #
    def test_empty_clip(self):

        square = BoxBEV(0.0, 0.0, 1.0, 1.0, 0.0).corners()
        far = BoxBEV(5.0, 5.0, 1.0, 1.0, 0.0).corners()
        assert clip_polygon(square, far) == []
        assert polygon_area(np.zeros((2, 2))) == 0.0
        assert abs(polygon_area(square) - 1.0) < 1e-12
        assert intersection_area(BoxBEV(0.0, 0.0, 1.0, 1.0, 0.0), BoxBEV(5.0, 5.0, 1.0, 1.0, 0.0)) == 0.0


if __name__ == '__main__':
    unittest.main()
