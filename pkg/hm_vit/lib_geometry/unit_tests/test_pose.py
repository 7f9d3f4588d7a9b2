#!/usr/bin/env python3


#######################################################
# Unit tests for poses and affine helpers
#
#######################################################


import unittest
import math

import numpy as np

## Functions and classes to tests
#
from ..pose import Pose2, normalize_angle, relative_transform, compose_affine
from ..pose import invert_affine, apply_affine, identity_affine
from lib_autodiff.errors import NonFiniteError

## Responsible for testing SE(2) pose algebra
#
# Note:
# + = positive test, (valid input handling)
# - = stress test, (invalid input handling)
#
# ==Current Tests==
# + Test yaw normalization into (-pi, pi]
# + Test relative_transform(p, p) is exactly the identity
# + Test a pure translation between frames
# + Test composing both directions gives the identity
# + Test relative_transform agrees with going through the world frame
# + Test invert_affine
# - Test non-finite poses are rejected
#
class Test_Pose(unittest.TestCase):


    ## Normalization
    #
    def test_normalize(self):

        assert normalize_angle(math.pi) == math.pi
        assert normalize_angle(-math.pi) == math.pi
        assert normalize_angle(0.25) == 0.25
        assert abs(normalize_angle(3.0 * math.pi / 2.0) + math.pi / 2.0) < 1e-12
        assert Pose2(0.0, 0.0, 7.0).yaw <= math.pi


    ## Self transform
    #
    def test_identity(self):

        pose = Pose2(3.2, -1.7, 0.83)
        assert np.array_equal(relative_transform(pose, pose), identity_affine())


    ## Receiver at origin, sender at (1, 0)
    #
    def test_translation(self):

        transform = relative_transform(Pose2(0.0, 0.0, 0.0), Pose2(1.0, 0.0, 0.0))
        assert np.array_equal(apply_affine(transform, [0.0, 0.0]), np.array([-1.0, 0.0]))
        assert np.array_equal(apply_affine(transform, [2.5, 4.0]), np.array([1.5, 4.0]))


    ## Composition oracle
    #
    def test_compose_both_ways(self):

        a = Pose2(4.0, -2.0, 0.6)
        b = Pose2(-7.5, 3.3, -2.1)
        composed = compose_affine(relative_transform(a, b), relative_transform(b, a))
        assert np.max(np.abs(composed - identity_affine())) < 1e-12


    ## Through the world frame
    #
    def test_world_route(self):

        receiver = Pose2(1.0, 2.0, 0.4)
        sender = Pose2(-3.0, 0.5, -1.2)
        point = np.array([2.0, -1.0])

        world = apply_affine(receiver.to_world(), point)
        expected = apply_affine(sender.from_world(), world)
        assert np.allclose(apply_affine(relative_transform(receiver, sender), point), expected, atol=1e-12)


    ## Inverse
    #
    def test_invert(self):

        transform = relative_transform(Pose2(1.0, 2.0, 0.4), Pose2(5.0, -1.0, 2.0))
        composed = compose_affine(invert_affine(transform), transform)
        assert np.allclose(composed, identity_affine(), atol=1e-12)


    ## Non-finite
    #
    def test_non_finite(self):

        with self.assertRaises(NonFiniteError):
            Pose2(float('nan'), 0.0, 0.0)


if __name__ == '__main__':
    unittest.main()
