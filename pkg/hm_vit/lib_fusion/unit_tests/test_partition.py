#!/usr/bin/env python3


#######################################################
# Unit tests for the local / global partitions
#
#######################################################


import unittest

import numpy as np

## Functions and classes to tests
#
from ..partition import partition, unpartition, partition_local, partition_global, partition_mask
from lib_autodiff.tensor import Tensor
from lib_autodiff.errors import ConfigurationError

## Responsible for testing partition / unpartition
#
# Note:
# + = positive test, (valid input handling)
# - = stress test, (invalid input handling)
#
# ==Current Tests==
# + Test a single window is the row-major flatten
# + Test every layout inverts bitwise, Tensor and numpy
# + Test the local window / agent / offset index arithmetic
# + Test the global sequence for offset (0,0)
# + Test strict sequences never mix agents
# + Test masks partition like features
# - Test a window that does not tile the grid
#
class Test_Partition(unittest.TestCase):


    ## N=1, H=W=P
    #
    def test_single_window(self):

        features = np.arange(12.0).reshape(1, 2, 2, 3)
        out = partition_local(Tensor(features), 2)
        assert out.shape == (1, 4, 3)
        assert np.array_equal(out.data[0], features.reshape(4, 3))


    ## Inverse
    #
    def test_roundtrip(self):

        rng = np.random.default_rng(0)
        features = rng.standard_normal((3, 4, 6, 5))
        for layout in ('local', 'global', 'strict'):
            parts = partition(Tensor(features), 2, layout)
            back = unpartition(parts, 3, 4, 6, 2, layout)
            assert np.array_equal(back.data, features)

            parts = partition(features, 2, layout)
            assert np.array_equal(unpartition(parts, 3, 4, 6, 2, layout), features)


    ## Local index arithmetic
    #
    def test_local_index(self):

        rng = np.random.default_rng(1)
        features = rng.standard_normal((2, 4, 4, 3))
        out = partition_local(features, 2)

        assert out.shape == (4, 8, 3)
        # window 3 is the bottom right window, token 7 is agent 1 offset (1,1)
        assert np.array_equal(out[3, 7], features[1, 3, 3])


    ## Global offset (0,0)
    #
    def test_global_sequence(self):

        features = np.arange(16.0).reshape(1, 4, 4, 1)
        out = partition_global(features, 2)

        assert out.shape == (4, 4, 1)
        expected = [features[0, 0, 0, 0], features[0, 0, 2, 0], features[0, 2, 0, 0], features[0, 2, 2, 0]]
        assert np.array_equal(out[0, :, 0], np.array(expected))


    ## Strict layout keeps agents apart
    #
    def test_strict_no_mixing(self):

        agents = 2
        features = np.broadcast_to(np.arange(agents, dtype=float)[:, None, None, None], (agents, 4, 4, 2))
        out = partition_global(features, 2, strict=True)

        assert out.shape == (agents * 4, 4, 2)
        for sequence in out:
            assert len(np.unique(sequence)) == 1


    ## Mask layout
    #
    def test_mask(self):

        mask = np.zeros((4, 4), dtype=bool)
        mask[3, 3] = True
        parts = partition_mask(mask, 2, 'local')
        assert parts.shape == (4, 4)
        assert parts[3, 3]
        assert parts.sum() == 1


    ## Divisibility
    #
    def test_bad_window(self):

        with self.assertRaises(ConfigurationError):
            partition_local(np.zeros((1, 5, 4, 2)), 2)
        with self.assertRaises(ConfigurationError):
            partition_global(np.zeros((1, 4, 6, 2)), 4)


if __name__ == '__main__':
    unittest.main()
