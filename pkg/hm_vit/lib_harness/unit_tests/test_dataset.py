#!/usr/bin/env python3


#######################################################
# Unit tests for the synthetic dataset on disk
#
#######################################################


import os
import tempfile
import unittest

import numpy as np

## Functions and classes to tests
#
from ..dataset import SPLITS, split_seeds, agents_for_seed, make_scene, generate_dataset
from ..dataset import load_split, prepare_sample
from ..pipeline import build_grid, sensor_config
from .tiny_profile import tiny_settings
from lib_autodiff.errors import ConfigurationError


## Responsible for testing split seeds and generation
#
# Note:
# + = positive test, (valid input handling)
# - = stress test, (invalid input handling)
#
# ==Current Tests==
# + Test splits never share a seed
# + Test agent counts stay in the configured range
# + Test every split is written with its scene count
# + Test regenerating writes identical bytes
# - Test an unknown split
# - Test loading before generating
#
class Test_Generate_Dataset(unittest.TestCase):


    def setUp(self):

        self.settings = tiny_settings()


    ## Disjoint splits
    #
    def test_disjoint(self):

        seeds = [set(split_seeds(self.settings, split)) for split in SPLITS]
        assert len(seeds[0]) == 3
        assert len(seeds[1]) == 2
        assert len(seeds[2]) == 2
        assert seeds[0].isdisjoint(seeds[1])
        assert seeds[0].isdisjoint(seeds[2])
        assert seeds[1].isdisjoint(seeds[2])

        # Another training seed moves every split
        other = tiny_settings(training={'seed': 1})
        assert set(split_seeds(other, 'train')).isdisjoint(seeds[0] | seeds[1] | seeds[2])


    ## min_agents .. max_agents
    #
    def test_agent_counts(self):

        counts = {agents_for_seed(self.settings, seed) for seed in range(60)}
        assert counts == {2, 3}
        for seed in split_seeds(self.settings, 'val'):
            scene = make_scene(self.settings, seed)
            assert len(scene.agents) == agents_for_seed(self.settings, seed)
            assert scene.seed == seed


    ## Files per split
    #
    def test_generate(self):

        with tempfile.TemporaryDirectory() as folder:
            counts = generate_dataset(self.settings, folder)
            assert counts == {'train': 3, 'val': 2, 'test': 2}
            for split in SPLITS:
                scenes = load_split(folder, split)
                assert len(scenes) == counts[split]
                assert [scene.seed for scene in scenes] == split_seeds(self.settings, split)


    ## Reproducible bytes
    #
    def test_regenerate(self):

        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            generate_dataset(self.settings, first)
            generate_dataset(self.settings, second)
            for split in SPLITS:
                names = sorted(os.listdir(os.path.join(first, split)))
                assert names == sorted(os.listdir(os.path.join(second, split)))
                for name in names:
                    with open(os.path.join(first, split, name), 'rb') as file:
                        left = file.read()
                    with open(os.path.join(second, split, name), 'rb') as file:
                        right = file.read()
                    assert left == right


    ## Unknown split
    #
    def test_bad_split(self):

        with self.assertRaises(ConfigurationError):
            split_seeds(self.settings, 'holdout')


    ## Nothing generated
    #
    def test_missing(self):

        with tempfile.TemporaryDirectory() as folder:
            with self.assertRaises(ConfigurationError):
                load_split(folder, 'train')


## Responsible for testing prepare_sample
#
# Note:
# + = positive test, (valid input handling)
# - = stress test, (invalid input handling)
#
# ==Current Tests==
# + Test every agent gets an observation on the ego grid
# + Test targets match the ground truth
#
class Test_Prepare_Sample(unittest.TestCase):


    ## Shapes
    #
    def test_shapes(self):

        settings = tiny_settings()
        grid = build_grid(settings)
        scene = make_scene(settings, split_seeds(settings, 'train')[0])
        sample = prepare_sample(scene, grid, sensor_config(settings))

        assert len(sample.observations) == len(scene.agents)
        for observation in sample.observations:
            assert observation.shape == (8, 8, 2)
            assert np.all(np.isfinite(observation))
        assert sample.cls_target.shape == (8, 8, 1)
        assert sample.reg_target.shape == (8, 8, 6)
        assert sample.pos_mask.shape == (8, 8)
        assert bool(sample.pos_mask.any()) == (len(sample.truths) > 0)
        assert np.array_equal(sample.cls_target[..., 0] > 0, sample.pos_mask)


if __name__ == '__main__':
    unittest.main()
