#!/usr/bin/env python3


"""

Synthetic dataset on disk

    <out>/train/scene_00000.json ...
    <out>/val/...
    <out>/test/...

Each split draws its scene seeds from its own disjoint block, so no scene
appears in two splits. The number of agents per scene is drawn from the
scene seed as well, which keeps a whole split reproducible from the
settings alone.

"""


import os
from dataclasses import dataclass
from typing import List

import numpy as np

from lib_autodiff.errors import ConfigurationError
from lib_detection.targets import assign_targets
from lib_scene.scenario import generate_scenario, ego_ground_truth
from lib_scene.scenario_io import save_scenario, load_scenario, scenario_path
from lib_scene.sensors import observe


SPLITS = ('train', 'val', 'test')

# Seeds of split k start at base + k * SPLIT_STRIDE
SPLIT_STRIDE = 1000000


def split_seeds(settings, split):
    """
    Scene seeds of one split

    Returns:
        list of int
    """
    if split not in SPLITS:
        raise ConfigurationError(f"Unknown split: {split}")
    count = getattr(settings.dataset, f"{split}_scenes")
    if count > SPLIT_STRIDE:
        raise ConfigurationError(f"At most {SPLIT_STRIDE} scenes per split")
    start = settings.training.seed * len(SPLITS) * SPLIT_STRIDE + SPLITS.index(split) * SPLIT_STRIDE
    return list(range(start, start + count))


def agents_for_seed(settings, seed):
    rng = np.random.default_rng([seed, 1])
    return int(rng.integers(settings.dataset.min_agents, settings.dataset.max_agents + 1))


def make_scene(settings, seed):
    dataset = settings.dataset
    return generate_scenario(
        seed,
        dataset.vehicles,
        agents_for_seed(settings, seed),
        dataset.modality_mix,
        extent=dataset.extent,
    )


def generate_dataset(settings, out_dir):
    """
    Writes every split to out_dir

    Returns:
        {split: number of scenes written}
    """
    seen = set()
    counts = {}
    for split in SPLITS:
        seeds = split_seeds(settings, split)
        assert seen.isdisjoint(seeds), f"Split {split} reuses seeds"
        seen.update(seeds)

        os.makedirs(os.path.join(out_dir, split), exist_ok=True)
        for index, seed in enumerate(seeds):
            save_scenario(scenario_path(out_dir, split, index), make_scene(settings, seed))
        counts[split] = len(seeds)
        print(f"[+] {split}: {len(seeds)} scenes")
    return counts


def load_split(data_dir, split):
    """
    Loads every scene file of a split, in file name order
    """
    folder = os.path.join(data_dir, split)
    if not os.path.isdir(folder):
        raise ConfigurationError(
            f"No '{split}' split under {data_dir}. Run the generate command first"
        )
    names = sorted(name for name in os.listdir(folder) if name.endswith('.json'))
    return [load_scenario(os.path.join(folder, name)) for name in names]


@dataclass
class SceneSample:
    """
    One scene ready for the model

    Attributes:
        scenario: Scenario, agent modalities already set for the regime

        observations: list of [H, W, 2] arrays, one per agent

        truths: Ground truth BoxBEV list in the ego frame

        cls_target, reg_target, pos_mask: Head targets on the ego grid
    """
    scenario: object
    observations: List[np.ndarray]
    truths: list
    cls_target: np.ndarray
    reg_target: np.ndarray
    pos_mask: np.ndarray


def prepare_sample(scenario, grid, sensors):
    observations = [observe(scenario, index, grid, sensors) for index in range(len(scenario.agents))]
    truths = ego_ground_truth(scenario, scenario.ego.pose, grid)
    cls_target, reg_target, pos_mask = assign_targets(truths, grid)
    return SceneSample(scenario, observations, truths, cls_target, reg_target, pos_mask)
