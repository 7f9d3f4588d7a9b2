#!/usr/bin/env python3


"""

Reading and writing scenario files

UTF-8 JSON, keys sorted, one scene per file:

    {"seed": 7, "extent_m": 50.0,
     "vehicles": [{"cx":.., "cy":.., "w":.., "l":.., "yaw":..}, ..],
     "agents": [{"id": 0, "modality": "lidar", "x":.., "y":.., "yaw":..}, ..]}

Values were quantised when the scene was generated, so the shortest float
repr written here reads back to the same double

"""


import json
import os

from lib_autodiff.errors import ConfigurationError
from lib_detection.boxes import BoxBEV
from lib_geometry.pose import Pose2
from lib_scene.scenario import Scenario, AgentSpec


def scenario_to_dict(scenario):
    return {
        'seed': scenario.seed,
        'extent_m': scenario.extent,
        'vehicles': [
            {'cx': box.cx, 'cy': box.cy, 'w': box.w, 'l': box.l, 'yaw': box.yaw}
            for box in scenario.vehicles
        ],
        'agents': [
            {'id': agent.agent_id, 'modality': agent.modality.value,
             'x': agent.pose.x, 'y': agent.pose.y, 'yaw': agent.pose.yaw}
            for agent in scenario.agents
        ],
    }


def scenario_from_dict(data):
    try:
        return Scenario(
            seed=int(data['seed']),
            extent=float(data['extent_m']),
            vehicles=[
                BoxBEV(item['cx'], item['cy'], item['w'], item['l'], item['yaw'])
                for item in data['vehicles']
            ],
            agents=[
                AgentSpec(int(item['id']), item['modality'], Pose2(item['x'], item['y'], item['yaw']))
                for item in data['agents']
            ],
        )
    except (KeyError, TypeError, ValueError) as msg:
        raise ConfigurationError(f"Malformed scenario record: {msg}") from msg


def save_scenario(path, scenario):
    with open(path, 'w', encoding='utf-8') as file:
        json.dump(scenario_to_dict(scenario), file, sort_keys=True, indent=1)
        file.write('\n')


def load_scenario(path):
    with open(path, 'r', encoding='utf-8') as file:
        return scenario_from_dict(json.load(file))


def scenario_path(directory, split, index):
    return os.path.join(directory, split, f"scene_{index:05d}.json")
