#!/usr/bin/env python3


"""

Synthetic multi-agent driving scenes

A scene is a square map holding non-overlapping vehicles (the objects to
detect) and one or more connected agents. Agent 0 is the ego. Every real
number is quantised to QUANTUM_DECIMALS places when the scene is made, so
scenes survive a trip through a text file unchanged.

"""


import math
from dataclasses import dataclass, field, replace
from typing import List

import numpy as np

from lib_autodiff.errors import PlacementError, ConfigurationError
from lib_detection.boxes import BoxBEV
from lib_detection.rotated_iou import rotated_iou
from lib_fusion.modality import Modality, parse_modality
from lib_geometry.pose import Pose2


VEHICLE_WIDTH_RANGE = (1.8, 2.2)
VEHICLE_LENGTH_RANGE = (4.0, 5.0)

# Extra spacing kept around every vehicle when placing the next object
VEHICLE_GAP = 0.5
AGENT_CLEARANCE = 1.5
AGENT_SPACING = 5.0

# Agents are placed inside this central fraction of the map
AGENT_ZONE = 0.6

QUANTUM_DECIMALS = 6

MAX_ATTEMPTS = 200
MAX_RESTARTS = 5

REGIMES = ('v2v-c', 'v2v-l', 'v2v-h')


def quantize(value):
    return round(float(value), QUANTUM_DECIMALS)


@dataclass(frozen=True)
class AgentSpec:
    agent_id: int
    modality: Modality
    pose: Pose2

    def __post_init__(self):
        object.__setattr__(self, 'modality', parse_modality(self.modality))


@dataclass(frozen=True)
class Scenario:
    """
    Attributes:
        seed: The seed the scene was generated from

        extent: Side of the square map in meters, centered on the origin

        vehicles: list of BoxBEV in the world frame

        agents: list of AgentSpec, agents[0] is the ego
    """
    seed: int
    extent: float
    vehicles: List[BoxBEV] = field(default_factory=list)
    agents: List[AgentSpec] = field(default_factory=list)

    def __post_init__(self):
        if not self.agents:
            raise PlacementError("A scenario needs at least one agent")

    @property
    def ego(self):
        return self.agents[0]

    def modalities(self):
        return [agent.modality for agent in self.agents]


def _lidar_count(ratio, count):
    if not 0.0 <= ratio <= 1.0:
        raise ConfigurationError(f"LiDAR ratio must be in [0, 1], got {ratio}")
    return int(math.floor(ratio * count + 0.5))


def assign_modalities(rng, n_agents, modality_mix, ego_modality=None):
    """
    Draws which agents carry LiDAR

    round(modality_mix * n) agents are LiDAR, chosen by a random
    permutation. With ego_modality set the ego is fixed and the mix applies
    to the collaborators only
    """
    ego_modality = None if ego_modality is None else parse_modality(ego_modality)
    pool = n_agents if ego_modality is None else n_agents - 1
    lidar = np.zeros(pool, dtype=bool)
    lidar[:_lidar_count(modality_mix, pool)] = True
    lidar = lidar[rng.permutation(pool)]
    labels = [Modality.LIDAR if flag else Modality.CAMERA for flag in lidar]
    if ego_modality is not None:
        labels = [ego_modality] + labels
    return labels


def _draw_vehicle(rng, half_span):
    return BoxBEV(
        quantize(rng.uniform(-half_span, half_span)),
        quantize(rng.uniform(-half_span, half_span)),
        quantize(rng.uniform(*VEHICLE_WIDTH_RANGE)),
        quantize(rng.uniform(*VEHICLE_LENGTH_RANGE)),
        quantize(rng.uniform(-math.pi / 2.0, math.pi / 2.0)),
    )


def _inflated(box, margin):
    return BoxBEV(box.cx, box.cy, box.w + 2.0 * margin, box.l + 2.0 * margin, box.yaw)


def _place_vehicles(rng, extent, n_vehicles):
    half_span = extent / 2.0 - VEHICLE_LENGTH_RANGE[1] / 2.0
    vehicles = []
    for _ in range(n_vehicles):
        for _ in range(MAX_ATTEMPTS):
            candidate = _draw_vehicle(rng, half_span)
            padded = _inflated(candidate, VEHICLE_GAP)
            if all(rotated_iou(padded, other) == 0.0 for other in vehicles):
                vehicles.append(candidate)
                break
        else:
            return None
    return vehicles


def _place_agents(rng, extent, n_agents, vehicles):
    half_zone = AGENT_ZONE * extent / 2.0
    padded = [_inflated(vehicle, AGENT_CLEARANCE) for vehicle in vehicles]
    poses = []
    for _ in range(n_agents):
        for _ in range(MAX_ATTEMPTS):
            x = quantize(rng.uniform(-half_zone, half_zone))
            y = quantize(rng.uniform(-half_zone, half_zone))
            yaw = quantize(rng.uniform(-math.pi, math.pi))
            if any(bool(box.contains(x, y)) for box in padded):
                continue
            if any(math.hypot(x - pose.x, y - pose.y) < AGENT_SPACING for pose in poses):
                continue
            poses.append(Pose2(x, y, yaw))
            break
        else:
            return None
    return poses


def generate_scenario(seed, n_vehicles, n_agents, modality_mix, extent=50.0, ego_modality=None):
    """
    Builds one scene, deterministic per seed

    Inputs:
        seed: Integer seed

        n_vehicles: Number of vehicles, may be 0

        n_agents: Number of connected agents, at least 1

        modality_mix: Fraction of LiDAR agents in [0, 1]

        extent: Map side in meters

        ego_modality: Optional fixed modality of agent 0

    Returns:
        Scenario

    Raises:
        PlacementError if the objects cannot be placed after retries
    """
    if n_agents < 1:
        raise PlacementError("A scenario needs at least one agent")
    if n_vehicles < 0:
        raise PlacementError(f"Negative vehicle count: {n_vehicles}")

    rng = np.random.default_rng(seed)
    for restart in range(MAX_RESTARTS):
        vehicles = _place_vehicles(rng, extent, n_vehicles)
        if vehicles is None:
            continue
        poses = _place_agents(rng, extent, n_agents, vehicles)
        if poses is None:
            continue
        labels = assign_modalities(rng, n_agents, modality_mix, ego_modality)
        agents = [AgentSpec(index, label, pose) for index, (label, pose) in enumerate(zip(labels, poses))]
        return Scenario(seed=seed, extent=float(extent), vehicles=vehicles, agents=agents)

    raise PlacementError(
        f"Could not place {n_vehicles} vehicles and {n_agents} agents on a {extent} m map "
        f"after {MAX_RESTARTS} restarts (seed {seed})"
    )


def apply_regime(scenario, regime, ego_modality=None, lidar_ratio=None, n_agents=None):
    """
    Re-labels agent modalities for an evaluation setting

    Inputs:
        scenario: Scenario

        regime: 'v2v-c' (all camera), 'v2v-l' (all LiDAR) or 'v2v-h' (mixed)

        ego_modality: For 'v2v-h', forces the ego's modality

        lidar_ratio: For 'v2v-h', the first round(ratio * (n-1))
        collaborators become LiDAR and the rest camera. Without it the
        generated labels are kept

        n_agents: Keep only the first n agents

    Returns:
        A new Scenario
    """
    agents = list(scenario.agents)
    if n_agents is not None:
        if n_agents < 1:
            raise ConfigurationError(f"Need at least one agent, got {n_agents}")
        agents = agents[:n_agents]

    if regime == 'v2v-c':
        labels = [Modality.CAMERA] * len(agents)
    elif regime == 'v2v-l':
        labels = [Modality.LIDAR] * len(agents)
    elif regime == 'v2v-h':
        labels = [agent.modality for agent in agents]
        if ego_modality is not None:
            labels[0] = parse_modality(ego_modality)
        if lidar_ratio is not None:
            lidar = _lidar_count(lidar_ratio, len(agents) - 1)
            labels[1:] = [Modality.LIDAR if index < lidar else Modality.CAMERA
                          for index in range(len(agents) - 1)]
    else:
        raise ConfigurationError(f"Unknown regime: {regime}")

    agents = [replace(agent, modality=label) for agent, label in zip(agents, labels)]
    return replace(scenario, agents=agents)


def ego_ground_truth(scenario, ego_pose, grid):
    """
    Vehicles in the ego frame whose centers fall inside the ego's BEV
    extent

    Returns:
        list of BoxBEV
    """
    boxes = []
    for vehicle in scenario.vehicles:
        local = vehicle.to_frame(Pose2(0.0, 0.0, 0.0), ego_pose)
        if bool(grid.contains(local.cx, local.cy)):
            boxes.append(local)
    return boxes
