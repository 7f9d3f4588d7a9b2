#!/usr/bin/env python3


"""

Routes each agent to the sensor model of its modality

"""


from dataclasses import dataclass

from lib_autodiff.errors import ConfigurationError
from lib_fusion.modality import Modality
from lib_scene.camera import camera_observe
from lib_scene.raycast import raycast_occupancy


@dataclass(frozen=True)
class SensorConfig:
    lidar_range: float = 50.0
    camera_range: float = 30.0
    camera_noise: float = 0.5
    camera_noise_distance: float = 20.0
    n_rays: int = 720

    def __post_init__(self):
        if self.camera_range > self.lidar_range:
            raise ConfigurationError(
                f"Camera range {self.camera_range} m exceeds LiDAR range {self.lidar_range} m"
            )


def observe(scenario, agent_index, grid, sensors):
    """
    What scenario.agents[agent_index] sees with its own sensor

    Returns:
        float array [H, W, 2] in the agent frame
    """
    agent = scenario.agents[agent_index]
    if agent.modality == Modality.LIDAR:
        return raycast_occupancy(scenario, agent.pose, grid, sensors.n_rays, sensors.lidar_range)
    return camera_observe(
        scenario, agent.pose, grid,
        max_range_cam=sensors.camera_range,
        noise=sensors.camera_noise,
        noise_distance=sensors.camera_noise_distance,
        n_rays=sensors.n_rays,
        agent_index=agent_index,
    )
