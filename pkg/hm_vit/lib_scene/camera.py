#!/usr/bin/env python3


"""

Camera-like observation

A camera sees the same vehicles a ray would reach, but only within its
shorter range, and it localizes them poorly: each visible vehicle is
drawn as a Gaussian blob whose center is jittered with a standard
deviation that grows linearly with distance,

    sigma(d) = sigma0 * (1 + d / d0)

Observation channels:
    0: weak occupancy evidence, 0.3 * blob
    1: strong semantic evidence, blob

"""


import numpy as np

from lib_autodiff.errors import ConfigurationError
from lib_geometry.pose import apply_affine
from lib_scene.raycast import vehicle_segments, ray_headings, cast_rays, MIN_RAYS, OBSERVATION_CHANNELS


OCCUPANCY_GAIN = 0.3

# Blob spread as a fraction of the vehicle length
BLOB_SCALE = 0.35


def camera_jitter(distance, sigma0, d0):
    """
    Standard deviation of the position jitter at a distance
    """
    return sigma0 * (1.0 + distance / d0)


def sample_jitter(rng, distance, sigma0, d0):
    """
    One 2D jitter offset in meters
    """
    return rng.normal(0.0, camera_jitter(distance, sigma0, d0), size=2)


def visible_vehicles(scenario, pose, max_range, n_rays=720):
    """
    Indices of vehicles hit first by at least one ray within max_range
    """
    starts, ends, owner = vehicle_segments(scenario.vehicles)
    _, hit_segment = cast_rays((pose.x, pose.y), ray_headings(pose, n_rays), starts, ends, max_range)
    return sorted(set(owner[hit_segment[hit_segment >= 0]].tolist()))


def camera_observe(scenario, pose, grid, max_range_cam=30.0, noise=0.5, noise_distance=20.0,
                   n_rays=720, agent_index=0):
    """
    Camera-like observation of a scene from one agent

    Inputs:
        scenario: Scenario

        pose: Pose2 of the observing agent

        grid: BevGrid of the observation raster (agent frame)

        max_range_cam: Camera range in meters

        noise: sigma0 of the jitter law, 0 disables jitter

        noise_distance: d0 of the jitter law

        n_rays: Rays used for the visibility test

        agent_index: Index of the observing agent, keys the jitter draws

    Returns:
        float array [H, W, 2] with values in [0, 1]
    """
    if n_rays < MIN_RAYS:
        raise ConfigurationError(f"Visibility test needs at least {MIN_RAYS} rays, got {n_rays}")
    if not max_range_cam > 0.0 or not noise_distance > 0.0 or noise < 0.0:
        raise ConfigurationError("Camera range, noise and noise distance must be positive")

    observation = np.zeros((grid.height, grid.width, OBSERVATION_CHANNELS))
    xs, ys = grid.cell_centers()
    blob = np.zeros((grid.height, grid.width))

    to_local = pose.from_world()
    for index in visible_vehicles(scenario, pose, max_range_cam, n_rays):
        vehicle = scenario.vehicles[index]
        center = apply_affine(to_local, np.array([vehicle.cx, vehicle.cy]))
        distance = float(np.hypot(center[0], center[1]))
        if noise > 0.0:
            rng = np.random.default_rng([scenario.seed, agent_index, index])
            center = center + sample_jitter(rng, distance, noise, noise_distance)

        spread = BLOB_SCALE * vehicle.l
        squared = (xs - center[0]) ** 2 + (ys - center[1]) ** 2
        blob = np.maximum(blob, np.exp(-0.5 * squared / (spread * spread)))

    blob = np.where(np.hypot(xs, ys) <= max_range_cam, blob, 0.0)
    observation[:, :, 0] = OCCUPANCY_GAIN * blob
    observation[:, :, 1] = blob
    return observation

