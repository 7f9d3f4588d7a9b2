#!/usr/bin/env python3


"""

LiDAR-like observation by 2D ray casting against vehicle outlines

Rays leave the agent at evenly spaced headings. Each ray stops at the
first vehicle edge it meets; only that hit is recorded, so anything behind
it stays unobserved.

Observation channels:
    0: occupancy, 1 at cells holding a ray hit
    1: intensity, 1 - 0.5 * range / max_range at the hit, nearer is brighter

"""


import math

import numpy as np

from lib_autodiff.errors import ConfigurationError
from lib_geometry.pose import apply_affine


MIN_RAYS = 90

OBSERVATION_CHANNELS = 2

PARALLEL_EPS = 1e-12


def vehicle_segments(vehicles):
    """
    Outline edges of every vehicle

    Returns:
        (starts [S, 2], ends [S, 2], owner [S]) where owner is the index of
        the vehicle an edge belongs to
    """
    if not vehicles:
        return np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0, dtype=int)
    corners = np.stack([vehicle.corners() for vehicle in vehicles])
    starts = corners.reshape(-1, 2)
    ends = np.roll(corners, -1, axis=1).reshape(-1, 2)
    owner = np.repeat(np.arange(len(vehicles)), 4)
    return starts, ends, owner


def ray_headings(pose, n_rays):
    return pose.yaw + 2.0 * math.pi * np.arange(n_rays) / n_rays


def cast_rays(origin, headings, starts, ends, max_range):
    """
    First hit of every ray against a set of segments

    Solves origin + t * d = start + u * (end - start) for all ray/segment
    pairs at once

    Returns:
        (ranges [R], hit_segment [R]); rays that hit nothing within
        max_range get range inf and segment -1
    """
    headings = np.asarray(headings, dtype=float)
    ranges = np.full(headings.shape, np.inf)
    hit_segment = np.full(headings.shape, -1, dtype=int)
    if len(starts) == 0:
        return ranges, hit_segment

    directions = np.stack([np.cos(headings), np.sin(headings)], axis=-1)
    edges = ends - starts
    offsets = starts - np.asarray(origin, dtype=float)

    # 2D cross products, rays along axis 0, segments along axis 1
    denom = directions[:, None, 0] * edges[None, :, 1] - directions[:, None, 1] * edges[None, :, 0]
    t_num = offsets[None, :, 0] * edges[None, :, 1] - offsets[None, :, 1] * edges[None, :, 0]
    u_num = offsets[None, :, 0] * directions[:, None, 1] - offsets[None, :, 1] * directions[:, None, 0]

    usable = np.abs(denom) > PARALLEL_EPS
    safe = np.where(usable, denom, 1.0)
    t = t_num / safe
    u = u_num / safe
    hits = usable & (t >= 0.0) & (u >= 0.0) & (u <= 1.0) & (t <= max_range)
    t = np.where(hits, t, np.inf)

    hit_segment = np.argmin(t, axis=1)
    ranges = t[np.arange(len(headings)), hit_segment]
    hit_segment = np.where(np.isfinite(ranges), hit_segment, -1)
    return ranges, hit_segment


def raycast_occupancy(scenario, pose, grid, n_rays=720, max_range=50.0):
    """
    LiDAR-like observation of a scene from one agent

    Inputs:
        scenario: Scenario

        pose: Pose2 of the observing agent

        grid: BevGrid of the observation raster (agent frame)

        n_rays: Number of rays over the full circle, at least MIN_RAYS

        max_range: Sensor range in meters

    Returns:
        float array [H, W, 2] with values in [0, 1]
    """
    if n_rays < MIN_RAYS:
        raise ConfigurationError(f"Ray casting needs at least {MIN_RAYS} rays, got {n_rays}")
    if not max_range > 0.0:
        raise ConfigurationError(f"Sensor range must be positive, got {max_range}")

    observation = np.zeros((grid.height, grid.width, OBSERVATION_CHANNELS))
    starts, ends, _ = vehicle_segments(scenario.vehicles)
    headings = ray_headings(pose, n_rays)
    ranges, _ = cast_rays((pose.x, pose.y), headings, starts, ends, max_range)

    hit = np.isfinite(ranges)
    if not hit.any():
        return observation

    world = np.stack([
        pose.x + ranges[hit] * np.cos(headings[hit]),
        pose.y + ranges[hit] * np.sin(headings[hit]),
    ], axis=-1)
    local = apply_affine(pose.from_world(), world)
    rows, cols = grid.cell_of(local[:, 0], local[:, 1])
    inside = (rows >= 0) & (rows < grid.height) & (cols >= 0) & (cols < grid.width)

    intensity = 1.0 - 0.5 * ranges[hit] / max_range
    observation[rows[inside], cols[inside], 0] = 1.0
    np.maximum.at(observation[:, :, 1], (rows[inside], cols[inside]), intensity[inside])
    return observation
