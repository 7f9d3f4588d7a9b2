#!/usr/bin/env python3


"""

Static pictures of a scene

The SVG shows the ego's BEV extent from above. Meters in the ego frame map
to pixels as

    px = (x + extent_x / 2) * scale
    py = (extent_y / 2 - y) * scale

so +x points right, +y points up and the ego sits in the middle. Ground
truth is green, detections red, every agent is a triangle pointing along
its heading inside a dashed disc of its sensor range.

The PNG preview shows the per cell L2 norm of a feature map, brightest
cell white, with +y up like the SVG.

"""


import math
import os

import numpy as np
from jinja2 import Environment, FileSystemLoader
from PIL import Image

from lib_autodiff.tensor import Tensor
from lib_geometry.pose import apply_affine, rotation


TEMPLATE_DIRECTORY = os.path.join(os.path.dirname(os.path.realpath(__file__)), 'templates')

SCENE_TEMPLATE = 'bev_scene.svg.j2'

PIXELS_PER_METER = 8.0

CELL_PIXELS = 8

AGENT_COLORS = {'camera': '#1f5fbf', 'lidar': '#8a2be2'}

# Agent marker: nose ahead of the pose, two rear corners, meters
MARKER = np.array([[2.5, 0.0], [-1.5, 1.2], [-1.5, -1.2]])


def to_pixels(points, grid, scale=PIXELS_PER_METER):
    """
    Ego frame meters to image pixels, points shaped [.., 2]
    """
    points = np.asarray(points, dtype=np.float64)
    px = (points[..., 0] + grid.extent_x / 2.0) * scale
    py = (grid.extent_y / 2.0 - points[..., 1]) * scale
    return np.stack([px, py], axis=-1)


def _points_attr(pixels):
    return ' '.join(f"{x:.3f},{y:.3f}" for x, y in pixels)


def _environment():
    return Environment(
        loader=FileSystemLoader(TEMPLATE_DIRECTORY),
        autoescape=True,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )


def render_scene_svg(scenario, detections, truths, grid, fov_radius, scale=PIXELS_PER_METER, title='BEV scene'):
    """
    Builds the SVG text of one scene in its ego's frame

    Inputs:
        scenario: Scenario whose agents are drawn

        detections: list of Detection in the ego frame

        truths: list of BoxBEV in the ego frame

        grid: The ego's BevGrid, sets the drawn extent

        fov_radius: {'camera': meters, 'lidar': meters}

    Returns:
        str
    """
    ego_pose = scenario.ego.pose
    to_ego = ego_pose.from_world()

    agents = []
    for agent in scenario.agents:
        position = apply_affine(to_ego, np.array([agent.pose.x, agent.pose.y]))
        heading = agent.pose.yaw - ego_pose.yaw
        marker = MARKER @ rotation(heading).T + position
        center = to_pixels(position, grid, scale)
        agents.append({
            'agent_id': agent.agent_id,
            'modality': agent.modality.value,
            'color': AGENT_COLORS[agent.modality.value],
            'x': f"{center[0]:.3f}",
            'y': f"{center[1]:.3f}",
            'fov': f"{fov_radius[agent.modality.value] * scale:.3f}",
            'marker': _points_attr(to_pixels(marker, grid, scale)),
        })

    return _environment().get_template(SCENE_TEMPLATE).render(
        title=title,
        width=f"{grid.extent_x * scale:.3f}",
        height=f"{grid.extent_y * scale:.3f}",
        agents=agents,
        truths=[_points_attr(to_pixels(box.corners(), grid, scale)) for box in truths],
        detections=[
            {'points': _points_attr(to_pixels(item.box.corners(), grid, scale)), 'score': f"{item.score:.3f}"}
            for item in detections
        ],
    )


def write_scene_svg(path, scenario, detections, truths, grid, fov_radius, **kwargs):
    text = render_scene_svg(scenario, detections, truths, grid, fov_radius, **kwargs)
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        file.write(text)


def energy_image(feature, cell_pixels=CELL_PIXELS):
    """
    Inputs:
        feature: Tensor or array [H, W, C]

    Returns:
        PIL grayscale Image of the per cell norm
    """
    values = feature.data if isinstance(feature, Tensor) else np.asarray(feature, dtype=np.float64)
    energy = np.sqrt(np.sum(values * values, axis=-1))
    peak = float(energy.max()) if energy.size else 0.0
    if peak > 0.0 and math.isfinite(peak):
        energy = energy / peak
    else:
        energy = np.zeros_like(energy)

    pixels = np.round(np.flipud(energy) * 255.0).astype(np.uint8)
    image = Image.fromarray(pixels)
    height, width = pixels.shape
    return image.resize((width * cell_pixels, height * cell_pixels), Image.Resampling.NEAREST)


def write_energy_png(path, feature, cell_pixels=CELL_PIXELS):
    energy_image(feature, cell_pixels).save(path, format='PNG')
