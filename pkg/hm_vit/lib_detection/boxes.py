#!/usr/bin/env python3


"""

Oriented BEV boxes

A box is (cx, cy, w, l, yaw): center in meters, width across and length
along the heading, heading in radians. Boxes are stored canonically with
w <= l and yaw in (-pi/2, pi/2], since a rectangle is unchanged by a half
turn

"""


import math
from dataclasses import dataclass

import numpy as np

from lib_autodiff.errors import NonFiniteError, DimensionError
from lib_geometry.pose import apply_affine, rotation


def canonical_yaw(yaw):
    """
    Wraps a heading into (-pi/2, pi/2]
    """
    wrapped = math.remainder(yaw, math.pi)
    if wrapped <= -math.pi / 2.0:
        wrapped += math.pi
    return wrapped


@dataclass(frozen=True)
class BoxBEV:
    cx: float
    cy: float
    w: float
    l: float
    yaw: float

    def __post_init__(self):
        values = (self.cx, self.cy, self.w, self.l, self.yaw)
        if not all(math.isfinite(value) for value in values):
            raise NonFiniteError(f"Box has non-finite values: {values}")
        if not (self.w > 0.0 and self.l > 0.0):
            raise DimensionError(f"Box sizes must be positive, got w={self.w} l={self.l}")

        width, length, yaw = float(self.w), float(self.l), float(self.yaw)
        if width > length:
            width, length = length, width
            yaw = yaw + math.pi / 2.0
        object.__setattr__(self, 'w', width)
        object.__setattr__(self, 'l', length)
        object.__setattr__(self, 'yaw', canonical_yaw(yaw))
        object.__setattr__(self, 'cx', float(self.cx))
        object.__setattr__(self, 'cy', float(self.cy))

    @property
    def area(self):
        return self.w * self.l

    def as_tuple(self):
        return (self.cx, self.cy, self.w, self.l, self.yaw)

    def corners(self):
        """
        The four corners, counter-clockwise, as a [4, 2] array
        """
        half_l = self.l / 2.0
        half_w = self.w / 2.0
        local = np.array([
            [half_l, half_w],
            [-half_l, half_w],
            [-half_l, -half_w],
            [half_l, -half_w],
        ])
        return local @ rotation(self.yaw).T + np.array([self.cx, self.cy])

    def contains(self, xs, ys):
        """
        Point in rotated rectangle test, boundary included

        Inputs:
            xs, ys: Arrays of point coordinates

        Returns:
            bool array shaped like xs
        """
        dx = np.asarray(xs, dtype=float) - self.cx
        dy = np.asarray(ys, dtype=float) - self.cy
        cos_y = math.cos(self.yaw)
        sin_y = math.sin(self.yaw)
        along = cos_y * dx + sin_y * dy
        across = -sin_y * dx + cos_y * dy
        return (np.abs(along) <= self.l / 2.0) & (np.abs(across) <= self.w / 2.0)

    def transformed(self, affine, yaw_offset):
        """
        The box moved by a 2x3 affine whose rotation part is yaw_offset
        """
        center = apply_affine(affine, np.array([self.cx, self.cy]))
        return BoxBEV(center[0], center[1], self.w, self.l, self.yaw + yaw_offset)

    def to_frame(self, from_pose, to_pose):
        """
        Re-expresses a box given in from_pose's frame in to_pose's frame
        """
        world = self.transformed(from_pose.to_world(), from_pose.yaw)
        return world.transformed(to_pose.from_world(), -to_pose.yaw)

    def rounded(self, decimals=6):
        return BoxBEV(*(round(value, decimals) for value in self.as_tuple()))


@dataclass(frozen=True)
class Detection:
    box: BoxBEV
    score: float
