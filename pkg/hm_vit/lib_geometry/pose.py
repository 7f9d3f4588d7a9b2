#!/usr/bin/env python3


"""

SE(2) poses and 2x3 affine transforms

An affine is a numpy array [[a11, a12, b1], [a21, a22, b2]] mapping a
column point p to A p + b

"""


import math
from dataclasses import dataclass

import numpy as np

from lib_autodiff.errors import NonFiniteError


def normalize_angle(angle):
    """
    Wraps an angle into (-pi, pi]. Angles already in range come back
    unchanged, so normalizing twice is bit-stable
    """
    if -math.pi < angle <= math.pi:
        return angle
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def rotation(angle):
    """
    2x2 rotation matrix, exact for multiples of 2*pi
    """
    if angle == 0.0:
        return np.eye(2)
    cos_a = math.cos(angle)
    sin_a = math.sin(angle)
    return np.array([[cos_a, -sin_a], [sin_a, cos_a]])


@dataclass(frozen=True)
class Pose2:
    """
    Agent pose in the world frame: position in meters, yaw in radians
    """
    x: float
    y: float
    yaw: float

    def __post_init__(self):
        if not all(math.isfinite(value) for value in (self.x, self.y, self.yaw)):
            raise NonFiniteError(f"Pose has non-finite values: {self}")
        object.__setattr__(self, 'yaw', normalize_angle(self.yaw))

    def to_world(self):
        """
        Affine taking this pose's local coordinates to world coordinates
        """
        return make_affine(rotation(self.yaw), np.array([self.x, self.y]))

    def from_world(self):
        """
        Affine taking world coordinates into this pose's local frame
        """
        inverse_rot = rotation(-self.yaw)
        return make_affine(inverse_rot, -inverse_rot @ np.array([self.x, self.y]))


def make_affine(linear, offset):
    affine = np.zeros((2, 3))
    affine[:, :2] = linear
    affine[:, 2] = offset
    return affine


def identity_affine():
    return make_affine(np.eye(2), np.zeros(2))


def compose_affine(outer, inner):
    """
    outer o inner: first apply inner, then outer
    """
    linear = outer[:, :2] @ inner[:, :2]
    offset = outer[:, :2] @ inner[:, 2] + outer[:, 2]
    return make_affine(linear, offset)


def invert_affine(affine):
    inverse = np.linalg.inv(affine[:, :2])
    return make_affine(inverse, -inverse @ affine[:, 2])


def apply_affine(affine, points):
    """
    Applies the affine to points of shape [.., 2]
    """
    points = np.asarray(points, dtype=np.float64)
    return points @ affine[:, :2].T + affine[:, 2]


def relative_transform(receiver, sender):
    """
    Maps receiver-frame metric coordinates to sender-frame coordinates

    world = R(receiver.yaw) p + t_receiver
    p_sender = R(-sender.yaw) (world - t_sender)

    Inputs:
        receiver: Pose2 of the agent whose frame the output lives in

        sender: Pose2 of the agent whose features are being pulled in

    Returns:
        2x3 affine. relative_transform(p, p) is exactly the identity
    """
    linear = rotation(receiver.yaw - sender.yaw)
    delta = np.array([receiver.x - sender.x, receiver.y - sender.y])
    offset = rotation(-sender.yaw) @ delta
    return make_affine(linear, offset)
