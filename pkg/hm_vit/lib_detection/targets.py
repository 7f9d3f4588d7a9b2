#!/usr/bin/env python3


"""

Per cell training targets and their inverse

Every cell regresses at most one box relative to its own center and to a
single size prior:

    dx / res, dy / res, log(w / 2.0), log(l / 4.5), sin(2 yaw), cos(2 yaw)

The doubled angle makes yaw and yaw + pi encode the same way, matching
the w <= l canonical form of BoxBEV

"""


import math

import numpy as np

from lib_autodiff.tensor import Tensor
from lib_detection.boxes import BoxBEV, Detection


ANCHOR_W = 2.0
ANCHOR_L = 4.5

REG_CHANNELS = 6

SCORE_THRESHOLD = 0.1
MAX_DETECTIONS = 100


def encode_box(box, x, y, resolution):
    """
    Regression target of box seen from the cell centered at (x, y)
    """
    return np.array([
        (box.cx - x) / resolution,
        (box.cy - y) / resolution,
        math.log(box.w / ANCHOR_W),
        math.log(box.l / ANCHOR_L),
        math.sin(2.0 * box.yaw),
        math.cos(2.0 * box.yaw),
    ])


def decode_box(reg, x, y, resolution):
    return BoxBEV(
        x + reg[0] * resolution,
        y + reg[1] * resolution,
        ANCHOR_W * math.exp(reg[2]),
        ANCHOR_L * math.exp(reg[3]),
        0.5 * math.atan2(reg[4], reg[5]),
    )


def assign_targets(boxes, grid):
    """
    Marks positive cells and fills their regression targets

    A cell is positive when its center lies inside a box. A cell inside
    several boxes belongs to the one whose center is nearest, ties go to
    the earlier box. A box covering no cell center gets the cell holding
    its own center.

    Inputs:
        boxes: list of BoxBEV in the grid frame

        grid: BevGrid

    Returns:
        (cls_target float [H, W, 1], reg_target float [H, W, 6],
        pos_mask bool [H, W])
    """
    xs, ys = grid.cell_centers()
    owner = np.full((grid.height, grid.width), -1, dtype=int)
    best = np.full((grid.height, grid.width), np.inf)

    for index, box in enumerate(boxes):
        covered = box.contains(xs, ys)
        if not covered.any():
            row, col = grid.cell_of(box.cx, box.cy)
            if 0 <= row < grid.height and 0 <= col < grid.width:
                covered[row, col] = True
        distance = np.hypot(xs - box.cx, ys - box.cy)
        take = covered & (distance < best)
        owner[take] = index
        best[take] = distance[take]

    pos_mask = owner >= 0
    reg_target = np.zeros((grid.height, grid.width, REG_CHANNELS))
    for row, col in zip(*np.nonzero(pos_mask)):
        reg_target[row, col] = encode_box(boxes[owner[row, col]], xs[row, col], ys[row, col], grid.resolution)

    cls_target = pos_mask.astype(float)[:, :, None]
    return cls_target, reg_target, pos_mask


def _values(item):
    return item.data if isinstance(item, Tensor) else np.asarray(item)


def decode(cls, reg, grid, score_thresh=SCORE_THRESHOLD, max_detections=MAX_DETECTIONS):
    """
    Turns head outputs into scored boxes

    Inputs:
        cls: Logits, Tensor or array [H, W, 1]

        reg: Regression, Tensor or array [H, W, 6]

        grid: BevGrid the maps live on

        score_thresh: Cells scoring at or below it are dropped

        max_detections: Keep at most this many

    Returns:
        list of Detection, scores descending, ties in row-major cell order
    """
    logits = _values(cls)[:, :, 0]
    reg = _values(reg)
    scores = 0.5 * (1.0 + np.tanh(0.5 * logits))

    xs, ys = grid.cell_centers()
    flat = np.flatnonzero(scores.reshape(-1) > score_thresh)
    order = flat[np.argsort(-scores.reshape(-1)[flat], kind='stable')][:max_detections]

    detections = []
    for index in order:
        row, col = divmod(int(index), grid.width)
        box = decode_box(reg[row, col], xs[row, col], ys[row, col], grid.resolution)
        detections.append(Detection(box, float(scores[row, col])))
    return detections
