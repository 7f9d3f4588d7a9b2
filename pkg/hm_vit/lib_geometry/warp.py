#!/usr/bin/env python3


"""

Bilinear warping of BEV feature maps between agent frames, and the
validity / field-of-view masks that go with it

All sampling happens in cell index space. For a receiver cell (i, j) the
sender-map position is

    [col, row] = A [j - cj, i - ci] + b / resolution + [cj, ci]

with (A, b) the receiver->sender affine and (ci, cj) the grid's index
center. Positions within SNAP_TOLERANCE of an integer are snapped to it,
so identities and whole-cell shifts sample exactly one source cell.

"""


from dataclasses import dataclass

import numpy as np

from lib_autodiff.errors import NonFiniteError, DimensionError
from lib_autodiff.tensor import Function
from lib_geometry.pose import relative_transform, apply_affine


SNAP_TOLERANCE = 1e-9


@dataclass
class WarpPlan:
    """
    Gather indices and bilinear weights for one (receiver, sender) pair

    Attributes:
        rows, cols: int arrays [4, H, W], the four bilinear corners

        weights: float arrays [4, H, W], zero where the cell is invalid

        mask: bool array [H, W], True where all contributing corners were
        inside the source map
    """
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    mask: np.ndarray


def _snap(values):
    nearest = np.round(values)
    return np.where(np.abs(values - nearest) < SNAP_TOLERANCE, nearest, values)


def sample_positions(transform, grid):
    """
    Returns the (row, col) index position in the sender map that every
    receiver cell samples from, each an [H, W] array
    """
    transform = np.asarray(transform, dtype=np.float64)
    if transform.shape != (2, 3):
        raise DimensionError(f"Expected a 2x3 affine, got {transform.shape}")
    if not np.all(np.isfinite(transform)):
        raise NonFiniteError("Warp transform has non-finite entries")

    center_row, center_col = grid.index_center
    rows, cols = np.meshgrid(np.arange(grid.height), np.arange(grid.width), indexing='ij')
    d_col = cols - center_col
    d_row = rows - center_row

    linear = transform[:, :2]
    shift = transform[:, 2] / grid.resolution
    src_col = linear[0, 0] * d_col + linear[0, 1] * d_row + shift[0] + center_col
    src_row = linear[1, 0] * d_col + linear[1, 1] * d_row + shift[1] + center_row
    return _snap(src_row), _snap(src_col)


def build_warp_plan(transform, grid):
    """
    Precomputes the bilinear gather for a receiver->sender affine

    A corner whose weight is exactly zero is not needed, so exact integer
    positions only require their own cell to be in bounds

    Inputs:
        transform: 2x3 affine from relative_transform(receiver, sender)

        grid: The shared BevGrid

    Returns:
        WarpPlan
    """
    src_row, src_col = sample_positions(transform, grid)

    row0 = np.floor(src_row)
    col0 = np.floor(src_col)
    frac_row = src_row - row0
    frac_col = src_col - col0
    row0 = row0.astype(int)
    col0 = col0.astype(int)
    row1 = row0 + (frac_row > 0.0)
    col1 = col0 + (frac_col > 0.0)

    mask = (row0 >= 0) & (col0 >= 0) & (row1 <= grid.height - 1) & (col1 <= grid.width - 1)

    rows = np.stack([row0, row0, row1, row1])
    cols = np.stack([col0, col1, col0, col1])
    weights = np.stack([
        (1.0 - frac_row) * (1.0 - frac_col),
        (1.0 - frac_row) * frac_col,
        frac_row * (1.0 - frac_col),
        frac_row * frac_col,
    ])

    rows = np.where(mask, rows, 0)
    cols = np.where(mask, cols, 0)
    weights = np.where(mask, weights, 0.0)
    return WarpPlan(rows=rows, cols=cols, weights=weights, mask=mask)


class WarpBilinear(Function):
    """
    Gathers with the plan's bilinear weights, backward is the transposed
    scatter of the same weights
    """

    @staticmethod
    def forward(ctx, feature, plan=None):
        if feature.ndim != 3:
            raise DimensionError(f"warp expects a [H,W,C] map, got {feature.shape}")
        if feature.shape[:2] != plan.mask.shape:
            raise DimensionError(f"Map {feature.shape[:2]} does not match warp grid {plan.mask.shape}")
        ctx.save(plan=plan, shape=feature.shape)

        out = plan.weights[0][..., None] * feature[plan.rows[0], plan.cols[0]]
        for corner in range(1, 4):
            out = out + plan.weights[corner][..., None] * feature[plan.rows[corner], plan.cols[corner]]
        return out

    @staticmethod
    def backward(ctx, grad):
        plan = ctx.plan
        grad_feature = np.zeros(ctx.shape, dtype=grad.dtype)
        for corner in range(4):
            np.add.at(
                grad_feature,
                (plan.rows[corner], plan.cols[corner]),
                plan.weights[corner][..., None] * grad
            )
        return grad_feature


def warp_feature(feature, transform, grid, plan=None):
    """
    Resamples a sender's feature map into the receiver frame

    Inputs:
        feature: Tensor[H, W, C] in the sender frame

        transform: 2x3 receiver->sender affine

        grid: BevGrid shared by both agents

        plan: Optional precomputed WarpPlan for this transform

    Returns:
        (warped Tensor[H, W, C], validity mask [H, W])
        Invalid cells are exactly zero
    """
    if plan is None:
        plan = build_warp_plan(transform, grid)
    return WarpBilinear.apply(feature, plan=plan), plan.mask


def fov_mask(grid, sender, receiver, fov_radius, plan=None):
    """
    Receiver cells the sender could have observed

    True where the receiver-frame cell center lies within fov_radius of the
    sender position and the cell is inside the sender's warped map

    Inputs:
        grid: BevGrid

        sender, receiver: Pose2

        fov_radius: meters, > 0

        plan: Optional WarpPlan for relative_transform(receiver, sender)

    Returns:
        bool array [H, W]
    """
    transform = relative_transform(receiver, sender)
    if plan is None:
        plan = build_warp_plan(transform, grid)

    xs, ys = grid.cell_centers()
    in_sender = apply_affine(transform, np.stack([xs, ys], axis=-1))
    distance = np.hypot(in_sender[..., 0], in_sender[..., 1])
    return (distance <= fov_radius) & plan.mask
