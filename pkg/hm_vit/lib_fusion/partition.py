#!/usr/bin/env python3


"""

Axis decomposed partitions of a stack of agent feature maps

Starting from F[N, H, W, C] viewed as [N, H/P, P, W/P, P, C]:

    local  : [(H/P)(W/P), N*P*P, C]
             one sequence per window, holding the co-located PxP patch
             of every agent

    global : [P*P, N*(H/P)(W/P), C]
             one sequence per within-window offset, holding the strided
             grid tokens of every agent

    strict : [N*P*P, (H/P)(W/P), C]
             the global grid with the agent axis kept in the batch, so
             sequences never mix agents

Inside a sequence tokens are ordered agent-major, so one agent's tokens
are a contiguous block. Works on Tensors (differentiable) and on plain
numpy arrays (masks).

"""


import numpy as np

from lib_autodiff.errors import ConfigurationError, DimensionError
from lib_autodiff.tensor import Tensor
from lib_autodiff.functions import reshape, permute


## (axes order after the [N, H/P, P, W/P, P, C] split, sequence axes count)
_LAYOUTS = {
    'local': ((1, 3, 0, 2, 4, 5), 2),
    'global': ((2, 4, 0, 1, 3, 5), 2),
    'strict': ((0, 2, 4, 1, 3, 5), 3),
}


def check_divisible(height, width, window):
    if window < 1 or height % window != 0 or width % window != 0:
        raise ConfigurationError(
            f"Window size {window} does not tile a {height}x{width} grid"
        )


def _reshape(x, shape):
    if isinstance(x, Tensor):
        return reshape(x, shape)
    return np.reshape(x, shape)


def _permute(x, axes):
    if isinstance(x, Tensor):
        return permute(x, axes)
    return np.ascontiguousarray(np.transpose(x, axes))


def partition(features, window, layout):
    """
    Splits F[N, H, W, C] into attention sequences

    Inputs:
        features: Tensor or numpy array [N, H, W, C]

        window: Window size P

        layout: 'local', 'global' or 'strict'

    Returns:
        [sequences, tokens, C], see module docstring
    """
    if layout not in _LAYOUTS:
        raise ConfigurationError(f"Unknown partition layout: {layout}")
    if len(features.shape) != 4:
        raise DimensionError(f"partition expects [N,H,W,C], got {features.shape}")
    agents, height, width, channels = features.shape
    if agents < 1:
        raise DimensionError("partition needs at least one agent")
    check_divisible(height, width, window)

    axes, seq_axes = _LAYOUTS[layout]
    split = _reshape(features, (agents, height // window, window, width // window, window, channels))
    moved = _permute(split, axes)
    moved_shape = moved.shape
    sequences = int(np.prod(moved_shape[:seq_axes]))
    tokens = int(np.prod(moved_shape[seq_axes:5]))
    return _reshape(moved, (sequences, tokens, channels))


def unpartition(sequences, agents, height, width, window, layout):
    """
    Exact inverse of partition()

    Returns:
        [N, H, W, C]
    """
    if layout not in _LAYOUTS:
        raise ConfigurationError(f"Unknown partition layout: {layout}")
    check_divisible(height, width, window)
    axes, _ = _LAYOUTS[layout]
    channels = sequences.shape[-1]

    split_shape = (agents, height // window, window, width // window, window, channels)
    moved_shape = tuple(split_shape[axis] for axis in axes)
    moved = _reshape(sequences, moved_shape)
    split = _permute(moved, tuple(np.argsort(axes)))
    return _reshape(split, (agents, height, width, channels))


def partition_local(features, window):
    """
    F[N,H,W,C] -> [(H/P)(W/P), N*P*P, C]
    """
    return partition(features, window, 'local')


def partition_global(features, window, strict=False):
    """
    F[N,H,W,C] -> [P*P, N*(H/P)(W/P), C], or [N*P*P, (H/P)(W/P), C] when
    strict
    """
    return partition(features, window, 'strict' if strict else 'global')


def partition_mask(mask, window, layout):
    """
    Partitions a boolean [H, W] mask of one agent the same way as its
    feature map

    Returns:
        bool array [sequences, tokens]
    """
    mask = np.asarray(mask, dtype=bool)
    return partition(mask[None, :, :, None], window, layout)[..., 0]
