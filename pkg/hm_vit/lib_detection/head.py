#!/usr/bin/env python3


"""

Detection head, one parameter set per ego modality

    (3x3 conv -> batch norm -> ReLU) x 2 -> 1x1 conv -> 7 channels

Channel 0 is the classification logit, channels 1..6 the box regression
(see targets.py for the encoding)

"""


import math

from lib_autodiff.errors import DimensionError, ConfigurationError
from lib_autodiff.functions import relu, take_slice
from lib_autodiff.nn_ops import conv2d, batch_norm2d
from lib_autodiff.param_store import normal_init, zeros_init, ones_init
from lib_fusion.modality import MODALITIES, node_owner, parse_modality
from lib_detection.targets import REG_CHANNELS


# Classification bias so every cell starts at a 1% vehicle prior
PRIOR_PROBABILITY = 0.01
CLS_BIAS = -math.log((1.0 - PRIOR_PROBABILITY) / PRIOR_PROBABILITY)

OUT_CHANNELS = 1 + REG_CHANNELS

HEAD_MODES = ('train', 'eval')


def init_head_params(store, channels, rng):
    for modality in MODALITIES:
        owner = node_owner(modality)
        stem = f"head.{modality.value}"
        for layer in ('conv1', 'conv2'):
            store.add(f"{stem}.{layer}.weight", normal_init(rng, (3, 3, channels, channels), 9 * channels),
                      owner, 'head')
            store.add(f"{stem}.{layer}.bias", zeros_init((channels,)), owner, 'head')
            store.add(f"{stem}.{layer}.bn.gamma", ones_init((channels,)), owner, 'head')
            store.add(f"{stem}.{layer}.bn.beta", zeros_init((channels,)), owner, 'head')
            store.add(f"{stem}.{layer}.bn.running_mean", zeros_init((channels,)), owner, 'head', 'buffer')
            store.add(f"{stem}.{layer}.bn.running_var", ones_init((channels,)), owner, 'head', 'buffer')

        bias = zeros_init((OUT_CHANNELS,))
        bias[0] = CLS_BIAS
        store.add(f"{stem}.out.weight", normal_init(rng, (1, 1, channels, OUT_CHANNELS), channels), owner, 'head')
        store.add(f"{stem}.out.bias", bias, owner, 'head')


def head_forward(features, ego_modality, store, mode='train'):
    """
    Inputs:
        features: Fused Tensor[H, W, C] of the ego

        ego_modality: Selects the camera or LiDAR head

        store: ParamStore holding head.* entries

        mode: 'train' normalizes with batch statistics and updates the
        running buffers, 'eval' uses the buffers

    Returns:
        (cls Tensor[H, W, 1], reg Tensor[H, W, 6])
    """
    if mode not in HEAD_MODES:
        raise ConfigurationError(f"Unknown head mode: {mode}")
    if features.ndim != 3:
        raise DimensionError(f"Head expects a [H,W,C] map, got {features.shape}")

    stem = f"head.{parse_modality(ego_modality).value}"
    x = features
    for layer in ('conv1', 'conv2'):
        x = conv2d(x, store[f"{stem}.{layer}.weight"], store[f"{stem}.{layer}.bias"])
        x = batch_norm2d(
            x,
            store[f"{stem}.{layer}.bn.gamma"],
            store[f"{stem}.{layer}.bn.beta"],
            store[f"{stem}.{layer}.bn.running_mean"],
            store[f"{stem}.{layer}.bn.running_var"],
            mode=mode,
        )
        x = relu(x)

    out = conv2d(x, store[f"{stem}.out.weight"], store[f"{stem}.out.bias"])
    return take_slice(out, 0, 1, axis=-1), take_slice(out, 1, OUT_CHANNELS, axis=-1)
