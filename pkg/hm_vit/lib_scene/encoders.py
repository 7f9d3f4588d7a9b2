#!/usr/bin/env python3


"""

Small per modality encoders turning a 2 channel observation raster into a
C channel BEV feature map

    (3x3 conv -> layer norm -> ReLU) x 2

"""


from lib_autodiff.errors import DimensionError
from lib_autodiff.functions import relu
from lib_autodiff.nn_ops import conv2d, layer_norm
from lib_autodiff.param_store import normal_init, zeros_init, ones_init
from lib_autodiff.tensor import as_tensor
from lib_fusion.modality import MODALITIES, node_owner, parse_modality
from lib_scene.raycast import OBSERVATION_CHANNELS


def init_encoder_params(store, channels, rng):
    for modality in MODALITIES:
        owner = node_owner(modality)
        stem = f"encoder.{modality.value}"
        c_in = OBSERVATION_CHANNELS
        for layer in ('conv1', 'conv2'):
            store.add(f"{stem}.{layer}.weight", normal_init(rng, (3, 3, c_in, channels), 9 * c_in),
                      owner, 'encoder')
            store.add(f"{stem}.{layer}.bias", zeros_init((channels,)), owner, 'encoder')
            store.add(f"{stem}.{layer}.norm.gamma", ones_init((channels,)), owner, 'encoder')
            store.add(f"{stem}.{layer}.norm.beta", zeros_init((channels,)), owner, 'encoder')
            c_in = channels


def encode(observation, modality, store):
    """
    Inputs:
        observation: array or Tensor [H, W, 2]

        modality: Which encoder to use

        store: ParamStore holding encoder.* entries

    Returns:
        Tensor[H, W, C]
    """
    x = as_tensor(observation)
    if x.ndim != 3 or x.shape[-1] != OBSERVATION_CHANNELS:
        raise DimensionError(f"Observation must be [H,W,{OBSERVATION_CHANNELS}], got {x.shape}")

    stem = f"encoder.{parse_modality(modality).value}"
    for layer in ('conv1', 'conv2'):
        x = conv2d(x, store[f"{stem}.{layer}.weight"], store[f"{stem}.{layer}.bias"])
        x = relu(layer_norm(x, store[f"{stem}.{layer}.norm.gamma"], store[f"{stem}.{layer}.norm.beta"]))
    return x
