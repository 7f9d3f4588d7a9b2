#!/usr/bin/env python3


"""

Per modality 1x1 conv compressor / decompressor for shared feature maps

    encode: C -> hidden -> ReLU -> C/r
    decode: C/r -> hidden -> ReLU -> C

Rate 1 is a pass-through with no parameters

"""


import math

from lib_autodiff.errors import ConfigurationError
from lib_autodiff.functions import relu
from lib_autodiff.nn_ops import conv2d
from lib_autodiff.param_store import normal_init, zeros_init
from lib_fusion.modality import MODALITIES, node_owner, parse_modality


RATES = (1, 8, 16, 32)

BYTES_PER_VALUE = 4


def compressed_channels(channels, rate):
    if rate < 1 or channels % rate != 0:
        raise ConfigurationError(f"Compression rate {rate} does not divide {channels} channels")
    return channels // rate


def hidden_channels(channels, rate):
    return max(compressed_channels(channels, rate), int(round(channels / math.sqrt(rate))))


def init_compression_params(store, channels, rate, rng):
    """
    Creates encoder/decoder weights for every modality, nothing for rate 1
    """
    small = compressed_channels(channels, rate)
    if rate == 1:
        return
    hidden = hidden_channels(channels, rate)
    layers = (
        ('encode.conv1', channels, hidden),
        ('encode.conv2', hidden, small),
        ('decode.conv1', small, hidden),
        ('decode.conv2', hidden, channels),
    )
    for modality in MODALITIES:
        owner = node_owner(modality)
        for layer, c_in, c_out in layers:
            name = f"compression.{modality.value}.{layer}"
            store.add(name + '.weight', normal_init(rng, (1, 1, c_in, c_out), c_in), owner, 'compression')
            store.add(name + '.bias', zeros_init((c_out,)), owner, 'compression')


def _two_layers(feature, store, stem):
    hidden = relu(conv2d(feature, store[stem + '.conv1.weight'], store[stem + '.conv1.bias']))
    return conv2d(hidden, store[stem + '.conv2.weight'], store[stem + '.conv2.bias'])


def compress(feature, modality, store, rate):
    """
    Tensor[H,W,C] -> Tensor[H,W,C/r]
    """
    compressed_channels(feature.shape[-1], rate)
    if rate == 1:
        return feature
    return _two_layers(feature, store, f"compression.{parse_modality(modality).value}.encode")


def decompress(feature, modality, store, rate):
    """
    Tensor[H,W,C/r] -> Tensor[H,W,C]
    """
    if rate == 1:
        return feature
    return _two_layers(feature, store, f"compression.{parse_modality(modality).value}.decode")


def payload_bytes(height, width, channels, rate):
    """
    Bytes on the wire for one compressed map at 4 bytes per value
    """
    return height * width * compressed_channels(channels, rate) * BYTES_PER_VALUE
