#!/usr/bin/env python3


"""

Node types (sensor modalities), edge types and parameter owner tags

"""


from enum import Enum

from lib_autodiff.errors import ConfigurationError


class Modality(Enum):
    CAMERA = 'camera'
    LIDAR = 'lidar'


MODALITIES = (Modality.CAMERA, Modality.LIDAR)

# Ordered (sender, receiver) pairs
EDGE_TYPES = tuple((sender, receiver) for sender in MODALITIES for receiver in MODALITIES)

# One byte modality tag used on the wire
WIRE_CODES = {Modality.CAMERA: 0, Modality.LIDAR: 1}


def parse_modality(value):
    """
    Accepts a Modality, its string value, or its wire code
    """
    if isinstance(value, Modality):
        return value
    if isinstance(value, int):
        for modality, code in WIRE_CODES.items():
            if code == value:
                return modality
    try:
        return Modality(str(value).lower())
    except ValueError as msg:
        raise ConfigurationError(f"Unknown modality: {value}") from msg


def node_owner(modality):
    return 'node:' + modality.value


def edge_name(sender, receiver):
    return sender.value + '->' + receiver.value


def edge_owner(sender, receiver):
    return 'edge:' + edge_name(sender, receiver)


def owner_modalities(owner):
    """
    The set of modalities an owner tag depends on. 'shared' and anything
    unrecognised depend on none
    """
    if owner.startswith('node:'):
        return {parse_modality(owner[len('node:'):])}
    if owner.startswith('edge:'):
        sender, receiver = owner[len('edge:'):].split('->')
        return {parse_modality(sender), parse_modality(receiver)}
    return set()
