#!/usr/bin/env python3


"""

Exception types shared by every HM-ViT library

The command line program sorts these into exit codes, so library code
raises them instead of printing and carrying on

"""


class HMViTError(Exception):
    """
    Base class for all errors raised by the HM-ViT libraries
    """


class DimensionError(HMViTError):
    """
    Raised when tensor shapes do not line up for an operation
    """


class ConfigurationError(HMViTError):
    """
    Raised when a setting or model hyper-parameter is invalid

    Examples are a head count that does not divide the channel count, or
    a window size that does not tile the BEV grid
    """


class NonFiniteError(HMViTError):
    """
    Raised when a NaN or Inf shows up in a forward or backward pass
    """


class GraphError(HMViTError):
    """
    Raised for collaboration graph problems such as an empty graph or a
    message sent between agents that are not connected
    """


class PlacementError(HMViTError):
    """
    Raised when the scenario generator cannot place vehicles or agents
    """


class CheckpointError(HMViTError):
    """
    Raised when a checkpoint is missing, corrupt, or does not match the
    model it is being loaded into
    """


class MissingCheckpointError(CheckpointError):
    """
    Raised when a checkpoint file does not exist yet, usually because an
    earlier training run was skipped. The program exits 1 on it, not 2
    """
