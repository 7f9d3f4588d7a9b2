#!/usr/bin/env python3


"""

Named parameter storage

Every learnable tensor (and every non-learnable buffer such as batch norm
running statistics) lives in a ParamStore under a hierarchical dotted
name, e.g. 'fusion.iter0.local.attn.q.lidar.weight'.

Each entry is tagged with:

    owner - which modality the tensor belongs to: 'node:<modality>',
            'edge:<sender>-><receiver>' or 'shared'

    group - the training group: 'encoder', 'compression', 'fusion' or
            'head'. Whole groups can be frozen

    kind  - 'param' (optimized) or 'buffer' (carried in checkpoints only)

"""


import copy
import math

import numpy as np

from lib_autodiff.errors import ConfigurationError
from lib_autodiff.tensor import Tensor


GROUPS = ('encoder', 'compression', 'fusion', 'head')


class ParamEntry:

    def __init__(self, tensor, owner, group, kind):
        self.tensor = tensor
        self.owner = owner
        self.group = group
        self.kind = kind


class ParamStore:
    """
    Map from unique parameter name to Tensor, iterated in lexicographic
    name order
    """

    def __init__(self):
        self._entries = {}
        self._frozen = set()

    def __contains__(self, name):
        return name in self._entries

    def __getitem__(self, name):
        return self._entries[name].tensor

    def __len__(self):
        return len(self._entries)

    def add(self, name, value, owner='shared', group='fusion', kind='param'):
        """
        Adds a new entry

        Inputs:
            name: Unique dotted name

            value: numpy array or Tensor with the initial values

            owner: Owner tag, see module docstring

            group: One of GROUPS

            kind: 'param' or 'buffer'

        Returns:
            The stored Tensor
        """
        if name in self._entries:
            raise ConfigurationError(f"Duplicate parameter name: {name}")
        if group not in GROUPS:
            raise ConfigurationError(f"Unknown parameter group: {group}")
        if kind not in ('param', 'buffer'):
            raise ConfigurationError(f"Unknown parameter kind: {kind}")

        data = value.data if isinstance(value, Tensor) else value
        tensor = Tensor(data, requires_grad=(kind == 'param'), name=name)
        self._entries[name] = ParamEntry(tensor, owner, group, kind)
        return tensor

    def entry(self, name):
        return self._entries[name]

    def names(self, owner=None, group=None, kind=None):
        """
        Returns the sorted names, optionally filtered by tag
        """
        selected = []
        for name, item in self._entries.items():
            if owner is not None and item.owner != owner:
                continue
            if group is not None and item.group != group:
                continue
            if kind is not None and item.kind != kind:
                continue
            selected.append(name)
        return sorted(selected)

    def items(self):
        for name in self.names():
            yield name, self._entries[name]

    ## Freezing
    #
    def freeze(self, group):
        if group not in GROUPS:
            raise ConfigurationError(f"Unknown parameter group: {group}")
        self._frozen.add(group)

    def unfreeze(self, group):
        self._frozen.discard(group)

    def is_frozen(self, name):
        return self._entries[name].group in self._frozen

    def trainable_names(self):
        return [
            name for name in self.names(kind='param')
            if self._entries[name].group not in self._frozen
        ]

    def zero_grad(self):
        for item in self._entries.values():
            item.tensor.grad = None

    ## Copies
    #
    def snapshot(self):
        """
        Returns {name: copy of the values}, used to compare before/after
        """
        return {name: item.tensor.data.copy() for name, item in self.items()}

    def clone(self):
        other = ParamStore()
        for name, item in self.items():
            other.add(name, item.tensor.data.copy(), item.owner, item.group, item.kind)
        other._frozen = copy.copy(self._frozen)
        return other

    def set_data(self, name, values):
        """
        Overwrites the values of an existing entry, shape must not change
        """
        tensor = self._entries[name].tensor
        values = np.asarray(values, dtype=tensor.data.dtype)
        if values.shape != tensor.data.shape:
            raise ConfigurationError(
                f"Shape mismatch for {name}: {values.shape} vs {tensor.data.shape}"
            )
        tensor.data = values.copy()


## Initializers
#
def normal_init(rng, shape, fan_in):
    """
    Zero mean normal with std 1/sqrt(fan_in)
    """
    return rng.standard_normal(shape) / math.sqrt(max(fan_in, 1))


def zeros_init(shape):
    return np.zeros(shape)


def ones_init(shape):
    return np.ones(shape)
