#!/usr/bin/env python3


"""

AdamW optimizer and the cosine annealing learning rate schedule

"""


import math

import numpy as np

from lib_autodiff.tensor import check_finite


def cosine_lr(step, total, lr_max, lr_min=0.0):
    """
    Cosine annealing from lr_max at step 0 down to lr_min at step total

    Inputs:
        step: Current step, clamped to [0, total]

        total: Number of steps in the schedule

        lr_max: Learning rate at step 0

        lr_min: Floor reached at step total

    Returns:
        The learning rate for this step
    """
    if total <= 0:
        return lr_max
    step = min(max(step, 0), total)
    return lr_min + (lr_max - lr_min) * 0.5 * (1.0 + math.cos(math.pi * step / total))


class AdamW:
    """
    Adam with decoupled weight decay

    The decay is applied to the parameter directly (p -= lr * wd * p), not
    folded into the gradient. Only the store's trainable entries are
    touched, so frozen groups are never updated.
    """

    def __init__(self, store, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-2, param_filter=None):
        self.store = store
        # Optional predicate on parameter names, names it rejects are left
        # alone like frozen ones
        self.param_filter = param_filter
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay

        # Number of steps taken so far
        self.step_count = 0

        # First and second moments, keyed by parameter name
        self.exp_avg = {}
        self.exp_avg_sq = {}

        # Names already warned about, so each missing gradient is only
        # reported once
        self._warned = set()

    def step(self, lr):
        """
        Applies one update to every trainable parameter with a gradient

        Inputs:
            lr: The learning rate for this step

        Returns:
            The list of parameter names that were skipped for lack of a
            gradient
        """
        self.step_count += 1
        bias1 = 1.0 - self.beta1 ** self.step_count
        bias2 = 1.0 - self.beta2 ** self.step_count

        skipped = []
        for name in self.updated_names():
            param = self.store[name]
            if param.grad is None:
                skipped.append(name)
                if name not in self._warned:
                    self._warned.add(name)
                    print(f"[!] No gradient for {name}, skipping its update")
                continue

            grad = param.grad
            check_finite(grad, f"gradient of {name}")

            if name not in self.exp_avg:
                self.exp_avg[name] = np.zeros_like(param.data)
                self.exp_avg_sq[name] = np.zeros_like(param.data)

            m = self.exp_avg[name]
            v = self.exp_avg_sq[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad

            data = param.data * (1.0 - lr * self.weight_decay)
            data = data - lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            param.data = data

        return skipped

    def updated_names(self):
        names = self.store.trainable_names()
        if self.param_filter is None:
            return names
        return [name for name in names if self.param_filter(name)]

    def state_arrays(self):
        """
        Returns the moments as {'optim.exp_avg/<name>': array, ...} for
        saving into a checkpoint
        """
        arrays = {}
        for name in sorted(self.exp_avg):
            arrays['optim.exp_avg/' + name] = self.exp_avg[name]
            arrays['optim.exp_avg_sq/' + name] = self.exp_avg_sq[name]
        return arrays

    def load_state_arrays(self, arrays, step_count):
        self.exp_avg = {}
        self.exp_avg_sq = {}
        for key, value in arrays.items():
            kind, name = key.split('/', 1)
            if kind == 'optim.exp_avg':
                self.exp_avg[name] = np.array(value)
            elif kind == 'optim.exp_avg_sq':
                self.exp_avg_sq[name] = np.array(value)
        self.step_count = int(step_count)
