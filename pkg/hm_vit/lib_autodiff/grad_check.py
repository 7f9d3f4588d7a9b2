#!/usr/bin/env python3


"""

Finite difference verification of analytic gradients

The checked scalar is L = sum(out * R) with R a fixed random tensor, so
every output element takes part. Analytic dL/dx comes from one tape
backward pass, numeric dL/dx from central differences.

"""


import numpy as np

from lib_autodiff.tensor import Tape, Tensor


def relative_error(analytic, numeric):
    """
    |a - n| / max(|a|, |n|, 1e-8), elementwise
    """
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / scale


def grad_check(op_closure, inputs, eps=1e-5, seed=0, max_checks_per_input=None):
    """
    Compares the backward pass of op_closure against central differences

    Inputs:
        op_closure: Callable taking the input Tensors (positionally) and
        returning one output Tensor

        inputs: List of numpy arrays or Tensors to differentiate against.
        They are copied, the originals are not modified

        eps: Finite difference step

        seed: Seed for the random projection R

        max_checks_per_input: If set, only this many randomly chosen
        elements of each input are perturbed. Keeps the big composite
        checks fast

    Returns:
        The worst relative error over every checked element
    """
    rng = np.random.default_rng(seed)
    tensors = [
        Tensor(np.array(item.data if isinstance(item, Tensor) else item, dtype=np.float64),
               requires_grad=True)
        for item in inputs
    ]

    with Tape() as tape:
        out = op_closure(*tensors)
    projection = rng.standard_normal(out.shape)
    tape.backward(out, grad=projection)

    def objective():
        return float(np.sum(op_closure(*tensors).data * projection))

    worst = 0.0
    for tensor in tensors:
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        flat = tensor.data.reshape(-1)

        indices = np.arange(flat.size)
        if max_checks_per_input is not None and flat.size > max_checks_per_input:
            indices = np.sort(rng.choice(flat.size, size=max_checks_per_input, replace=False))

        for index in indices:
            original = flat[index]
            flat[index] = original + eps
            plus = objective()
            flat[index] = original - eps
            minus = objective()
            flat[index] = original

            numeric = (plus - minus) / (2.0 * eps)
            err = float(relative_error(analytic.reshape(-1)[index], numeric))
            worst = max(worst, err)

    return worst
