#!/usr/bin/env python3


"""

Dense tensor with tape based reverse mode differentiation

Every differentiable operation is a Function subclass with a forward()
and a backward() working on plain numpy arrays. Function.apply() runs the
forward pass, checks the result is finite, and records a node on the
active Tape if any input needs a gradient. Tape.backward() then walks the
recorded nodes once, in reverse order, accumulating gradients additively.

Usage:

    with Tape() as tape:
        loss = some_ops(params)
    tape.backward(loss)

Operations run with no tape open record nothing, which is how inference
and the finite difference evaluations in grad_check are done

"""


import numpy as np

from lib_autodiff.errors import NonFiniteError, DimensionError


## Precision used when wrapping new data
#
# Double by default since finite difference checks are meaningless at
# single precision
_DTYPES = {
    'double': np.float64,
    'single': np.float32,
}

_default_dtype = np.float64

# Stack of open tapes, the innermost one records
_TAPE_STACK = []


def set_default_dtype(name):
    """
    Sets the precision used for newly created tensors

    Inputs:
        name: 'double' or 'single'

    Returns:
        None
    """
    global _default_dtype
    if name not in _DTYPES:
        raise ValueError(f"Unknown precision: {name}")
    _default_dtype = _DTYPES[name]


def get_default_dtype():
    return _default_dtype


def current_tape():
    """
    Returns the innermost open Tape, or None when running in inference mode
    """
    if _TAPE_STACK:
        return _TAPE_STACK[-1]
    return None


def unbroadcast(grad, to_shape):
    """
    Sums out broadcast dimensions so grad ends up with shape to_shape

    Inputs:
        grad: The numpy gradient array of the broadcast result

        to_shape: The shape of the input that was broadcast

    Returns:
        The gradient reduced to to_shape
    """
    if grad.shape == tuple(to_shape):
        return grad

    # Leading dimensions that did not exist on the input
    while grad.ndim > len(to_shape):
        grad = grad.sum(axis=0)

    # Dimensions that were 1 on the input and got stretched
    for dim, extent in enumerate(to_shape):
        if extent == 1 and grad.shape[dim] != 1:
            grad = grad.sum(axis=dim, keepdims=True)

    return grad


def check_finite(array, where):
    """
    Raises NonFiniteError if the array holds any NaN or Inf
    """
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"Non-finite values produced by {where}")


class Context:
    """
    Holds whatever a Function's forward() wants to keep for backward()
    """

    def save(self, **kwargs):
        for key, value in kwargs.items():
            setattr(self, key, value)


class Node:
    """
    One recorded operation on a Tape
    """

    def __init__(self, function, ctx, inputs, output):
        self.function = function
        self.ctx = ctx
        self.inputs = inputs
        self.output = output


class Tape:
    """
    Ordered record of the operations executed during one forward pass

    Nodes are appended as operations run, so each node's inputs were
    produced by earlier nodes (or are leaves). backward() visits every node
    exactly once in reverse order.
    """

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        _TAPE_STACK.remove(self)
        return False

    def record(self, node):
        self.nodes.append(node)

    def backward(self, output, grad=None):
        """
        Back-propagates from output through every recorded node

        Inputs:
            output: The Tensor to differentiate. Usually a scalar loss

            grad: The seed gradient dL/d[output]. Defaults to ones, which
            only makes sense for a scalar output

        Returns:
            None. Gradients are accumulated into the .grad of every
            tensor on the tape that requires one
        """
        if grad is None:
            if output.data.size != 1:
                raise DimensionError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(output.data)
        else:
            grad = np.asarray(grad, dtype=output.data.dtype)
            if grad.shape != output.data.shape:
                raise DimensionError(
                    f"Seed gradient shape {grad.shape} does not match output {output.data.shape}"
                )

        output._accumulate(grad)

        for node in reversed(self.nodes):
            if node.output.grad is None:
                continue

            input_grads = node.function.backward(node.ctx, node.output.grad)
            if not isinstance(input_grads, tuple):
                input_grads = (input_grads,)

            for tensor, input_grad in zip(node.inputs, input_grads):
                if input_grad is None or not tensor.requires_grad:
                    continue
                check_finite(input_grad, node.function.__name__ + ".backward")
                tensor._accumulate(input_grad)


class Function:
    """
    Base class for differentiable operations

    Subclasses implement forward(ctx, *arrays, **kwargs) returning a numpy
    array, and backward(ctx, grad) returning one gradient (or None) per
    tensor input
    """

    @staticmethod
    def forward(ctx, *arrays, **kwargs):
        raise NotImplementedError("Forward pass not implemented for this function")

    @staticmethod
    def backward(ctx, grad):
        raise NotImplementedError("Backward pass not implemented for this function")

    @classmethod
    def apply(cls, *inputs, **kwargs):
        """
        Runs the forward pass and records it on the active tape

        Inputs:
            *inputs: Tensors (numpy arrays are wrapped as constants)

            **kwargs: Non-differentiable options passed to forward()

        Returns:
            Tensor
        """
        tensors = [as_tensor(item) for item in inputs]
        ctx = Context()
        out_data = cls.forward(ctx, *[tensor.data for tensor in tensors], **kwargs)
        check_finite(out_data, cls.__name__)

        tape = current_tape()
        needs_grad = tape is not None and any(tensor.requires_grad for tensor in tensors)

        out = Tensor(out_data, requires_grad=needs_grad, _keep_dtype=True)
        if needs_grad:
            tape.record(Node(cls, ctx, tensors, out))
        return out


def as_tensor(value):
    """
    Wraps value as a constant Tensor unless it already is one
    """
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class Tensor:
    """
    Dense n-dimensional real array participating in reverse mode
    differentiation

    Attributes:
        data: numpy array holding the values

        requires_grad: If gradients should be accumulated for this tensor

        grad: numpy array, same shape as data, or None before backward
    """

    def __init__(self, data, requires_grad=False, name=None, _keep_dtype=False):
        if _keep_dtype:
            self.data = np.asarray(data)
        else:
            self.data = np.array(data, dtype=_default_dtype)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name

    def __repr__(self):
        label = f" '{self.name}'" if self.name else ''
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def detach(self):
        """
        Returns a constant copy that is cut off from any tape
        """
        return Tensor(self.data.copy(), _keep_dtype=True)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype)
        else:
            self.grad = self.grad + grad

    ## Operator sugar, the actual Functions live in functions.py
    #
    def __add__(self, other):
        return _ops().add(self, other)

    def __radd__(self, other):
        return _ops().add(other, self)

    def __sub__(self, other):
        return _ops().sub(self, other)

    def __rsub__(self, other):
        return _ops().sub(other, self)

    def __mul__(self, other):
        return _ops().mul(self, other)

    def __rmul__(self, other):
        return _ops().mul(other, self)

    def __neg__(self):
        return _ops().neg(self)

    def __truediv__(self, scalar):
        return _ops().scale(self, 1.0 / scalar)

    def __matmul__(self, other):
        return _ops().matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops().reshape(self, shape)

    def permute(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return _ops().permute(self, axes)

    def transpose(self, axis1=-2, axis2=-1):
        axes = list(range(self.ndim))
        axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
        return _ops().permute(self, tuple(axes))

    def sum(self, axis=None, keepdims=False):
        return _ops().reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return _ops().reduce_mean(self, axis=axis, keepdims=keepdims)


def _ops():
    # Late import, functions.py builds on this module
    from lib_autodiff import functions
    return functions
