#!/usr/bin/env python3


"""

Elementwise, shape and attention primitives for the autodiff engine

Each operation is a Function subclass plus a small lower case wrapper
that the rest of the code calls, e.g. matmul(a, b) or relu(x)

"""


import math

import numpy as np

from lib_autodiff.errors import DimensionError, ConfigurationError
from lib_autodiff.tensor import Function, unbroadcast, as_tensor


def _broadcast_shape(a_shape, b_shape, op_name):
    try:
        return np.broadcast_shapes(a_shape, b_shape)
    except ValueError as msg:
        raise DimensionError(f"{op_name}: shapes {a_shape} and {b_shape} do not broadcast") from msg


## Arithmetic
#
class Add(Function):

    @staticmethod
    def forward(ctx, a, b):
        _broadcast_shape(a.shape, b.shape, 'add')
        ctx.save(a_shape=a.shape, b_shape=b.shape)
        return a + b

    @staticmethod
    def backward(ctx, grad):
        return unbroadcast(grad, ctx.a_shape), unbroadcast(grad, ctx.b_shape)


class Sub(Function):

    @staticmethod
    def forward(ctx, a, b):
        _broadcast_shape(a.shape, b.shape, 'sub')
        ctx.save(a_shape=a.shape, b_shape=b.shape)
        return a - b

    @staticmethod
    def backward(ctx, grad):
        return unbroadcast(grad, ctx.a_shape), unbroadcast(-grad, ctx.b_shape)


class Mul(Function):

    @staticmethod
    def forward(ctx, a, b):
        _broadcast_shape(a.shape, b.shape, 'mul')
        ctx.save(a=a, b=b)
        return a * b

    @staticmethod
    def backward(ctx, grad):
        return (
            unbroadcast(grad * ctx.b, ctx.a.shape),
            unbroadcast(grad * ctx.a, ctx.b.shape),
        )


class Neg(Function):

    @staticmethod
    def forward(ctx, a):
        return -a

    @staticmethod
    def backward(ctx, grad):
        return -grad


class Scale(Function):

    @staticmethod
    def forward(ctx, a, factor=1.0):
        ctx.save(factor=factor)
        return a * factor

    @staticmethod
    def backward(ctx, grad):
        return grad * ctx.factor


class MatMul(Function):
    """
    Batched matrix product over the last two axes, batch axes broadcast
    """

    @staticmethod
    def forward(ctx, a, b):
        if a.ndim < 2 or b.ndim < 2:
            raise DimensionError(f"matmul needs at least 2-D operands, got {a.shape} and {b.shape}")
        if a.shape[-1] != b.shape[-2]:
            raise DimensionError(f"matmul inner extents differ: {a.shape} x {b.shape}")
        _broadcast_shape(a.shape[:-2], b.shape[:-2], 'matmul')
        ctx.save(a=a, b=b)
        return np.matmul(a, b)

    @staticmethod
    def backward(ctx, grad):
        grad_a = np.matmul(grad, np.swapaxes(ctx.b, -1, -2))
        grad_b = np.matmul(np.swapaxes(ctx.a, -1, -2), grad)
        return unbroadcast(grad_a, ctx.a.shape), unbroadcast(grad_b, ctx.b.shape)


## Shape handling
#
class Reshape(Function):

    @staticmethod
    def forward(ctx, a, shape=None):
        ctx.save(in_shape=a.shape)
        try:
            return a.reshape(shape)
        except ValueError as msg:
            raise DimensionError(f"Cannot reshape {a.shape} into {shape}") from msg

    @staticmethod
    def backward(ctx, grad):
        return grad.reshape(ctx.in_shape)


class Permute(Function):

    @staticmethod
    def forward(ctx, a, axes=None):
        ctx.save(axes=axes)
        return np.ascontiguousarray(np.transpose(a, axes))

    @staticmethod
    def backward(ctx, grad):
        return np.transpose(grad, np.argsort(ctx.axes))


class ReduceSum(Function):

    @staticmethod
    def forward(ctx, a, axis=None, keepdims=False):
        ctx.save(in_shape=a.shape, axis=axis, keepdims=keepdims)
        return np.asarray(np.sum(a, axis=axis, keepdims=keepdims))

    @staticmethod
    def backward(ctx, grad):
        if ctx.axis is not None and not ctx.keepdims:
            grad = np.expand_dims(grad, ctx.axis)
        return np.broadcast_to(grad, ctx.in_shape).copy()


class Concat(Function):

    @staticmethod
    def forward(ctx, *arrays, axis=0):
        ctx.save(axis=axis, extents=[item.shape[axis] for item in arrays])
        try:
            return np.concatenate(arrays, axis=axis)
        except ValueError as msg:
            raise DimensionError(f"concat: {msg}") from msg

    @staticmethod
    def backward(ctx, grad):
        bounds = np.cumsum(ctx.extents)[:-1]
        return tuple(np.split(grad, bounds, axis=ctx.axis))


class Stack(Function):

    @staticmethod
    def forward(ctx, *arrays, axis=0):
        ctx.save(axis=axis, count=len(arrays))
        try:
            return np.stack(arrays, axis=axis)
        except ValueError as msg:
            raise DimensionError(f"stack: {msg}") from msg

    @staticmethod
    def backward(ctx, grad):
        return tuple(np.take(grad, index, axis=ctx.axis) for index in range(ctx.count))


class TakeSlice(Function):
    """
    Contiguous slice [start, stop) along one axis
    """

    @staticmethod
    def forward(ctx, a, start=0, stop=None, axis=-1):
        ctx.save(in_shape=a.shape, start=start, stop=stop, axis=axis)
        index = [slice(None)] * a.ndim
        index[axis] = slice(start, stop)
        return a[tuple(index)].copy()

    @staticmethod
    def backward(ctx, grad):
        full = np.zeros(ctx.in_shape, dtype=grad.dtype)
        index = [slice(None)] * len(ctx.in_shape)
        index[ctx.axis] = slice(ctx.start, ctx.stop)
        full[tuple(index)] = grad
        return full


class IndexSelect(Function):
    """
    Gathers entries along one axis, repeated indices accumulate in backward
    """

    @staticmethod
    def forward(ctx, a, indices=None, axis=0):
        ctx.save(in_shape=a.shape, indices=indices, axis=axis)
        return np.take(a, indices, axis=axis)

    @staticmethod
    def backward(ctx, grad):
        full = np.zeros(ctx.in_shape, dtype=grad.dtype)
        moved = np.moveaxis(full, ctx.axis, 0)
        np.add.at(moved, ctx.indices, np.moveaxis(grad, ctx.axis, 0))
        return full


class Where(Function):
    """
    Picks a where cond is true and b elsewhere, cond is a constant mask
    """

    @staticmethod
    def forward(ctx, a, b, cond=None):
        ctx.save(cond=cond, a_shape=a.shape, b_shape=b.shape)
        return np.where(cond, a, b)

    @staticmethod
    def backward(ctx, grad):
        zero = np.zeros_like(grad)
        return (
            unbroadcast(np.where(ctx.cond, grad, zero), ctx.a_shape),
            unbroadcast(np.where(ctx.cond, zero, grad), ctx.b_shape),
        )


## Activations
#
class Relu(Function):

    @staticmethod
    def forward(ctx, a):
        ctx.save(positive=a > 0)
        return np.where(a > 0, a, 0.0).astype(a.dtype)

    @staticmethod
    def backward(ctx, grad):
        return np.where(ctx.positive, grad, 0.0).astype(grad.dtype)


_GELU_K = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715


class Gelu(Function):
    """
    GELU, tanh approximation
    """

    @staticmethod
    def forward(ctx, a):
        inner = _GELU_K * (a + _GELU_C * a ** 3)
        t = np.tanh(inner)
        ctx.save(a=a, t=t)
        return 0.5 * a * (1.0 + t)

    @staticmethod
    def backward(ctx, grad):
        a, t = ctx.a, ctx.t
        d_inner = _GELU_K * (1.0 + 3.0 * _GELU_C * a ** 2)
        local = 0.5 * (1.0 + t) + 0.5 * a * (1.0 - t ** 2) * d_inner
        return grad * local


class Sigmoid(Function):

    @staticmethod
    def forward(ctx, a):
        out = 0.5 * (1.0 + np.tanh(0.5 * a))
        ctx.save(out=out)
        return out

    @staticmethod
    def backward(ctx, grad):
        return grad * ctx.out * (1.0 - ctx.out)


class Log(Function):

    @staticmethod
    def forward(ctx, a):
        ctx.save(a=a)
        return np.log(a)

    @staticmethod
    def backward(ctx, grad):
        return grad / ctx.a


## Attention
#
class MaskedSoftmax(Function):
    """
    Softmax over the last axis restricted to entries where mask is true

    Masked entries come out exactly 0 and receive exactly 0 gradient.
    Rows with no unmasked entry come out all zero.
    """

    @staticmethod
    def forward(ctx, logits, mask=None):
        neg_inf = np.array(-np.inf, dtype=logits.dtype)
        row_max = np.max(np.where(mask, logits, neg_inf), axis=-1, keepdims=True)
        row_max = np.where(np.isfinite(row_max), row_max, 0.0)

        exps = np.exp(np.where(mask, logits - row_max, neg_inf))
        totals = np.sum(exps, axis=-1, keepdims=True)
        probs = exps / np.where(totals > 0.0, totals, 1.0)

        ctx.save(probs=probs)
        return probs

    @staticmethod
    def backward(ctx, grad):
        probs = ctx.probs
        inner = np.sum(grad * probs, axis=-1, keepdims=True)
        return probs * (grad - inner)


## Lower case wrappers used by the rest of the code
#
def add(a, b):
    return Add.apply(a, b)


def sub(a, b):
    return Sub.apply(a, b)


def mul(a, b):
    return Mul.apply(a, b)


def neg(a):
    return Neg.apply(a)


def scale(a, factor):
    return Scale.apply(a, factor=float(factor))


def matmul(a, b):
    return MatMul.apply(a, b)


def reshape(a, shape):
    return Reshape.apply(a, shape=tuple(shape))


def permute(a, axes):
    return Permute.apply(a, axes=tuple(axes))


def reduce_sum(a, axis=None, keepdims=False):
    return ReduceSum.apply(a, axis=axis, keepdims=keepdims)


def reduce_mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[index] for index in axes]))
    return scale(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def concat(tensors, axis=0):
    return Concat.apply(*tensors, axis=axis)


def stack(tensors, axis=0):
    return Stack.apply(*tensors, axis=axis)


def take_slice(a, start, stop, axis=-1):
    return TakeSlice.apply(a, start=start, stop=stop, axis=axis)


def index_select(a, indices, axis=0):
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 1:
        raise DimensionError(f"index_select: indices must be 1-D, got shape {indices.shape}")
    return IndexSelect.apply(a, indices=indices, axis=axis)


def where(cond, a, b):
    return Where.apply(a, b, cond=np.asarray(cond, dtype=bool))


def relu(a):
    return Relu.apply(a)


def gelu(a):
    return Gelu.apply(a)


def sigmoid(a):
    return Sigmoid.apply(a)


def log(a):
    return Log.apply(a)


def masked_softmax(logits, mask):
    """
    Softmax over the last axis with masked entries excluded

    Inputs:
        logits: Tensor[.., n]

        mask: boolean array broadcastable to logits, True = keep

    Returns:
        (probs, empty_rows)
            probs: Tensor[.., n]. Masked entries are exactly 0, rows sum to 1

            empty_rows: boolean array[..], True for rows where every entry
            was masked. Those rows are all zeros and the caller decides
            what to do with them
    """
    logits = as_tensor(logits)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), logits.shape)
    probs = MaskedSoftmax.apply(logits, mask=mask)
    empty_rows = ~np.any(mask, axis=-1)
    return probs, empty_rows


def split_heads(x, heads):
    """
    Splits the channel axis into heads

    Inputs:
        x: Tensor[.., T, C]

        heads: Number of heads h, must divide C

    Returns:
        Tensor[.., h, T, C/h]
    """
    channels = x.shape[-1]
    if heads < 1 or channels % heads != 0:
        raise ConfigurationError(f"{channels} channels cannot be split into {heads} heads")
    lead = x.shape[:-2]
    tokens = x.shape[-2]
    out = reshape(x, lead + (tokens, heads, channels // heads))
    axes = list(range(len(lead))) + [len(lead) + 1, len(lead), len(lead) + 2]
    return permute(out, axes)


def merge_heads(x):
    """
    Inverse of split_heads: Tensor[.., h, T, d] -> Tensor[.., T, h*d]
    """
    lead = x.shape[:-3]
    heads, tokens, depth = x.shape[-3:]
    axes = list(range(len(lead))) + [len(lead) + 1, len(lead), len(lead) + 2]
    out = permute(x, axes)
    return reshape(out, lead + (tokens, heads * depth))


def linear(x, weight, bias=None):
    """
    x @ weight (+ bias) over the last axis
    """
    out = matmul(x, weight)
    if bias is not None:
        out = add(out, bias)
    return out
