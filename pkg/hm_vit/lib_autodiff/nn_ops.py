#!/usr/bin/env python3


"""

Neural network layers built on the autodiff engine

    layer_norm   - normalization over the channel axis
    conv2d       - 1x1 and 3x3 same-padding convolution on HWC maps
    batch_norm2d - per-channel batch normalization with running stats

Feature maps are channels-last: [H, W, C], optionally with a leading
batch axis [B, H, W, C]

"""


import numpy as np

from lib_autodiff.errors import DimensionError, ConfigurationError
from lib_autodiff.tensor import Function


LAYER_NORM_EPS = 1e-5
BATCH_NORM_EPS = 1e-5
BATCH_NORM_MOMENTUM = 0.1


class LayerNorm(Function):

    @staticmethod
    def forward(ctx, x, gamma, beta, eps=LAYER_NORM_EPS):
        channels = x.shape[-1]
        if gamma.shape != (channels,) or beta.shape != (channels,):
            raise DimensionError(
                f"layer_norm: gamma {gamma.shape} / beta {beta.shape} do not match {channels} channels"
            )
        mean = np.mean(x, axis=-1, keepdims=True)
        centered = x - mean
        var = np.mean(centered * centered, axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = centered * inv_std

        ctx.save(x_hat=x_hat, inv_std=inv_std, gamma=gamma)
        return x_hat * gamma + beta

    @staticmethod
    def backward(ctx, grad):
        x_hat, inv_std, gamma = ctx.x_hat, ctx.inv_std, ctx.gamma
        channels = x_hat.shape[-1]

        g_hat = grad * gamma
        sum_g = np.sum(g_hat, axis=-1, keepdims=True)
        sum_gx = np.sum(g_hat * x_hat, axis=-1, keepdims=True)
        grad_x = (inv_std / channels) * (channels * g_hat - sum_g - x_hat * sum_gx)

        grad_gamma = np.sum((grad * x_hat).reshape(-1, channels), axis=0)
        grad_beta = np.sum(grad.reshape(-1, channels), axis=0)
        return grad_x, grad_gamma, grad_beta


def layer_norm(x, gamma, beta, eps=LAYER_NORM_EPS):
    """
    Normalizes every token over its channel axis then applies gamma/beta

    Inputs:
        x: Tensor[.., C]

        gamma, beta: Tensor[C]

        eps: Added to the variance

    Returns:
        Tensor[.., C]
    """
    return LayerNorm.apply(x, gamma, beta, eps=eps)


## Convolution
#
def _as_batched(x):
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise DimensionError(f"conv2d expects [H,W,C] or [B,H,W,C], got {x.shape}")


def _im2col(x4, size):
    """
    Gathers the size x size neighborhood of every pixel

    Returns:
        cols: [B, H, W, size*size*Cin] ordered (row offset, col offset, channel)
    """
    if size == 1:
        return x4
    pad = (size - 1) // 2
    height, width = x4.shape[1], x4.shape[2]
    padded = np.pad(x4, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    patches = [
        padded[:, row:row + height, col:col + width, :]
        for row in range(size)
        for col in range(size)
    ]
    return np.concatenate(patches, axis=-1)


class Conv2d(Function):

    @staticmethod
    def forward(ctx, x, kernel, *bias):
        size = kernel.shape[0]
        if kernel.ndim != 4 or kernel.shape[1] != size or size not in (1, 3):
            raise ConfigurationError(f"conv2d supports 1x1 and 3x3 kernels, got {kernel.shape}")
        x4, squeeze = _as_batched(x)
        if x4.shape[-1] != kernel.shape[2]:
            raise DimensionError(
                f"conv2d: input has {x4.shape[-1]} channels, kernel expects {kernel.shape[2]}"
            )
        if bias and bias[0].shape != (kernel.shape[3],):
            raise DimensionError(f"conv2d: bias shape {bias[0].shape} does not match kernel")

        cols = _im2col(x4, size)
        flat_kernel = kernel.reshape(-1, kernel.shape[3])
        out = np.matmul(cols, flat_kernel)
        if bias:
            out = out + bias[0]

        ctx.save(cols=cols, flat_kernel=flat_kernel, kernel_shape=kernel.shape,
                 x_shape=x.shape, squeeze=squeeze, has_bias=bool(bias))
        return out[0] if squeeze else out

    @staticmethod
    def backward(ctx, grad):
        g4 = grad[None] if ctx.squeeze else grad
        size, _, channels_in, channels_out = ctx.kernel_shape
        cols = ctx.cols

        grad_kernel = np.matmul(
            cols.reshape(-1, cols.shape[-1]).T,
            g4.reshape(-1, channels_out)
        ).reshape(ctx.kernel_shape)

        grad_cols = np.matmul(g4, ctx.flat_kernel.T)
        if size == 1:
            grad_x4 = grad_cols
        else:
            pad = (size - 1) // 2
            batch, height, width = g4.shape[:3]
            grad_padded = np.zeros((batch, height + 2 * pad, width + 2 * pad, channels_in), dtype=grad.dtype)
            index = 0
            for row in range(size):
                for col in range(size):
                    grad_padded[:, row:row + height, col:col + width, :] += \
                        grad_cols[..., index * channels_in:(index + 1) * channels_in]
                    index += 1
            grad_x4 = grad_padded[:, pad:pad + height, pad:pad + width, :]

        grad_x = grad_x4.reshape(ctx.x_shape)
        if ctx.has_bias:
            return grad_x, grad_kernel, np.sum(g4.reshape(-1, channels_out), axis=0)
        return grad_x, grad_kernel


def conv2d(x, kernel, bias=None):
    """
    Stride 1 convolution with zero padding (k-1)/2, spatial size preserved

    Inputs:
        x: Tensor[H,W,Cin] or Tensor[B,H,W,Cin]

        kernel: Tensor[k,k,Cin,Cout], k in {1,3}

        bias: Optional Tensor[Cout]

    Returns:
        Tensor[H,W,Cout] (or [B,H,W,Cout])
    """
    if bias is None:
        return Conv2d.apply(x, kernel)
    return Conv2d.apply(x, kernel, bias)


## Batch normalization
#
class BatchNormTrain(Function):

    @staticmethod
    def forward(ctx, x, gamma, beta, eps=BATCH_NORM_EPS):
        channels = x.shape[-1]
        flat = x.reshape(-1, channels)
        mean = np.mean(flat, axis=0)
        centered = x - mean
        var = np.mean((centered * centered).reshape(-1, channels), axis=0)
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = centered * inv_std

        ctx.save(x_hat=x_hat, inv_std=inv_std, gamma=gamma, count=flat.shape[0])
        return x_hat * gamma + beta

    @staticmethod
    def backward(ctx, grad):
        x_hat, inv_std, gamma, count = ctx.x_hat, ctx.inv_std, ctx.gamma, ctx.count
        channels = x_hat.shape[-1]

        g_hat = grad * gamma
        sum_g = np.sum(g_hat.reshape(-1, channels), axis=0)
        sum_gx = np.sum((g_hat * x_hat).reshape(-1, channels), axis=0)
        grad_x = (inv_std / count) * (count * g_hat - sum_g - x_hat * sum_gx)

        grad_gamma = np.sum((grad * x_hat).reshape(-1, channels), axis=0)
        grad_beta = np.sum(grad.reshape(-1, channels), axis=0)
        return grad_x, grad_gamma, grad_beta


class BatchNormEval(Function):

    @staticmethod
    def forward(ctx, x, gamma, beta, running_mean=None, running_var=None, eps=BATCH_NORM_EPS):
        inv_std = 1.0 / np.sqrt(running_var + eps)
        x_hat = (x - running_mean) * inv_std
        ctx.save(x_hat=x_hat, inv_std=inv_std, gamma=gamma)
        return x_hat * gamma + beta

    @staticmethod
    def backward(ctx, grad):
        channels = ctx.x_hat.shape[-1]
        grad_x = grad * ctx.gamma * ctx.inv_std
        grad_gamma = np.sum((grad * ctx.x_hat).reshape(-1, channels), axis=0)
        grad_beta = np.sum(grad.reshape(-1, channels), axis=0)
        return grad_x, grad_gamma, grad_beta


def batch_norm2d(x, gamma, beta, running_mean=None, running_var=None, mode='train',
                 momentum=BATCH_NORM_MOMENTUM, eps=BATCH_NORM_EPS):
    """
    Per-channel normalization of a BEV map or a batch of maps

    Inputs:
        x: Tensor[.., C], statistics are taken over every axis but the last

        gamma, beta: Tensor[C]

        running_mean, running_var: Buffer Tensors[C]. In train mode they
        are updated in place when given, in eval mode they are required

        mode: 'train' or 'eval'

    Returns:
        Tensor, same shape as x
    """
    if mode == 'train':
        out = BatchNormTrain.apply(x, gamma, beta, eps=eps)

        if running_mean is not None and running_var is not None:
            channels = x.shape[-1]
            flat = x.data.reshape(-1, channels)
            count = flat.shape[0]
            batch_mean = np.mean(flat, axis=0)
            batch_var = np.mean((flat - batch_mean) ** 2, axis=0)
            if count > 1:
                batch_var = batch_var * count / (count - 1)
            running_mean.data = (1.0 - momentum) * running_mean.data + momentum * batch_mean
            running_var.data = (1.0 - momentum) * running_var.data + momentum * batch_var
        return out

    if mode == 'eval':
        if running_mean is None or running_var is None:
            raise ConfigurationError("batch_norm2d in eval mode needs running statistics")
        return BatchNormEval.apply(
            x, gamma, beta,
            running_mean=running_mean.data,
            running_var=running_var.data,
            eps=eps
        )

    raise ConfigurationError(f"Unknown batch norm mode: {mode}")
