#!/usr/bin/env python3


"""

Training losses

    focal_loss  - classification over every cell
    smooth_l1   - box regression over positive cells
    total = focal + 2.0 * smooth_l1

"""


import numpy as np

from lib_autodiff.errors import DimensionError
from lib_autodiff.functions import add, scale
from lib_autodiff.tensor import Function


FOCAL_ALPHA = 0.25
FOCAL_GAMMA = 2.0

REG_WEIGHT = 2.0


class FocalLoss(Function):
    """
    -alpha_t (1 - p_t)^gamma log(p_t), averaged over cells

    Written with z = s * x, s = +1 for positives and -1 for negatives, so
    that p_t = sigmoid(z) and log(p_t) = -softplus(-z) stay finite for
    large logits
    """

    @staticmethod
    def forward(ctx, logits, target, alpha=FOCAL_ALPHA, gamma=FOCAL_GAMMA):
        sign = 2.0 * target - 1.0
        z = sign * logits
        p_t = 0.5 * (1.0 + np.tanh(0.5 * z))
        alpha_t = np.where(target > 0.5, alpha, 1.0 - alpha)
        softplus = np.logaddexp(0.0, -z)
        modulator = (1.0 - p_t) ** gamma

        ctx.save(sign=sign, p_t=p_t, alpha_t=alpha_t, softplus=softplus,
                 modulator=modulator, gamma=gamma, count=logits.size)
        return np.array(np.sum(alpha_t * modulator * softplus) / logits.size)

    @staticmethod
    def backward(ctx, grad):
        p_t = ctx.p_t
        d_z = -ctx.alpha_t * ctx.modulator * (ctx.gamma * p_t * ctx.softplus + (1.0 - p_t))
        return grad * ctx.sign * d_z / ctx.count, None


class SmoothL1(Function):
    """
    0.5 r^2 for |r| < 1 else |r| - 0.5, averaged over the components of
    the masked cells. No masked cell gives 0
    """

    @staticmethod
    def forward(ctx, pred, target, mask):
        residual = pred - target
        weight = np.broadcast_to(mask, pred.shape).astype(float)
        count = float(np.sum(weight))
        ctx.save(residual=residual, weight=weight, count=count)
        if count == 0.0:
            return np.array(0.0)
        small = np.abs(residual) < 1.0
        value = np.where(small, 0.5 * residual * residual, np.abs(residual) - 0.5)
        return np.array(np.sum(value * weight) / count)

    @staticmethod
    def backward(ctx, grad):
        if ctx.count == 0.0:
            return np.zeros_like(ctx.residual), None, None
        local = np.clip(ctx.residual, -1.0, 1.0) * ctx.weight / ctx.count
        return grad * local, None, None


def focal_loss(logits, target, alpha=FOCAL_ALPHA, gamma=FOCAL_GAMMA):
    if logits.shape != np.shape(target):
        raise DimensionError(f"Focal loss shapes differ: {logits.shape} vs {np.shape(target)}")
    return FocalLoss.apply(logits, np.asarray(target, dtype=float), alpha=alpha, gamma=gamma)


def smooth_l1(pred, target, mask=None):
    """
    Inputs:
        pred: Tensor[H, W, 6]

        target: array [H, W, 6]

        mask: bool [H, W] of positive cells, every cell when None
    """
    if pred.shape != np.shape(target):
        raise DimensionError(f"Regression shapes differ: {pred.shape} vs {np.shape(target)}")
    if mask is None:
        mask = np.ones(pred.shape[:-1], dtype=bool)
    weight = np.asarray(mask, dtype=float)[..., None]
    return SmoothL1.apply(pred, np.asarray(target, dtype=float), weight)


def detection_loss(cls, reg, cls_target, reg_target, pos_mask):
    """
    Returns:
        (total, focal, regression) scalar Tensors
    """
    focal = focal_loss(cls, cls_target)
    regression = smooth_l1(reg, reg_target, pos_mask)
    return add(focal, scale(regression, REG_WEIGHT)), focal, regression
