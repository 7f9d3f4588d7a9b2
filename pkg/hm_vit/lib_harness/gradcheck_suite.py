#!/usr/bin/env python3


"""

Finite difference suite over every differentiable piece of the model

Runs at double precision and tiny shapes. Every check reports the worst
relative error between the tape's gradient and central differences; a
check passes below GRADCHECK_TOLERANCE.

"""


from dataclasses import dataclass

import numpy as np

from lib_autodiff.functions import (
    add, mul, matmul, reshape, permute, concat, stack, take_slice, gelu, sigmoid, log,
    masked_softmax, reduce_mean,
)
from lib_autodiff.grad_check import grad_check
from lib_autodiff.nn_ops import layer_norm, conv2d, batch_norm2d
from lib_autodiff.param_store import ParamStore
from lib_autodiff.tensor import Function, get_default_dtype
from lib_detection.head import init_head_params, head_forward
from lib_detection.losses import focal_loss, smooth_l1
from lib_fusion.collab_graph import AgentState, CollabGraph
from lib_fusion.fusion_loop import FusionConfig, init_fusion_params, fuse_ego
from lib_fusion.hetero_block import init_block_params, h3gat_block
from lib_fusion.modality import Modality
from lib_geometry.bev_grid import BevGrid
from lib_geometry.pose import Pose2, relative_transform
from lib_geometry.warp import warp_feature


GRADCHECK_TOLERANCE = 1e-4

# Elements perturbed per input in the composite checks
COMPOSITE_CHECKS = 24


@dataclass
class GradcheckResult:
    name: str
    error: float
    passed: bool


class _FaultySquare(Function):
    """
    x * x with a backward that forgets the factor 2, only used to prove the
    suite notices a broken gradient
    """

    @staticmethod
    def forward(ctx, a):
        ctx.save(a=a)
        return a * a

    @staticmethod
    def backward(ctx, grad):
        return grad * ctx.a


def _swap_in(store, name, tensor):
    store.entry(name).tensor = tensor


## Individual checks, each returns (closure, inputs, max checks)
#
def _elementwise(rng):
    def closure(a, b):
        return mul(add(a, b), gelu(a))
    return closure, [rng.standard_normal((3, 4)), rng.standard_normal(4)], None


def _matmul(rng):
    return matmul, [rng.standard_normal((2, 3, 4)), rng.standard_normal((4, 5))], None


def _shape_ops(rng):
    def closure(a, b):
        joined = concat([a, b], axis=0)
        moved = permute(reshape(joined, (2, 3, 4)), (2, 0, 1))
        return stack([take_slice(moved, 1, 3, axis=0), take_slice(moved, 0, 2, axis=0)])
    return closure, [rng.standard_normal((1, 12)), rng.standard_normal((1, 12))], None


def _softmax(rng):
    mask = rng.random((3, 5)) < 0.7
    mask[:, 0] = True

    def closure(logits):
        probs, _ = masked_softmax(logits, mask)
        return probs
    return closure, [rng.standard_normal((3, 5))], None


def _sigmoid_log(rng):
    def closure(a):
        return log(sigmoid(a))
    return closure, [rng.standard_normal((4, 3))], None


def _layer_norm(rng):
    return layer_norm, [rng.standard_normal((3, 4, 5)), rng.standard_normal(5), rng.standard_normal(5)], None


def _conv(rng):
    return conv2d, [rng.standard_normal((5, 5, 2)), rng.standard_normal((3, 3, 2, 3)), rng.standard_normal(3)], None


def _batch_norm(rng):
    def closure(x, gamma, beta):
        return batch_norm2d(x, gamma, beta, mode='train')
    return closure, [rng.standard_normal((4, 4, 3)), rng.standard_normal(3), rng.standard_normal(3)], None


def _warp(rng):
    grid = BevGrid(6, 6, 1.0)
    transform = relative_transform(Pose2(0.0, 0.0, 0.0), Pose2(0.7, -0.4, 0.3))

    def closure(feature):
        return warp_feature(feature, transform, grid)[0]
    return closure, [rng.standard_normal((6, 6, 2))], None


def _losses(rng):
    target = (rng.random((4, 4, 1)) < 0.3).astype(float)
    reg_target = rng.standard_normal((4, 4, 6))

    def closure(logits, reg):
        return add(focal_loss(logits, target), smooth_l1(reg, reg_target, target[..., 0] > 0))
    return closure, [rng.standard_normal((4, 4, 1)), 2.0 * rng.standard_normal((4, 4, 6))], None


def _block(mode):
    def build(rng):
        store = ParamStore()
        init_block_params(store, 'blk', 4, 2, 2.0, rng)
        for name in store.names():
            if name.endswith('.bias') or name.endswith('.beta'):
                store.set_data(name, 0.1 * rng.standard_normal(store[name].shape))
        full = np.ones((4, 4), dtype=bool)
        mask = rng.random((4, 4)) < 0.6
        relation = 'blk.attn.relation.lidar->camera.weight'

        def closure(first, second, weight):
            _swap_in(store, relation, weight)
            return h3gat_block([first, second], [full, mask], [Modality.CAMERA, Modality.LIDAR], 0,
                               mode, store, 'blk', 2, 2)
        inputs = [rng.standard_normal((4, 4, 4)), rng.standard_normal((4, 4, 4)), store[relation].data.copy()]
        return closure, inputs, COMPOSITE_CHECKS
    return build


def _fuse(rng):
    config = FusionConfig(grid=BevGrid(8, 8, 1.0), channels=8, heads=2, window=2, iterations=2,
                          fov_radius={'camera': 6.0, 'lidar': 9.0})
    store = ParamStore()
    init_fusion_params(store, config, rng)
    poses = [Pose2(0.0, 0.0, 0.0), Pose2(2.3, -1.1, 0.4)]

    def closure(ego_feature, other_feature):
        graph = CollabGraph(0, [
            AgentState(0, Modality.CAMERA, poses[0], ego_feature),
            AgentState(1, Modality.LIDAR, poses[1], other_feature),
        ])
        return fuse_ego(graph, store, config)
    return closure, [rng.standard_normal((8, 8, 8)), rng.standard_normal((8, 8, 8))], COMPOSITE_CHECKS


def _head(rng):
    store = ParamStore()
    init_head_params(store, 4, rng)
    name = 'head.lidar.out.weight'

    def closure(features, weight):
        _swap_in(store, name, weight)
        cls, reg = head_forward(features, Modality.LIDAR, store, mode='train')
        return concat([cls, reg], axis=-1)
    return closure, [rng.standard_normal((5, 5, 4)), store[name].data.copy()], COMPOSITE_CHECKS


def _faulty(rng):
    def closure(a):
        return reduce_mean(_FaultySquare.apply(a), axis=-1)
    return closure, [rng.standard_normal((3, 4)) + 2.0], None


SUITE = [
    ('elementwise + broadcast', _elementwise),
    ('matmul', _matmul),
    ('reshape / permute / concat / stack / slice', _shape_ops),
    ('masked softmax', _softmax),
    ('sigmoid + log', _sigmoid_log),
    ('layer norm', _layer_norm),
    ('conv2d', _conv),
    ('batch norm (train)', _batch_norm),
    ('bilinear warp', _warp),
    ('focal + smooth l1 loss', _losses),
    ('H3GAT local block', _block('local')),
    ('H3GAT global block', _block('global')),
    ('fuse N=2 8x8 C=8 P=2', _fuse),
    ('detection head', _head),
]


def run_gradcheck_suite(inject_fault=False, seed=0, tolerance=GRADCHECK_TOLERANCE):
    """
    Runs every check and prints one line per check

    Inputs:
        inject_fault: Adds a check whose backward is deliberately wrong

        seed: Seeds the inputs and parameters

        tolerance: Largest accepted relative error

    Returns:
        list of GradcheckResult
    """
    if get_default_dtype() != np.float64:
        print("[!] Gradient checks are meant for double precision")

    suite = list(SUITE)
    if inject_fault:
        suite.append(('injected backward fault', _faulty))

    results = []
    for index, (name, build) in enumerate(suite):
        rng = np.random.default_rng([seed, index])
        closure, inputs, max_checks = build(rng)
        error = grad_check(closure, inputs, seed=seed, max_checks_per_input=max_checks)
        passed = error < tolerance
        results.append(GradcheckResult(name, error, passed))
        print(f"{'[+]' if passed else '[!]'} {name:<44} max rel-err {error:.3e}")
    return results


def suite_passed(results):
    return all(item.passed for item in results)
