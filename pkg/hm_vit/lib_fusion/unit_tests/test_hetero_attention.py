#!/usr/bin/env python3


#######################################################
# Unit tests for typed attention, HM-LN and HM-MLP
#
#######################################################


import unittest
import math

import numpy as np

## Functions and classes to tests
#
from ..hetero_attention import h3gat_attention, hm_layer_norm, hm_mlp
from ..hetero_attention import init_h3gat_params, init_hm_layer_norm, init_hm_mlp
from ..modality import Modality, MODALITIES, EDGE_TYPES, edge_name
from lib_autodiff.tensor import Tensor
from lib_autodiff.param_store import ParamStore
from lib_autodiff.nn_ops import layer_norm
from lib_autodiff.grad_check import grad_check

CAM = Modality.CAMERA
LID = Modality.LIDAR


def _attention_store(channels, heads, seed, random_relation=True):
    rng = np.random.default_rng(seed)
    store = ParamStore()
    init_h3gat_params(store, 'attn', channels, heads, rng)
    for name in store.names():
        if name.endswith('.bias'):
            store.set_data(name, 0.1 * rng.standard_normal(store[name].shape))
        if random_relation and '.relation.' in name:
            store.set_data(name, rng.standard_normal(store[name].shape))
    return store


def _tie(store):
    """
    Makes every node typed and edge typed entry equal to the lidar /
    lidar->lidar one
    """
    for role in ('query', 'key'):
        for leaf in ('weight', 'bias'):
            store.set_data(f"attn.{role}.camera.{leaf}", store[f"attn.{role}.lidar.{leaf}"].data)
    store.set_data('attn.out.camera.weight', store['attn.out.lidar.weight'].data)
    home = edge_name(LID, LID)
    for sender, receiver in EDGE_TYPES:
        edge = edge_name(sender, receiver)
        for leaf in ('value.{}.weight', 'value.{}.bias', 'relation.{}.weight'):
            store.set_data('attn.' + leaf.format(edge), store['attn.' + leaf.format(home)].data)


def _reference_mha(store, queries, keys, mask, heads):
    """
    Plain homogeneous multi-head attention with the lidar parameters
    """
    channels = queries.shape[-1]
    depth = channels // heads
    q = queries @ store['attn.query.lidar.weight'].data + store['attn.query.lidar.bias'].data
    k = keys @ store['attn.key.lidar.weight'].data + store['attn.key.lidar.bias'].data
    v = keys @ store['attn.value.lidar->lidar.weight'].data + store['attn.value.lidar->lidar.bias'].data

    outs = []
    for head in range(heads):
        cut = slice(head * depth, (head + 1) * depth)
        logits = q[..., cut] @ np.swapaxes(k[..., cut], -1, -2) / math.sqrt(depth)
        logits = np.where(mask[:, None, :], logits, -np.inf)
        logits = logits - logits.max(axis=-1, keepdims=True)
        weights = np.exp(logits)
        weights = weights / weights.sum(axis=-1, keepdims=True)
        outs.append(weights @ v[..., cut])
    return np.concatenate(outs, axis=-1) @ store['attn.out.lidar.weight'].data


## Responsible for testing h3gat_attention
#
# Note:
# + = positive test, (valid input handling)
# - = stress test, (invalid input handling)
#
# ==Current Tests==
# + Test one key: output is W_O applied to the edge typed value
# + Test two identical keys average to the single key result
# + Test a 3-token, one head, two channel case against scalar arithmetic
# + Test attention weights over valid keys sum to 1
# + Test tied parameters reduce to standard multi-head attention
# + Test a query with every key masked gets zero output and is flagged
#
class Test_H3GAT_Attention(unittest.TestCase):


    ## Single element softmax
    #
    def test_single_key(self):

        store = _attention_store(4, 2, 0)
        rng = np.random.default_rng(1)
        token = rng.standard_normal((1, 1, 4))

        for modality in MODALITIES:
            out, empty = h3gat_attention(
                Tensor(token), [(Tensor(token), modality, np.ones((1, 1), dtype=bool))],
                modality, store, 'attn', 2
            )
            edge = edge_name(modality, modality)
            value = token @ store[f"attn.value.{edge}.weight"].data + store[f"attn.value.{edge}.bias"].data
            expected = value @ store[f"attn.out.{modality.value}.weight"].data
            assert np.max(np.abs(out.data - expected)) < 1e-12
            assert not empty.any()


    ## Symmetric keys
    #
    def test_identical_keys(self):

        store = _attention_store(4, 1, 2)
        rng = np.random.default_rng(3)
        query = rng.standard_normal((1, 1, 4))
        key = rng.standard_normal((1, 1, 4))

        single, _ = h3gat_attention(Tensor(query), [(Tensor(key), CAM, np.ones((1, 1), dtype=bool))],
                                    LID, store, 'attn', 1)
        doubled, _ = h3gat_attention(Tensor(query), [(Tensor(np.concatenate([key, key], axis=1)), CAM,
                                                     np.ones((1, 2), dtype=bool))],
                                     LID, store, 'attn', 1)
        assert np.max(np.abs(single.data - doubled.data)) < 1e-12


    ## Scalar evaluation of the typed attention
    #
    def test_hand_computed(self):

        store = ParamStore()
        init_h3gat_params(store, 'attn', 2, 1, np.random.default_rng(0))
        params = {
            'query.lidar.weight': [[1.0, 0.5], [-0.5, 1.0]], 'query.lidar.bias': [0.1, 0.0],
            'key.lidar.weight': [[0.8, 0.0], [0.2, 1.1]], 'key.lidar.bias': [0.0, -0.1],
            'key.camera.weight': [[0.3, -0.7], [0.9, 0.4]], 'key.camera.bias': [0.2, 0.2],
            'value.lidar->lidar.weight': [[1.0, 0.0], [0.0, 2.0]], 'value.lidar->lidar.bias': [0.0, 0.5],
            'value.camera->lidar.weight': [[0.5, 1.0], [-1.0, 0.5]], 'value.camera->lidar.bias': [0.3, 0.0],
            'relation.lidar->lidar.weight': [[[1.0, 0.2], [0.0, 1.0]]],
            'relation.camera->lidar.weight': [[[0.5, 0.0], [0.3, 1.5]]],
            'out.lidar.weight': [[1.0, -1.0], [0.5, 2.0]],
        }
        for name, value in params.items():
            store.set_data('attn.' + name, np.array(value))

        x0 = [0.4, -0.3]
        x1 = [1.0, 0.2]
        x2 = [-0.6, 0.9]

        def vec_mat(v, m):
            return [v[0] * m[0][c] + v[1] * m[1][c] for c in range(2)]

        def plus(u, v):
            return [u[0] + v[0], u[1] + v[1]]

        query = plus(vec_mat(x0, params['query.lidar.weight']), params['query.lidar.bias'])
        keys = [
            (x0, 'lidar'),
            (x1, 'camera'),
            (x2, 'camera'),
        ]
        logits, values = [], []
        for token, kind in keys:
            key = plus(vec_mat(token, params[f"key.{kind}.weight"]), params[f"key.{kind}.bias"])
            relation = params[f"relation.{kind}->lidar.weight"][0]
            adjusted = vec_mat(query, relation)
            logits.append((adjusted[0] * key[0] + adjusted[1] * key[1]) / math.sqrt(2.0))
            values.append(plus(vec_mat(token, params[f"value.{kind}->lidar.weight"]),
                               params[f"value.{kind}->lidar.bias"]))
        top = max(logits)
        exps = [math.exp(item - top) for item in logits]
        weights = [item / sum(exps) for item in exps]
        mixed = [sum(w * v[c] for w, v in zip(weights, values)) for c in range(2)]
        expected = vec_mat(mixed, params['out.lidar.weight'])

        ones = np.ones((1, 1), dtype=bool)
        out, _ = h3gat_attention(
            Tensor(np.array([[x0]])),
            [(Tensor(np.array([[x0]])), LID, ones),
             (Tensor(np.array([[x1, x2]])), CAM, np.ones((1, 2), dtype=bool))],
            LID, store, 'attn', 1
        )
        assert np.max(np.abs(out.data[0, 0] - np.array(expected))) < 1e-12


    ## Weights sum to 1: with constant values the output is the value
    #
    def test_weights_sum_to_one(self):

        store = _attention_store(6, 3, 4)
        constant = np.array([0.5, -1.0, 2.0, 0.25, 1.5, -0.75])
        for sender, receiver in EDGE_TYPES:
            edge = edge_name(sender, receiver)
            store.set_data(f"attn.value.{edge}.weight", np.zeros((6, 6)))
            store.set_data(f"attn.value.{edge}.bias", constant)

        rng = np.random.default_rng(5)
        mask_a = rng.random((2, 5)) < 0.6
        mask_a[:, 0] = True
        out, _ = h3gat_attention(
            Tensor(rng.standard_normal((2, 3, 6))),
            [(Tensor(rng.standard_normal((2, 5, 6))), CAM, mask_a),
             (Tensor(rng.standard_normal((2, 4, 6))), LID, rng.random((2, 4)) < 0.5)],
            CAM, store, 'attn', 3
        )
        expected = constant @ store['attn.out.camera.weight'].data
        assert np.max(np.abs(out.data - expected)) < 1e-12


    ## Degeneracy to homogeneous attention
    #
    def test_tied_parameters(self):

        for trial in range(10):
            store = _attention_store(8, 2, 100 + trial, random_relation=False)
            _tie(store)
            rng = np.random.default_rng(200 + trial)
            queries = rng.standard_normal((3, 4, 8))
            first = rng.standard_normal((3, 4, 8))
            second = rng.standard_normal((3, 6, 8))
            mask_first = np.ones((3, 4), dtype=bool)
            mask_second = rng.random((3, 6)) < 0.5

            out, _ = h3gat_attention(
                Tensor(queries),
                [(Tensor(first), CAM, mask_first), (Tensor(second), LID, mask_second)],
                CAM, store, 'attn', 2
            )
            expected = _reference_mha(
                store, queries, np.concatenate([first, second], axis=1),
                np.concatenate([mask_first, mask_second], axis=1), 2
            )
            assert np.max(np.abs(out.data - expected)) < 1e-12


    ## Every key masked
    #
    def test_all_masked(self):

        store = _attention_store(4, 2, 6)
        rng = np.random.default_rng(7)
        mask = np.ones((2, 3), dtype=bool)
        mask[1] = False

        out, empty = h3gat_attention(
            Tensor(rng.standard_normal((2, 2, 4))),
            [(Tensor(rng.standard_normal((2, 3, 4))), LID, mask)],
            LID, store, 'attn', 2
        )
        assert np.array_equal(out.data[1], np.zeros((2, 4)))
        assert np.array_equal(empty, np.array([[False, False], [True, True]]))


## Responsible for testing hm_layer_norm and hm_mlp
#
# ==Current Tests==
# + Test a single type batch matches the plain op with that type's params
# + Test changing lidar parameters leaves camera tokens bitwise unchanged
# + Test gradients on a mixed batch
# + Test the shared fallback serves both types
#
class Test_HM_Routing(unittest.TestCase):


    def setUp(self):

        rng = np.random.default_rng(10)
        self.store = ParamStore()
        init_hm_layer_norm(self.store, 'ln', 4)
        init_hm_mlp(self.store, 'mlp', 4, 2.0, rng)
        for name in self.store.names(group='fusion'):
            self.store.set_data(name, rng.standard_normal(self.store[name].shape))
        self.tokens = rng.standard_normal((2, 3, 4))
        self.types = np.array([[CAM, LID, CAM], [LID, LID, CAM]], dtype=object)


    ## All lidar degenerates to the plain op
    #
    def test_single_type(self):

        out = hm_layer_norm(Tensor(self.tokens), LID, self.store, 'ln')
        plain = layer_norm(Tensor(self.tokens), self.store['ln.lidar.gamma'], self.store['ln.lidar.beta'])
        assert np.array_equal(out.data, plain.data)

        all_lidar = np.full((2, 3), LID, dtype=object)
        routed = hm_layer_norm(Tensor(self.tokens), all_lidar, self.store, 'ln')
        assert np.array_equal(routed.data, plain.data)


    ## Disjoint parameters
    #
    def test_camera_untouched(self):

        camera = np.array([[True, False, True], [False, False, True]])
        norm_before = hm_layer_norm(Tensor(self.tokens), self.types, self.store, 'ln').data
        mlp_before = hm_mlp(Tensor(self.tokens), self.types, self.store, 'mlp').data

        for name in self.store.names(owner='node:lidar'):
            self.store.set_data(name, self.store[name].data + 1.0)

        norm_after = hm_layer_norm(Tensor(self.tokens), self.types, self.store, 'ln').data
        mlp_after = hm_mlp(Tensor(self.tokens), self.types, self.store, 'mlp').data
        assert np.array_equal(norm_after[camera], norm_before[camera])
        assert np.array_equal(mlp_after[camera], mlp_before[camera])
        assert not np.array_equal(norm_after[~camera], norm_before[~camera])


    ## Finite difference oracle, mixed batch
    #
    def test_gradcheck(self):

        store = self.store
        types = self.types

        def norm_closure(tokens, gamma_camera, gamma_lidar):
            store.entry('ln.camera.gamma').tensor = gamma_camera
            store.entry('ln.lidar.gamma').tensor = gamma_lidar
            return hm_layer_norm(tokens, types, store, 'ln')

        def mlp_closure(tokens, weight_camera, weight_lidar):
            store.entry('mlp.camera.fc1.weight').tensor = weight_camera
            store.entry('mlp.lidar.fc1.weight').tensor = weight_lidar
            return hm_mlp(tokens, types, store, 'mlp')

        err = grad_check(norm_closure, [self.tokens, store['ln.camera.gamma'], store['ln.lidar.gamma']])
        assert err < 1e-5
        err = grad_check(mlp_closure, [self.tokens, store['mlp.camera.fc1.weight'], store['mlp.lidar.fc1.weight']])
        assert err < 1e-5


    ## Shared parameters
    #
    def test_shared(self):

        store = ParamStore()
        init_hm_layer_norm(store, 'ln', 4, shared=True)
        store.set_data('ln.shared.gamma', np.array([1.0, 2.0, 3.0, 4.0]))
        out = hm_layer_norm(Tensor(self.tokens), self.types, store, 'ln')
        plain = layer_norm(Tensor(self.tokens), store['ln.shared.gamma'], store['ln.shared.beta'])
        assert np.array_equal(out.data, plain.data)
        assert store.names(owner='shared') == ['ln.shared.beta', 'ln.shared.gamma']


if __name__ == '__main__':
    unittest.main()
