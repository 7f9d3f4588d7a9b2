#!/usr/bin/env python3


"""

Heterogeneous 3D graph attention (H3GAT) and type routed norm / MLP

Parameters are looked up in a ParamStore by name:

    {prefix}.query.<node>.weight / .bias     owner node:<node>
    {prefix}.key.<node>.weight / .bias       owner node:<node>
    {prefix}.out.<node>.weight               owner node:<node>
    {prefix}.value.<edge>.weight / .bias     owner edge:<edge>
    {prefix}.relation.<edge>.weight [h,d,d]  owner edge:<edge>

where <node> is 'camera' or 'lidar' and <edge> is '<sender>-><receiver>'.

The norm and MLP helpers use {prefix}.<node>.<leaf>, or
{prefix}.shared.<leaf> when the typed entry was never created.

"""


import math

import numpy as np

from lib_autodiff.errors import DimensionError
from lib_autodiff.functions import linear, matmul, permute, concat, scale, masked_softmax
from lib_autodiff.functions import split_heads, merge_heads, gelu, where
from lib_autodiff.nn_ops import layer_norm
from lib_autodiff.param_store import normal_init, zeros_init, ones_init
from lib_fusion.modality import MODALITIES, EDGE_TYPES, node_owner, edge_owner, edge_name
from lib_fusion.modality import Modality, parse_modality


## Parameter creation
#
def init_h3gat_params(store, prefix, channels, heads, rng, group='fusion'):
    """
    Creates the node and edge typed attention parameters

    Relation matrices start at the identity so an untrained layer
    behaves like ordinary multi-head attention
    """
    depth = channels // heads
    for modality in MODALITIES:
        owner = node_owner(modality)
        for role in ('query', 'key'):
            store.add(f"{prefix}.{role}.{modality.value}.weight",
                      normal_init(rng, (channels, channels), channels), owner, group)
            store.add(f"{prefix}.{role}.{modality.value}.bias", zeros_init((channels,)), owner, group)
        store.add(f"{prefix}.out.{modality.value}.weight",
                  normal_init(rng, (channels, channels), channels), owner, group)

    for sender, receiver in EDGE_TYPES:
        owner = edge_owner(sender, receiver)
        edge = edge_name(sender, receiver)
        store.add(f"{prefix}.value.{edge}.weight",
                  normal_init(rng, (channels, channels), channels), owner, group)
        store.add(f"{prefix}.value.{edge}.bias", zeros_init((channels,)), owner, group)
        store.add(f"{prefix}.relation.{edge}.weight",
                  np.tile(np.eye(depth), (heads, 1, 1)), owner, group)


def init_hm_layer_norm(store, prefix, channels, shared=False, group='fusion'):
    if shared:
        store.add(f"{prefix}.shared.gamma", ones_init((channels,)), 'shared', group)
        store.add(f"{prefix}.shared.beta", zeros_init((channels,)), 'shared', group)
        return
    for modality in MODALITIES:
        owner = node_owner(modality)
        store.add(f"{prefix}.{modality.value}.gamma", ones_init((channels,)), owner, group)
        store.add(f"{prefix}.{modality.value}.beta", zeros_init((channels,)), owner, group)


def init_hm_mlp(store, prefix, channels, ratio, rng, shared=False, group='fusion'):
    hidden = int(round(channels * ratio))
    tags = [('shared', 'shared')] if shared else [(m.value, node_owner(m)) for m in MODALITIES]
    for tag, owner in tags:
        store.add(f"{prefix}.{tag}.fc1.weight", normal_init(rng, (channels, hidden), channels), owner, group)
        store.add(f"{prefix}.{tag}.fc1.bias", zeros_init((hidden,)), owner, group)
        store.add(f"{prefix}.{tag}.fc2.weight", normal_init(rng, (hidden, channels), hidden), owner, group)
        store.add(f"{prefix}.{tag}.fc2.bias", zeros_init((channels,)), owner, group)


def typed_name(store, prefix, modality, leaf):
    """
    The per-type entry if it exists, otherwise the shared one
    """
    name = f"{prefix}.{modality.value}.{leaf}"
    if name in store:
        return name
    return f"{prefix}.shared.{leaf}"


## Type routing
#
def _type_labels(node_types, shape):
    """
    Normalizes node_types to either one Modality or a string label array
    of the given token shape
    """
    if isinstance(node_types, (Modality, str, int)):
        return parse_modality(node_types), None

    labels = np.vectorize(lambda item: parse_modality(item).value, otypes=[object])(
        np.asarray(node_types, dtype=object)
    )
    labels = np.broadcast_to(labels, shape)
    present = sorted(set(labels.ravel().tolist()))
    if len(present) == 1:
        return parse_modality(present[0]), None
    return None, labels


def _route(tokens, node_types, per_type):
    """
    Applies per_type(tokens, modality) with each token taking the result
    for its own type
    """
    single, labels = _type_labels(node_types, tokens.shape[:-1])
    if single is not None:
        return per_type(tokens, single)

    out = None
    for modality in MODALITIES:
        chosen = labels == modality.value
        if not chosen.any():
            continue
        typed = per_type(tokens, modality)
        out = typed if out is None else where(chosen[..., None], typed, out)
    return out


def hm_layer_norm(tokens, node_types, store, prefix):
    """
    Layer norm with gamma/beta selected by each token's node type

    Inputs:
        tokens: Tensor[.., C]

        node_types: One Modality for every token, or an array of
        modalities shaped like tokens.shape[:-1]

        store: ParamStore

        prefix: Name prefix of the norm parameters

    Returns:
        Tensor[.., C]
    """
    def per_type(x, modality):
        return layer_norm(
            x,
            store[typed_name(store, prefix, modality, 'gamma')],
            store[typed_name(store, prefix, modality, 'beta')],
        )
    return _route(tokens, node_types, per_type)


def hm_mlp(tokens, node_types, store, prefix):
    """
    C -> ratio*C -> GELU -> C with weights selected by node type
    """
    def per_type(x, modality):
        hidden = linear(
            x,
            store[typed_name(store, prefix, modality, 'fc1.weight')],
            store[typed_name(store, prefix, modality, 'fc1.bias')],
        )
        return linear(
            gelu(hidden),
            store[typed_name(store, prefix, modality, 'fc2.weight')],
            store[typed_name(store, prefix, modality, 'fc2.bias')],
        )
    return _route(tokens, node_types, per_type)


## Attention
#
def h3gat_attention(query_tokens, key_groups, receiver_type, store, prefix, heads):
    """
    Typed multi-head attention of one receiver over a set of senders

    For head h and key token j from a sender of type s:

        logit = (q_h . W_rel[s->r]_h . k_j,h) / sqrt(d)

    Keys and queries use node typed projections, values and relation
    matrices use edge typed ones, and the output projection belongs to
    the receiver type.

    Inputs:
        query_tokens: Tensor[S, Tq, C] from the receiver

        key_groups: list of (tokens Tensor[S, Tk, C], node type, mask
        bool[S, Tk]), one per contributing agent (receiver included)

        receiver_type: Modality of the receiver

        store: ParamStore holding the {prefix}.* parameters

        prefix: Name prefix

        heads: Number of heads

    Returns:
        (Tensor[S, Tq, C], bool[S, Tq] rows that had no valid key)
        Queries with no valid key get a zero attention output
    """
    if not key_groups:
        raise DimensionError("h3gat_attention needs at least one key group")
    receiver_type = parse_modality(receiver_type)
    channels = query_tokens.shape[-1]
    depth = channels // heads
    recv = receiver_type.value

    query = split_heads(linear(
        query_tokens,
        store[f"{prefix}.query.{recv}.weight"],
        store[f"{prefix}.query.{recv}.bias"],
    ), heads)

    keys, values, masks = [], [], []
    for tokens, sender_type, mask in key_groups:
        sender_type = parse_modality(sender_type)
        send = sender_type.value
        edge = edge_name(sender_type, receiver_type)
        if tokens.shape[0] != query_tokens.shape[0] or tokens.shape[-1] != channels:
            raise DimensionError(
                f"Key tokens {tokens.shape} do not line up with queries {query_tokens.shape}"
            )

        key = split_heads(linear(
            tokens,
            store[f"{prefix}.key.{send}.weight"],
            store[f"{prefix}.key.{send}.bias"],
        ), heads)
        # k W^T so that q . (k W^T)^T = q W k^T
        relation = permute(store[f"{prefix}.relation.{edge}.weight"], (0, 2, 1))
        keys.append(matmul(key, relation))
        values.append(split_heads(linear(
            tokens,
            store[f"{prefix}.value.{edge}.weight"],
            store[f"{prefix}.value.{edge}.bias"],
        ), heads))
        masks.append(np.broadcast_to(np.asarray(mask, dtype=bool), tokens.shape[:2]))

    key = keys[0] if len(keys) == 1 else concat(keys, axis=2)
    value = values[0] if len(values) == 1 else concat(values, axis=2)
    mask = np.concatenate(masks, axis=1)

    logits = scale(matmul(query, key.transpose(-2, -1)), 1.0 / math.sqrt(depth))
    probs, empty = masked_softmax(logits, mask[:, None, None, :])
    context = merge_heads(matmul(probs, value))
    out = matmul(context, store[f"{prefix}.out.{recv}.weight"])
    return out, empty[:, 0, :]
