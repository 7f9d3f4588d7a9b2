#!/usr/bin/env python3


"""

One heterogeneous 3D graph transformer block

    x'  = x + H3GAT(HM-LN(neighbors))
    out = x' + HM-MLP(HM-LN(x'))

run for a single receiver over the neighbor maps already warped into its
frame

"""


from lib_autodiff.errors import ConfigurationError, DimensionError
from lib_autodiff.functions import reshape
from lib_fusion.hetero_attention import init_h3gat_params, init_hm_layer_norm, init_hm_mlp
from lib_fusion.hetero_attention import h3gat_attention, hm_layer_norm, hm_mlp
from lib_fusion.modality import parse_modality
from lib_fusion.partition import partition, partition_mask, unpartition


BLOCK_MODES = ('local', 'global')
GLOBAL_MODES = ('cross_agent', 'strict')


def init_block_params(store, prefix, channels, heads, mlp_ratio, rng, hetero_norm_mlp=True):
    """
    Creates every parameter one block needs under prefix
    """
    if heads < 1 or channels % heads != 0:
        raise ConfigurationError(f"{channels} channels cannot be split into {heads} heads")
    shared = not hetero_norm_mlp
    init_hm_layer_norm(store, prefix + '.norm1', channels, shared=shared)
    init_h3gat_params(store, prefix + '.attn', channels, heads, rng)
    init_hm_layer_norm(store, prefix + '.norm2', channels, shared=shared)
    init_hm_mlp(store, prefix + '.mlp', channels, mlp_ratio, rng, shared=shared)


def _layout(mode, global_mode):
    if mode == 'local':
        return 'local'
    if mode == 'global':
        if global_mode not in GLOBAL_MODES:
            raise ConfigurationError(f"Unknown global attention mode: {global_mode}")
        return 'strict' if global_mode == 'strict' else 'global'
    raise ConfigurationError(f"Unknown block mode: {mode}")


def h3gat_block(maps, masks, node_types, receiver, mode, store, prefix, heads, window,
                global_mode='cross_agent', diagnostics=None):
    """
    Updates the receiver's map from its neighbors

    Inputs:
        maps: list of Tensor[H, W, C], every neighbor (receiver included)
        in the receiver frame

        masks: list of bool[H, W] validity masks, same order. Tokens at
        False cells are never attended to

        node_types: list of Modality, same order

        receiver: index of the receiver in the lists

        mode: 'local' (windowed) or 'global' (dilated grid)

        store: ParamStore

        prefix: Parameter name prefix of this block

        heads, window: h and P

        global_mode: 'cross_agent' lets global sequences span agents,
        'strict' keeps each agent separate so only the receiver is seen

        diagnostics: Optional dict, 'empty_queries' is incremented by the
        number of queries that found no valid key

    Returns:
        Tensor[H, W, C], the receiver's new map
    """
    if not (len(maps) == len(masks) == len(node_types)):
        raise DimensionError("maps, masks and node_types must have the same length")
    if not 0 <= receiver < len(maps):
        raise DimensionError(f"Receiver index {receiver} out of range")
    layout = _layout(mode, global_mode)

    height, width, channels = maps[receiver].shape
    receiver_type = parse_modality(node_types[receiver])
    if layout == 'strict':
        senders = [receiver]
    else:
        senders = list(range(len(maps)))

    normed = {}
    for index in senders:
        if maps[index].shape != (height, width, channels):
            raise DimensionError(f"Neighbor map {maps[index].shape} differs from receiver map")
        normed[index] = hm_layer_norm(maps[index], node_types[index], store, prefix + '.norm1')

    def tokens_of(tensor):
        return partition(reshape(tensor, (1, height, width, channels)), window, layout)

    key_groups = [
        (tokens_of(normed[index]), node_types[index], partition_mask(masks[index], window, layout))
        for index in senders
    ]
    attended, empty = h3gat_attention(
        tokens_of(normed[receiver]), key_groups, receiver_type, store, prefix + '.attn', heads
    )
    if diagnostics is not None:
        diagnostics['empty_queries'] = diagnostics.get('empty_queries', 0) + int(empty.sum())

    attended = reshape(unpartition(attended, 1, height, width, window, layout), (height, width, channels))
    updated = maps[receiver] + attended
    mixed = hm_mlp(hm_layer_norm(updated, receiver_type, store, prefix + '.norm2'),
                   receiver_type, store, prefix + '.mlp')
    return updated + mixed
