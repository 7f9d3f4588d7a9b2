#!/usr/bin/env python3


"""

Graph structured feature fusion

Starting from the encoded maps, every iteration runs a local block loop
then a global block loop over all agents. Each loop reads a snapshot of
the states from before the loop and commits all new states at the end.
A final hetero-modal MLP (its own parameters) refines every state.

Fusion is evaluated at the ego: the ego starts from its own map, every
other agent from the decompressed copy it broadcast.

"""


from dataclasses import dataclass, field

import numpy as np

from lib_autodiff.errors import ConfigurationError, GraphError
from lib_fusion.compression import compress, decompress, payload_bytes, init_compression_params
from lib_fusion.compression import compressed_channels
from lib_fusion.hetero_attention import hm_mlp, init_hm_mlp
from lib_fusion.hetero_block import h3gat_block, init_block_params, GLOBAL_MODES
from lib_fusion.modality import Modality
from lib_fusion.partition import check_divisible
from lib_geometry.warp import build_warp_plan, warp_feature, fov_mask
from lib_geometry.pose import relative_transform


@dataclass(frozen=True)
class FusionConfig:
    """
    Model side settings of the fusion stack

    fov_radius maps modality value ('camera'/'lidar') to meters
    """
    grid: object
    channels: int = 32
    heads: int = 4
    window: int = 4
    iterations: int = 2
    mlp_ratio: float = 2.0
    rate: int = 1
    comm_range: float = 70.0
    fov_radius: dict = field(default_factory=lambda: {'camera': 30.0, 'lidar': 50.0})
    global_mode: str = 'cross_agent'
    use_local: bool = True
    use_global: bool = True
    hetero_norm_mlp: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("Fusion needs at least one iteration")
        if not (self.use_local or self.use_global):
            raise ConfigurationError("At least one of the local and global blocks must be enabled")
        if self.heads < 1 or self.channels % self.heads != 0:
            raise ConfigurationError(f"{self.channels} channels cannot be split into {self.heads} heads")
        if self.global_mode not in GLOBAL_MODES:
            raise ConfigurationError(f"Unknown global attention mode: {self.global_mode}")
        check_divisible(self.grid.height, self.grid.width, self.window)
        compressed_channels(self.channels, self.rate)
        for modality in (Modality.CAMERA, Modality.LIDAR):
            radius = self.fov_radius.get(modality.value)
            if radius is None or not radius > 0:
                raise ConfigurationError(f"FoV radius for {modality.value} must be positive")

    def block_modes(self):
        modes = []
        if self.use_local:
            modes.append('local')
        if self.use_global:
            modes.append('global')
        return modes


class FusionTrace:
    """
    Instrumentation for one fuse() call

    Attributes:
        blocks: {(agent id, 'local'|'global'): executions}

        bytes_sent: {sender id: payload bytes of its initial broadcast}

        empty_queries: queries that found no valid key
    """

    def __init__(self):
        self.blocks = {}
        self.bytes_sent = {}
        self.empty_queries = 0

    def count(self, agent_id, mode):
        return self.blocks.get((agent_id, mode), 0)

    def total_bytes(self):
        return sum(self.bytes_sent.values())

    def record_block(self, agent_id, mode):
        self.blocks[(agent_id, mode)] = self.count(agent_id, mode) + 1


def init_fusion_params(store, config, rng):
    """
    Creates compression, block and final MLP parameters in a fixed order
    """
    init_compression_params(store, config.channels, config.rate, rng)
    for iteration in range(config.iterations):
        for mode in ('local', 'global'):
            init_block_params(
                store, f"fusion.iter{iteration}.{mode}", config.channels, config.heads,
                config.mlp_ratio, rng, hetero_norm_mlp=config.hetero_norm_mlp
            )
    init_hm_mlp(store, 'fusion.final_mlp', config.channels, config.mlp_ratio, rng,
                shared=not config.hetero_norm_mlp)


class _PairCache:
    """
    Warp plan and key mask per (receiver, sender), poses are fixed during
    one fuse() call
    """

    def __init__(self, graph, config):
        self.graph = graph
        self.config = config
        self._pairs = {}

    def get(self, receiver_id, sender_id):
        key = (receiver_id, sender_id)
        if key not in self._pairs:
            receiver = self.graph.agent(receiver_id)
            sender = self.graph.agent(sender_id)
            transform = relative_transform(receiver.pose, sender.pose)
            plan = build_warp_plan(transform, self.config.grid)
            radius = self.config.fov_radius[sender.modality.value]
            mask = fov_mask(self.config.grid, sender.pose, receiver.pose, radius, plan=plan)
            self._pairs[key] = (transform, plan, mask)
        return self._pairs[key]


def initial_states(graph, store, config, trace=None):
    """
    The states fusion starts from at the ego: its own map, and for every
    other agent the decompressed copy of its broadcast
    """
    grid = config.grid
    states = {}
    for agent in graph.agents:
        if agent.feature is None:
            raise GraphError(f"Agent {agent.agent_id} has no feature map")
        if agent.agent_id == graph.ego_id:
            states[agent.agent_id] = agent.feature
            continue
        shared = compress(agent.feature, agent.modality, store, config.rate)
        states[agent.agent_id] = decompress(shared, agent.modality, store, config.rate)
        if trace is not None:
            trace.bytes_sent[agent.agent_id] = payload_bytes(
                grid.height, grid.width, config.channels, config.rate
            )
    return states


def fuse(graph, store, config, trace=None):
    """
    Runs the fusion iterations over a collaboration graph

    Inputs:
        graph: CollabGraph whose agents carry encoded Tensor[H, W, C] maps

        store: ParamStore with the fusion (and compression) parameters

        config: FusionConfig

        trace: Optional FusionTrace to fill in

    Returns:
        {agent id: fused Tensor[H, W, C]}
    """
    if graph is None or len(graph) == 0:
        raise GraphError("Cannot fuse an empty graph")

    states = initial_states(graph, store, config, trace)
    cache = _PairCache(graph, config)
    grid = config.grid
    full = np.ones((grid.height, grid.width), dtype=bool)
    diagnostics = {}

    for iteration in range(config.iterations):
        for mode in config.block_modes():
            prefix = f"fusion.iter{iteration}.{mode}"
            updated = {}
            for receiver_id in graph.ids():
                maps, masks, types = [], [], []
                for sender_id in graph.neighbors(receiver_id):
                    sender = graph.agent(sender_id)
                    if sender_id == receiver_id:
                        receiver_index = len(maps)
                        maps.append(states[sender_id])
                        masks.append(full)
                    else:
                        transform, plan, mask = cache.get(receiver_id, sender_id)
                        maps.append(warp_feature(states[sender_id], transform, grid, plan=plan)[0])
                        masks.append(mask)
                    types.append(sender.modality)

                updated[receiver_id] = h3gat_block(
                    maps, masks, types, receiver_index, mode, store, prefix,
                    config.heads, config.window, global_mode=config.global_mode,
                    diagnostics=diagnostics
                )
                if trace is not None:
                    trace.record_block(receiver_id, mode)
            states = updated

    if trace is not None:
        trace.empty_queries += diagnostics.get('empty_queries', 0)

    return {
        agent.agent_id: hm_mlp(states[agent.agent_id], agent.modality, store, 'fusion.final_mlp')
        for agent in graph.agents
    }


def fuse_ego(graph, store, config, trace=None):
    """
    Only the ego's fused map, the one the detection head consumes
    """
    return fuse(graph, store, config, trace)[graph.ego_id]
