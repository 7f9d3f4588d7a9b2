#!/usr/bin/env python3


"""

The full perception pipeline on one scene

    observations -> per modality encoders -> collaboration graph
                 -> hetero-modal fusion at the ego -> ego's detection head

plus the single agent path the No Fusion and Late Fusion baselines use.
Every entry point takes a SceneSample from dataset.prepare_sample()

"""


import numpy as np

from lib_autodiff.param_store import ParamStore
from lib_detection.baselines import no_fusion, late_fusion
from lib_detection.head import init_head_params, head_forward
from lib_detection.nms import nms
from lib_detection.targets import decode
from lib_fusion.collab_graph import AgentState, CollabGraph
from lib_fusion.fusion_loop import FusionConfig, init_fusion_params, fuse_ego
from lib_geometry.bev_grid import BevGrid
from lib_scene.encoders import init_encoder_params, encode
from lib_scene.sensors import SensorConfig


# Second word of the rng seed that initializes model parameters
INIT_STREAM = 7


def build_grid(settings):
    return BevGrid(settings.grid.height, settings.grid.width, settings.grid.resolution)


def sensor_config(settings):
    # Sensor ranges double as the FoV radii the fusion masks with
    return SensorConfig(
        lidar_range=settings.fov.lidar,
        camera_range=settings.fov.camera,
        camera_noise=settings.dataset.camera_noise,
        camera_noise_distance=settings.dataset.camera_noise_distance,
        n_rays=settings.dataset.n_rays,
    )


def fusion_config(settings, rate=None):
    """
    FusionConfig from the settings, rate overrides [compression] rate
    """
    return FusionConfig(
        grid=build_grid(settings),
        channels=settings.model.channels,
        heads=settings.model.heads,
        window=settings.model.window,
        iterations=settings.fusion.iterations,
        mlp_ratio=settings.model.mlp_ratio,
        rate=settings.compression.rate if rate is None else rate,
        comm_range=settings.fusion.comm_range,
        fov_radius={'camera': settings.fov.camera, 'lidar': settings.fov.lidar},
        global_mode=settings.fusion.global_mode,
        use_local=settings.fusion.use_local,
        use_global=settings.fusion.use_global,
        hetero_norm_mlp=settings.fusion.hetero_norm_mlp,
    )


def init_model(settings, config):
    """
    Fresh parameters for encoders, fusion and heads

    Initialization only depends on the training seed, so two runs with
    the same settings start from identical stores
    """
    rng = np.random.default_rng([settings.training.seed, INIT_STREAM])
    store = ParamStore()
    init_encoder_params(store, config.channels, rng)
    init_fusion_params(store, config, rng)
    init_head_params(store, config.channels, rng)
    return store


def graph_members(scenario, comm_range):
    """
    Indexes of the agents that take part in fusion at the ego: the ego
    and every agent within communication range of it
    """
    ego = scenario.ego.pose
    members = []
    for index, agent in enumerate(scenario.agents):
        if index == 0 or np.hypot(agent.pose.x - ego.x, agent.pose.y - ego.y) <= comm_range:
            members.append(index)
    return members


def build_graph(sample, store, config, members=None):
    """
    Encodes the member agents and wraps them in a CollabGraph
    """
    scenario = sample.scenario
    if members is None:
        members = graph_members(scenario, config.comm_range)
    agents = []
    for index in members:
        spec = scenario.agents[index]
        feature = encode(sample.observations[index], spec.modality, store)
        agents.append(AgentState(spec.agent_id, spec.modality, spec.pose, feature))
    return CollabGraph(scenario.ego.agent_id, agents, config.comm_range)


def forward_scene(sample, store, config, mode='train', trace=None):
    """
    Runs fusion and the ego's head on one scene

    Returns:
        (cls Tensor[H, W, 1], reg Tensor[H, W, 6])
    """
    graph = build_graph(sample, store, config)
    fused = fuse_ego(graph, store, config, trace)
    return head_forward(fused, sample.scenario.ego.modality, store, mode=mode)


def _detections(cls, reg, config, eval_settings):
    found = decode(cls, reg, config.grid, eval_settings.score_threshold, eval_settings.max_detections)
    return nms(found, eval_settings.nms_threshold)


def detect_scene(sample, store, config, eval_settings, trace=None):
    """
    HM-ViT detections of the ego, in the ego frame
    """
    cls, reg = forward_scene(sample, store, config, mode='eval', trace=trace)
    return _detections(cls, reg, config, eval_settings)


def single_agent_detections(sample, store, config, eval_settings, index):
    """
    What agent `index` detects on its own, in its own frame

    The agent runs the model on a graph holding only itself, so nothing
    is received and nothing is compressed
    """
    spec = sample.scenario.agents[index]
    feature = encode(sample.observations[index], spec.modality, store)
    graph = CollabGraph(spec.agent_id, [AgentState(spec.agent_id, spec.modality, spec.pose, feature)],
                        config.comm_range)
    fused = fuse_ego(graph, store, config)
    cls, reg = head_forward(fused, spec.modality, store, mode='eval')
    return _detections(cls, reg, config, eval_settings)


def baseline_detections(sample, store, config, eval_settings):
    """
    Returns:
        {'no_fusion': [...], 'late_fusion': [...]} in the ego frame
    """
    members = graph_members(sample.scenario, config.comm_range)
    per_agent = [single_agent_detections(sample, store, config, eval_settings, index) for index in members]
    poses = [sample.scenario.agents[index].pose for index in members]
    return {
        'no_fusion': no_fusion(per_agent[0]),
        'late_fusion': late_fusion(per_agent, poses, ego_index=0, iou_thresh=eval_settings.nms_threshold),
    }
