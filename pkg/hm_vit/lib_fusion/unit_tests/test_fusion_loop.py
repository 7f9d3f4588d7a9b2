#!/usr/bin/env python3


#######################################################
# Unit tests for graph structured fusion
#
#######################################################


import unittest

import numpy as np

## Functions and classes to tests
#
from ..fusion_loop import fuse, fuse_ego, FusionConfig, FusionTrace, init_fusion_params
from ..collab_graph import CollabGraph, AgentState
from ..modality import Modality, owner_modalities
from lib_autodiff.tensor import Tensor
from lib_autodiff.param_store import ParamStore
from lib_autodiff.grad_check import grad_check
from lib_autodiff.errors import ConfigurationError, GraphError
from lib_geometry.bev_grid import BevGrid
from lib_geometry.pose import Pose2, relative_transform
from lib_geometry.warp import build_warp_plan, fov_mask

CAM = Modality.CAMERA
LID = Modality.LIDAR


def _config(**overrides):
    settings = dict(grid=BevGrid(8, 8, 1.0), channels=8, heads=2, window=2, iterations=1,
                    fov_radius={'camera': 6.0, 'lidar': 9.0})
    settings.update(overrides)
    return FusionConfig(**settings)


def _store(config, seed=0):
    store = ParamStore()
    init_fusion_params(store, config, np.random.default_rng(seed))
    return store


def _agents(specs, seed):
    """
    specs: list of (id, modality, (x, y, yaw))
    """
    rng = np.random.default_rng(seed)
    return [
        AgentState(agent_id, modality, Pose2(*pose), Tensor(rng.standard_normal((8, 8, 8))))
        for agent_id, modality, pose in specs
    ]


SPECS = [
    (0, CAM, (0.0, 0.0, 0.0)),
    (1, LID, (2.3, -1.1, 0.4)),
    (2, LID, (-3.0, 2.0, -1.3)),
]


## Responsible for testing fuse
#
# Note:
# + = positive test, (valid input handling)
# - = stress test, (invalid input handling)
#
# ==Current Tests==
# + Test one iteration runs exactly one local and one global block per agent
# + Test the input order of agents does not change the ego output
# + Test a single agent graph only uses its own type's parameters
# + Test the end to end gradient on a two agent graph
# + Test neighbor cells that no valid warp reads never reach the ego
# + Test neighbor cells outside the sender FoV never reach the ego, global block on or off
# + Test the byte accounting of the initial broadcast
# + Test disabling the global block skips it
# - Test an empty graph is rejected
# - Test invalid fusion settings are rejected
#
class Test_Fuse(unittest.TestCase):


    ## Instrumentation counts
    #
    def test_block_counts(self):

        config = _config()
        graph = CollabGraph(0, _agents(SPECS, 1))
        trace = FusionTrace()
        out = fuse(graph, _store(config), config, trace)

        assert sorted(out) == [0, 1, 2]
        for agent_id in (0, 1, 2):
            assert trace.count(agent_id, 'local') == 1
            assert trace.count(agent_id, 'global') == 1
            assert out[agent_id].shape == (8, 8, 8)


    ## Agent order
    #
    def test_order_invariance(self):

        config = _config(iterations=2)
        store = _store(config, seed=2)
        agents = _agents(SPECS, 3)

        forward = fuse_ego(CollabGraph(0, agents), store, config)
        backward = fuse_ego(CollabGraph(0, list(reversed(agents))), store, config)
        assert np.array_equal(forward.data, backward.data)


    ## No neighbors, no foreign parameters
    #
    def test_single_agent(self):

        config = _config(rate=2)
        store = _store(config, seed=4)
        graph = CollabGraph(0, _agents([(0, LID, (1.0, 2.0, 0.3))], 5))

        before = fuse_ego(graph, store, config).data
        touched = 0
        for name, entry in store.items():
            if CAM in owner_modalities(entry.owner):
                store.set_data(name, entry.tensor.data * 2.0 + 7.0)
                touched += 1
        assert touched > 0
        assert np.array_equal(before, fuse_ego(graph, store, config).data)


    ## Finite difference oracle, N=2, H=W=8, C=8, P=2
    #
    def test_gradcheck(self):

        config = _config()
        store = _store(config, seed=6)
        poses = [Pose2(0.0, 0.0, 0.0), Pose2(2.3, -1.1, 0.4)]

        def closure(ego_feature, other_feature):
            graph = CollabGraph(0, [
                AgentState(0, CAM, poses[0], ego_feature),
                AgentState(1, LID, poses[1], other_feature),
            ])
            return fuse_ego(graph, store, config)

        rng = np.random.default_rng(7)
        err = grad_check(closure, [rng.standard_normal((8, 8, 8)), rng.standard_normal((8, 8, 8))],
                         max_checks_per_input=32)
        assert err < 1e-4


    ## Unread neighbor cells
    #
    def test_masked_neighbor_cells(self):

        config = _config(use_global=False)
        store = _store(config, seed=8)
        ego_pose = Pose2(0.0, 0.0, 0.0)
        other_pose = Pose2(4.2, 1.7, 0.5)
        rng = np.random.default_rng(9)
        ego_feature = rng.standard_normal((8, 8, 8))
        other_feature = rng.standard_normal((8, 8, 8))

        plan = build_warp_plan(relative_transform(ego_pose, other_pose), config.grid)
        read = np.zeros((8, 8), dtype=bool)
        for corner in range(4):
            used = plan.mask & (plan.weights[corner] != 0.0)
            read[plan.rows[corner][used], plan.cols[corner][used]] = True
        assert not read.all()

        perturbed = other_feature.copy()
        perturbed[~read] += 50.0

        def run(feature):
            graph = CollabGraph(0, [
                AgentState(0, CAM, ego_pose, Tensor(ego_feature)),
                AgentState(1, LID, other_pose, Tensor(feature)),
            ])
            return fuse_ego(graph, store, config).data

        assert np.array_equal(run(other_feature), run(perturbed))


    ## Cells the warp reads but the FoV hides
    #
    # One iteration, so a sender cell can only reach the ego through a
    # bilinear corner of an unmasked key, or through the PxP local window
    # that holds such a corner on the sender's own map
    #
    def test_fov_hidden_cells(self):

        ego_pose = Pose2(0.0, 0.0, 0.0)
        other_pose = Pose2(1.3, 0.6, 0.5)
        radius = 1.5
        rng = np.random.default_rng(12)
        ego_feature = rng.standard_normal((8, 8, 8))
        other_feature = rng.standard_normal((8, 8, 8))

        for overrides in ({}, {'use_global': False}, {'global_mode': 'strict'}):
            config = _config(fov_radius={'camera': 6.0, 'lidar': radius}, **overrides)
            store = _store(config, seed=13)
            plan = build_warp_plan(relative_transform(ego_pose, other_pose), config.grid)
            keys = fov_mask(config.grid, other_pose, ego_pose, radius, plan=plan)
            assert keys.any()

            read = np.zeros((8, 8), dtype=bool)
            reachable = np.zeros((8, 8), dtype=bool)
            for corner in range(4):
                used = plan.mask & (plan.weights[corner] != 0.0)
                read[plan.rows[corner][used], plan.cols[corner][used]] = True
                used = keys & (plan.weights[corner] != 0.0)
                reachable[plan.rows[corner][used], plan.cols[corner][used]] = True
            size = config.window
            windows = reachable.reshape(8 // size, size, 8 // size, size).any(axis=(1, 3))
            reachable = np.repeat(np.repeat(windows, size, axis=0), size, axis=1)

            hidden = read & ~reachable
            assert hidden.sum() >= 4

            perturbed = other_feature.copy()
            perturbed[~reachable] += 50.0

            def run(feature):
                graph = CollabGraph(0, [
                    AgentState(0, CAM, ego_pose, Tensor(ego_feature)),
                    AgentState(1, LID, other_pose, Tensor(feature)),
                ])
                return fuse_ego(graph, store, config).data

            assert np.array_equal(run(other_feature), run(perturbed)), overrides


    ## Bandwidth of the initial broadcast
    #
    def test_bytes(self):

        config = _config(rate=4)
        trace = FusionTrace()
        fuse(CollabGraph(0, _agents(SPECS, 10)), _store(config), config, trace)
        assert trace.bytes_sent == {1: 8 * 8 * 2 * 4, 2: 8 * 8 * 2 * 4}
        assert trace.total_bytes() == 1024


    ## Ablation switch
    #
    def test_local_only(self):

        config = _config(use_global=False)
        trace = FusionTrace()
        fuse(CollabGraph(0, _agents(SPECS, 11)), _store(config), config, trace)
        assert trace.count(0, 'local') == 1
        assert trace.count(0, 'global') == 0


    ## Empty graph
    #
    def test_empty_graph(self):

        with self.assertRaises(GraphError):
            CollabGraph(0, [])


    ## Bad settings
    #
    def test_bad_config(self):

        with self.assertRaises(ConfigurationError):
            _config(iterations=0)
        with self.assertRaises(ConfigurationError):
            _config(use_local=False, use_global=False)
        with self.assertRaises(ConfigurationError):
            _config(window=3)
        with self.assertRaises(ConfigurationError):
            _config(rate=3)


## Responsible for testing CollabGraph
#
# ==Current Tests==
# + Test adjacency by communication range, self always adjacent
# + Test agents are kept in id order
# - Test a missing ego and duplicate ids
#
class Test_Collab_Graph(unittest.TestCase):


    def test_adjacency(self):

        agents = [
            AgentState(5, 'lidar', Pose2(0.0, 0.0, 0.0)),
            AgentState(2, 'camera', Pose2(30.0, 40.0, 0.0)),
            AgentState(9, 'camera', Pose2(100.0, 0.0, 0.0)),
        ]
        graph = CollabGraph(5, agents, comm_range=50.0)
        assert graph.ids() == [2, 5, 9]
        assert graph.neighbors(5) == [2, 5]
        assert graph.neighbors(9) == [9]
        assert graph.adjacent(2, 5)
        assert not graph.adjacent(5, 9)


    def test_bad_graphs(self):

        with self.assertRaises(GraphError):
            CollabGraph(1, [AgentState(0, 'lidar', Pose2(0.0, 0.0, 0.0))])
        with self.assertRaises(GraphError):
            CollabGraph(0, [AgentState(0, 'lidar', Pose2(0.0, 0.0, 0.0)),
                            AgentState(0, 'camera', Pose2(1.0, 0.0, 0.0))])


if __name__ == '__main__':
    unittest.main()
