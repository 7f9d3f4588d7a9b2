#!/usr/bin/env python3


"""

Collaboration graph: the agents of one scene, their sensor types, poses
and current feature maps, with adjacency given by communication range

"""


import math
from dataclasses import dataclass, replace

from lib_autodiff.errors import GraphError
from lib_fusion.modality import parse_modality


DEFAULT_COMM_RANGE = 70.0


@dataclass
class AgentState:
    """
    Node state of one agent

    Attributes:
        agent_id: Unique integer id

        modality: Modality of the agent's sensor

        pose: Pose2 in the world frame

        feature: Tensor[H, W, C] in the agent's own frame

        iteration: Fusion iteration the feature belongs to
    """
    agent_id: int
    modality: object
    pose: object
    feature: object = None
    iteration: int = 0

    def __post_init__(self):
        self.modality = parse_modality(self.modality)

    def with_feature(self, feature, iteration=None):
        return replace(self, feature=feature,
                       iteration=self.iteration if iteration is None else iteration)


class CollabGraph:
    """
    Dynamic heterogeneous collaboration graph centred on an ego agent

    Agents are kept in ascending id order whatever order they are given
    in. Two agents are adjacent when their distance is within comm_range;
    every agent is adjacent to itself.
    """

    def __init__(self, ego_id, agents, comm_range=DEFAULT_COMM_RANGE):
        agents = list(agents)
        if not agents:
            raise GraphError("Collaboration graph has no agents")
        ids = [agent.agent_id for agent in agents]
        if len(set(ids)) != len(ids):
            raise GraphError(f"Duplicate agent ids: {sorted(ids)}")
        if ego_id not in ids:
            raise GraphError(f"Ego {ego_id} is not one of the agents {sorted(ids)}")
        if not comm_range > 0:
            raise GraphError(f"Communication range must be positive, got {comm_range}")

        self.ego_id = ego_id
        self.comm_range = float(comm_range)
        self.agents = sorted(agents, key=lambda agent: agent.agent_id)
        self._by_id = {agent.agent_id: agent for agent in self.agents}

    def __len__(self):
        return len(self.agents)

    def ids(self):
        return [agent.agent_id for agent in self.agents]

    def agent(self, agent_id):
        try:
            return self._by_id[agent_id]
        except KeyError as msg:
            raise GraphError(f"Unknown agent id {agent_id}") from msg

    @property
    def ego(self):
        return self._by_id[self.ego_id]

    def distance(self, first_id, second_id):
        first = self.agent(first_id).pose
        second = self.agent(second_id).pose
        return math.hypot(first.x - second.x, first.y - second.y)

    def adjacent(self, first_id, second_id):
        if first_id == second_id:
            self.agent(first_id)
            return True
        return self.distance(first_id, second_id) <= self.comm_range

    def neighbors(self, agent_id):
        """
        Ids adjacent to agent_id, itself included, ascending
        """
        return [other for other in self.ids() if self.adjacent(agent_id, other)]

    def replace_features(self, features, iteration=None):
        """
        Returns a new graph whose agents carry the given {id: feature} maps
        """
        agents = [agent.with_feature(features[agent.agent_id], iteration) for agent in self.agents]
        return CollabGraph(self.ego_id, agents, self.comm_range)

    def subgraph(self, agent_ids):
        """
        The graph restricted to agent_ids, the ego must be kept
        """
        keep = set(agent_ids)
        return CollabGraph(self.ego_id, [a for a in self.agents if a.agent_id in keep], self.comm_range)
