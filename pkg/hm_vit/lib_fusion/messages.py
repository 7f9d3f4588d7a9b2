#!/usr/bin/env python3


"""

Feature sharing messages and their wire format

    header : agent id u32, modality u8, pose 3 x f64, H, W, C' u32, rate u8
    payload: H*W*C' little endian f32, row major

"""


import struct
from dataclasses import dataclass

import numpy as np

from lib_autodiff.errors import GraphError, DimensionError
from lib_autodiff.tensor import Tensor
from lib_fusion.compression import compress, decompress, payload_bytes
from lib_fusion.modality import WIRE_CODES, parse_modality
from lib_geometry.pose import Pose2


HEADER = struct.Struct('<IB3dIIIB')

PAYLOAD_DTYPE = np.dtype('<f4')


@dataclass
class Message:
    """
    What a sender broadcasts: its compressed map plus the pose and
    modality the receiver needs to place and decode it
    """
    agent_id: int
    modality: object
    pose: Pose2
    payload: np.ndarray
    rate: int

    def __post_init__(self):
        self.modality = parse_modality(self.modality)
        self.payload = np.asarray(self.payload, dtype=PAYLOAD_DTYPE)
        if self.payload.ndim != 3:
            raise DimensionError(f"Message payload must be [H,W,C'], got {self.payload.shape}")

    @property
    def payload_bytes(self):
        return int(self.payload.nbytes)

    def to_bytes(self):
        height, width, channels = self.payload.shape
        header = HEADER.pack(
            self.agent_id, WIRE_CODES[self.modality],
            self.pose.x, self.pose.y, self.pose.yaw,
            height, width, channels, self.rate
        )
        return header + np.ascontiguousarray(self.payload).tobytes()

    @classmethod
    def from_bytes(cls, blob):
        if len(blob) < HEADER.size:
            raise DimensionError(f"Message of {len(blob)} bytes is shorter than its header")
        agent_id, code, x, y, yaw, height, width, channels, rate = HEADER.unpack_from(blob)
        expected = HEADER.size + height * width * channels * PAYLOAD_DTYPE.itemsize
        if len(blob) != expected:
            raise DimensionError(f"Message is {len(blob)} bytes, header says {expected}")
        payload = np.frombuffer(blob, dtype=PAYLOAD_DTYPE, offset=HEADER.size)
        return cls(
            agent_id=agent_id,
            modality=parse_modality(code),
            pose=Pose2(x, y, yaw),
            payload=payload.reshape(height, width, channels).copy(),
            rate=rate,
        )


def share(graph, sender_id, receiver_id, store, rate):
    """
    Builds the message sender_id sends to receiver_id

    Inputs:
        graph: CollabGraph holding both agents

        sender_id, receiver_id: agent ids, must be adjacent

        store: ParamStore with the compression parameters

        rate: Compression rate

    Returns:
        Message
    """
    if not graph.adjacent(sender_id, receiver_id):
        raise GraphError(f"Agents {sender_id} and {receiver_id} are not within communication range")
    sender = graph.agent(sender_id)
    compressed = compress(sender.feature, sender.modality, store, rate)
    return Message(
        agent_id=sender.agent_id,
        modality=sender.modality,
        pose=sender.pose,
        payload=compressed.data,
        rate=rate,
    )


def receive(message, store):
    """
    Decompresses a message with the decoder of the sender's modality

    Returns:
        Tensor[H, W, C]
    """
    return decompress(Tensor(message.payload), message.modality, store, message.rate)


def bandwidth_report(graph, config):
    """
    Bytes every non-ego agent broadcasts for one fusion at the ego

    Returns:
        dict with 'per_agent' {id: bytes} and 'total'
    """
    grid = config.grid
    per_agent = {
        agent_id: payload_bytes(grid.height, grid.width, config.channels, config.rate)
        for agent_id in graph.ids()
        if agent_id != graph.ego_id and graph.adjacent(agent_id, graph.ego_id)
    }
    return {'per_agent': per_agent, 'total': sum(per_agent.values())}
