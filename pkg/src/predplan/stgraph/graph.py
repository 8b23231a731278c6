"""Proximity scene graphs with smoothly ramped edge weights."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .history import PAST, AgentHistory

VEHICLE_RADIUS = 45.0
PEDESTRIAN_RADIUS = 10.0
RAMP_STEPS = 4

# feature scaling applied to agent-frame [pos, vel, acc]
FEATURE_SCALE = np.array([10.0, 10.0, 5.0, 5.0, 2.0, 2.0])


def edge_radius(cls_a: str, cls_b: str, radii=None) -> float:
    radii = radii or {"vehicle": VEHICLE_RADIUS, "pedestrian": PEDESTRIAN_RADIUS}
    if cls_a == "vehicle" and cls_b == "vehicle":
        return radii["vehicle"]
    return radii["pedestrian"]


@dataclass
class SceneGraph:
    nodes: list  # AgentHistory
    edges: set  # ordered (i, j) id pairs currently within radius
    weights: dict = field(default_factory=dict)  # (i, j) -> lifecycle weight in [0, 1]
    ramp: int = RAMP_STEPS

    def node(self, agent_id: int) -> AgentHistory:
        return self._index[agent_id]

    def __post_init__(self):
        self._index = {n.id: n for n in self.nodes}

    def neighbors(self, agent_id: int) -> list:
        """(neighbor id, weight) for every edge into ``agent_id`` with positive weight."""
        out = [(j, w) for (i, j), w in self.weights.items() if i == agent_id and w > 0 and j in self._index]
        return sorted(out)


def build_scene_graph(histories, radii=None, prev: SceneGraph | None = None, ramp: int = RAMP_STEPS) -> SceneGraph:
    """Edges are the ordered pairs within the class radius at the latest sample.

    Without a previous graph every edge starts fully established. With one,
    weights move linearly by ``1 / ramp`` per update toward 1 for present
    edges and toward 0 for vanished edges, which linger until they reach 0.
    """
    nodes = list(histories)
    edges = set()
    for a in range(len(nodes)):
        for b in range(len(nodes)):
            if a == b:
                continue
            na, nb = nodes[a], nodes[b]
            d = float(np.hypot(*(na.last - nb.last)))
            if d <= edge_radius(na.cls, nb.cls, radii):
                edges.add((na.id, nb.id))
    ids = {n.id for n in nodes}
    if prev is None:
        weights = {e: 1.0 for e in edges}
    else:
        step = 1.0 / ramp
        weights = {}
        for e in edges | set(prev.weights):
            w_prev = prev.weights.get(e, 0.0)
            w = min(w_prev + step, 1.0) if e in edges else max(w_prev - step, 0.0)
            if w > 0 and e[0] in ids and e[1] in ids:
                weights[e] = w
    return SceneGraph(nodes, edges, weights, ramp)


def agent_frame(node: AgentHistory):
    """Origin and rotation angle of the node-centric frame."""
    return node.last.copy(), node.heading()


def to_frame(state: np.ndarray, origin: np.ndarray, theta: float) -> np.ndarray:
    """Express (T, 6) [pos, vel, acc] rows in a frame at ``origin`` rotated by ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, s], [-s, c]])  # world -> local
    out = np.empty_like(state)
    out[:, 0:2] = (state[:, 0:2] - origin) @ R.T
    out[:, 2:4] = state[:, 2:4] @ R.T
    out[:, 4:6] = state[:, 4:6] @ R.T
    return out


def node_features(graph: SceneGraph, agent_id: int):
    """Scaled node and edge input sequences for one target agent.

    Returns (node (8, 6), edge (8, 12), edge scale, origin, theta). The edge
    input pairs the agent's own state with the lifecycle-weighted sum of its
    neighbors' states; the scale is the strongest incoming edge weight.
    """
    node = graph.node(agent_id)
    origin, theta = agent_frame(node)
    own = to_frame(node.state, origin, theta) / FEATURE_SCALE
    agg = np.zeros((PAST, 6))
    scale = 0.0
    for j, w in graph.neighbors(agent_id):
        agg += w * (to_frame(graph.node(j).state, origin, theta) / FEATURE_SCALE)
        scale = max(scale, w)
    return own, np.concatenate([own, agg], axis=1), scale, origin, theta
