"""A* route search over a lane graph."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from ..errors import NoRouteError
from .town import LaneGraph


@dataclass
class Route:
    waypoints: list
    length: float

    def __len__(self):
        return len(self.waypoints)


def _neighbors(graph, i):
    return list(graph.succ[i]) + list(graph.lane_changes[i])


def plan_route(graph: LaneGraph, src: int, dst: int, lane_change_cost: float = 1.0) -> Route:
    """Shortest path by edge length; Euclidean distance is the heuristic.

    Lane-change edges cost their length times ``lane_change_cost`` (>= 1
    keeps the heuristic admissible).
    """
    n = graph.n_waypoints
    if not (0 <= src < n and 0 <= dst < n):
        raise IndexError(f"waypoint out of range: src={src}, dst={dst}, n={n}")
    xy = graph.xy
    goal = xy[dst]
    g_cost = {src: 0.0}
    parent = {src: None}
    heap = [(float(np.linalg.norm(xy[src] - goal)), 0.0, src)]
    closed = set()
    while heap:
        _, g, node = heapq.heappop(heap)
        if node in closed:
            continue
        if node == dst:
            path = []
            while node is not None:
                path.append(node)
                node = parent[node]
            return Route(path[::-1], g)
        closed.add(node)
        changes = graph.lane_changes[node]
        for nxt in _neighbors(graph, node):
            step = float(np.hypot(*(xy[nxt] - xy[node])))
            if nxt in changes and nxt not in graph.succ[node]:
                step *= lane_change_cost
            cand = g + step
            if cand < g_cost.get(nxt, np.inf):
                g_cost[nxt] = cand
                parent[nxt] = node
                heapq.heappush(heap, (cand + float(np.hypot(*(xy[nxt] - goal))), cand, nxt))
    raise NoRouteError(f"no route from waypoint {src} to {dst}")


def route_polyline(graph: LaneGraph, route: Route) -> np.ndarray:
    return graph.xy[route.waypoints]
