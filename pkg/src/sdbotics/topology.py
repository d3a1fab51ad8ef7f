"""Communication topology: weighted undirected graph over the controller
node and robot nodes, with deterministic shortest-path routing.

Node ids are strings; the controller is CONTROLLER_NODE ("C") and robot
nodes are str(robot_id). Edge weights are positive link costs in latency
units. Equal-cost ties are broken by the lexicographically smallest node
sequence so routes are stable across runs.
"""

from __future__ import annotations

import heapq


CONTROLLER_NODE = "C"


class TopologyError(Exception):
    code = "TOPOLOGY_ERROR"


class UnknownNode(TopologyError):
    code = "UNKNOWN_NODE"


class Unreachable(TopologyError):
    code = "UNREACHABLE"


class TopologyGraph:
    def __init__(self) -> None:
        self._adj: dict[str, dict[str, float]] = {}

    def add_node(self, node: str) -> None:
        self._adj.setdefault(str(node), {})

    def remove_node(self, node: str) -> None:
        node = str(node)
        for peer in self._adj.pop(node, {}):
            self._adj[peer].pop(node, None)

    def add_edge(self, a: str, b: str, weight: float) -> None:
        a, b = str(a), str(b)
        if a == b:
            raise ValueError(f"self-loop on {a!r}")
        if not weight > 0:
            raise ValueError(f"edge weight must be positive, got {weight}")
        self.add_node(a)
        self.add_node(b)
        self._adj[a][b] = weight
        self._adj[b][a] = weight

    def has_node(self, node: str) -> bool:
        return str(node) in self._adj

    def nodes(self) -> list[str]:
        return sorted(self._adj)

    def edges(self) -> list[tuple[str, str, float]]:
        seen = []
        for a in sorted(self._adj):
            for b, w in sorted(self._adj[a].items()):
                if a < b:
                    seen.append((a, b, w))
        return seen

    def neighbors(self, node: str) -> dict[str, float]:
        return dict(self._adj[str(node)])


def shortest_path(g: TopologyGraph, src: str, dst: str) -> tuple[list[str], float]:
    """Minimal-total-weight path from src to dst.

    Returns (node list, total cost); src == dst gives ([src], 0). Ties on
    cost resolve to the lexicographically smallest node-id sequence.
    Raises UnknownNode / Unreachable.
    """
    src, dst = str(src), str(dst)
    for node in (src, dst):
        if not g.has_node(node):
            raise UnknownNode(f"node {node!r} not in topology")
    if src == dst:
        return [src], 0.0

    # heap ordered by (cost, path); the path tuple doubles as the tie-break
    heap: list[tuple[float, tuple[str, ...]]] = [(0.0, (src,))]
    done: set[str] = set()
    while heap:
        cost, path = heapq.heappop(heap)
        node = path[-1]
        if node in done:
            continue
        done.add(node)
        if node == dst:
            return list(path), cost
        for peer, weight in g.neighbors(node).items():
            if peer not in done:
                heapq.heappush(heap, (cost + weight, path + (peer,)))
    raise Unreachable(f"no path from {src!r} to {dst!r}")
