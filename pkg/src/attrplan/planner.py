"""Shortest paths over -log edge probabilities.

Ties on path cost are broken by the lexicographic order of the interned
node-id sequence, so plans are deterministic.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .core import AttributeVector, GoalSpec, satisfies
from .graph import TransitionGraph


class PlanningError(Exception):
    reason = "planning"


class Unreachable(PlanningError):
    reason = "unreachable"


class UnknownStart(PlanningError):
    reason = "unknown-start"


@dataclass(frozen=True)
class Plan:
    """Node path with the clamped edge probabilities used for its cost."""

    ids: tuple[int, ...]
    nodes: tuple[AttributeVector, ...]
    probs: tuple[float, ...]
    cost: float

    def __len__(self) -> int:
        return len(self.nodes) - 1

    @property
    def success_probability(self) -> float:
        return math.prod(self.probs)


def clamp_probability(p: float, floor: float = 1e-6, ceiling: float = 1.0) -> float:
    return min(max(p, floor), ceiling)


def edge_weight(p: float, floor: float = 1e-6, ceiling: float = 1.0) -> float:
    return -math.log(clamp_probability(p, floor, ceiling))


def dijkstra(adj: Mapping[int, Sequence[tuple[int, float]]], start: int,
             is_target: Callable[[int], bool]) -> tuple[float, tuple[int, ...]] | None:
    """Minimum ``(cost, path)`` to the first node satisfying ``is_target``.

    ``adj[u]`` lists ``(v, w)`` with ``w >= 0``. Keys are compared as
    ``(cost, node-id path)`` tuples, which realizes the lexicographic
    tie-break. Costs accumulate left to right along the path.
    """
    # best cost and path are kept apart so most relaxations are rejected on a float compare
    best_cost: dict[int, float] = {start: 0.0}
    best_path: dict[int, tuple[int, ...]] = {start: (start,)}
    heap = [(0.0, (start,))]
    done = set()
    push, pop = heapq.heappush, heapq.heappop
    while heap:
        cost, path = pop(heap)
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        if is_target(u):
            return cost, path
        for v, w in adj.get(u, ()):
            nc = cost + w
            old = best_cost.get(v)
            if old is not None and nc > old:
                continue
            if v in done:
                continue
            p = path + (v,)
            if old is None or nc < old or p < best_path[v]:
                best_cost[v] = nc
                best_path[v] = p
                push(heap, (nc, p))
    return None


class Planner:
    """Cached weighted adjacency over a graph for one edge estimator.

    ``kind`` is ``"decayed"`` (success statistics), ``"ablated"``
    (normalized exploration counts) or a callable ``(graph) -> table`` with the
    same shape as :meth:`TransitionGraph.probability_table`.
    """

    def __init__(self, graph: TransitionGraph, kind="decayed"):
        self.graph = graph
        self.kind = kind
        self._version = None
        self._adj: dict[int, list[tuple[int, float]]] = {}
        self._prob: dict[tuple[int, int], float] = {}

    def _refresh(self):
        if self._version == self.graph.version:
            return
        table = self.kind(self.graph) if callable(self.kind) else self.graph.probability_table(self.kind)
        lo, hi = self.graph.prob_floor, self.graph.prob_ceiling
        self._prob = {(i, j): clamp_probability(p, lo, hi) for i, row in table.items() for j, p in row}
        self._adj = {i: [(j, -math.log(self._prob[(i, j)])) for j, _ in row] for i, row in table.items()}
        self._version = self.graph.version

    def plan(self, start, goal: GoalSpec) -> Plan:
        self._refresh()
        g = self.graph
        sb = start.bits if isinstance(start, AttributeVector) else int(start)
        s = g.node_id.get(sb)
        start_vec = AttributeVector(sb, g.n)
        if satisfies(start_vec, goal):
            ids = () if s is None else (s,)
            return Plan(ids, (start_vec,), (), 0.0)
        if s is None:
            raise UnknownStart(f"start attributes {start_vec} are not a graph node")
        nodes = g.nodes
        mask, values = goal.mask, goal.values
        found = dijkstra(self._adj, s, lambda u: (nodes[u] ^ values) & mask == 0)
        if found is None:
            raise Unreachable(f"no node satisfying the goal is reachable from {start_vec}")
        cost, path = found
        probs = tuple(self._prob[(a, b)] for a, b in zip(path, path[1:]))
        return Plan(path, tuple(g.vector(i) for i in path), probs, cost)


def plan(graph: TransitionGraph, start, goal: GoalSpec, prob_fn="decayed") -> Plan:
    return Planner(graph, prob_fn).plan(start, goal)
