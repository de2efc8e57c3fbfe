"""Plan execution with replanning, and the aliasing diagnostic."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .core import AttributeVector, EpisodeTrace, GoalSpec, TraceRecord
from .graph import TransitionGraph
from .planner import Planner, PlanningError

log = logging.getLogger(__name__)


@dataclass
class Outcome:
    success: bool
    steps: int
    replans: int
    reason: str  # "success", "unreachable" or "budget"
    trace: EpisodeTrace | None = None
    final: AttributeVector | None = None
    novel_node: AttributeVector | None = None
    predicted_success: float | None = None  # product of edge probabilities of the first plan


def execute(env, detector, policy, graph: TransitionGraph | Planner, goal: GoalSpec, budget: int,
            rng: np.random.Generator, state=None, seed: int | None = None, t_max: int = 80,
            greedy: bool = False, prob_fn="decayed", record_trace: bool = False) -> Outcome:
    """Reach ``goal`` by repeatedly planning over the graph and following the policy.

    A new plan is computed whenever the detected attributes leave the current
    plan (or a leg times out after ``t_max`` steps). Success is declared only
    when the detected attributes satisfy the goal.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    planner = graph if isinstance(graph, Planner) else Planner(graph, prob_fn)
    if state is None:
        state = env.reset(seed if seed is not None else int(rng.integers(2**62)))
    n = goal.n
    records = []
    steps = replans = 0
    path: tuple[int, ...] | None = None
    k = 0  # index of the current node within path
    leg = 0
    predicted = None
    nodes = planner.graph.nodes

    def finish(success, reason, rho, novel=None):
        trace = EpisodeTrace(tuple(records), seed or 0) if record_trace else None
        return Outcome(success, steps, replans, reason, trace, AttributeVector(rho, n), novel, predicted)

    while True:
        rho = detector.detect_bits(state)
        if ((rho ^ goal.values) & goal.mask) == 0:
            if record_trace:
                records.append(TraceRecord(state, AttributeVector(rho, n), None, 0.0, goal))
            return finish(True, "success", rho)
        if steps >= budget:
            return finish(False, "budget", rho)

        if path is not None and k + 1 < len(path) and rho == nodes[path[k + 1]]:
            k += 1
            leg = 0
        needs_plan = path is None or rho != nodes[path[k]] or k + 1 >= len(path) or leg >= t_max
        if needs_plan:
            try:
                plan = planner.plan(rho, goal)
            except PlanningError:
                novel = None if planner.graph.has_node(rho) else AttributeVector(rho, n)
                if novel is not None:
                    log.debug("executor reached attributes %s absent from the graph", novel)
                return finish(False, "unreachable", rho, novel)
            replans += 1
            if predicted is None:
                predicted = plan.success_probability
            path, k, leg = plan.ids, 0, 0

        target = nodes[path[k + 1]]
        sub = GoalSpec((1 << n) - 1, target, n)
        X = policy.build_inputs([state], [sub.mask], [sub.values], [rho])
        a = int(policy.sample(X, rng, greedy)[0])
        if record_trace:
            records.append(TraceRecord(state, AttributeVector(rho, n), a, 0.0, sub))
        state = env.step(state, a)
        steps += 1
        leg += 1


def run_policy(env, detector, policy, goal: GoalSpec, budget: int, rng: np.random.Generator,
               state=None, seed: int | None = None, greedy: bool = False) -> Outcome:
    """Reactive baseline: act on the final goal directly, no planning."""
    if state is None:
        state = env.reset(seed if seed is not None else int(rng.integers(2**62)))
    steps = 0
    while True:
        rho = detector.detect_bits(state)
        if ((rho ^ goal.values) & goal.mask) == 0:
            return Outcome(True, steps, 0, "success", final=AttributeVector(rho, goal.n))
        if steps >= budget:
            return Outcome(False, steps, 0, "budget", final=AttributeVector(rho, goal.n))
        X = policy.build_inputs([state], [goal.mask], [goal.values], [rho])
        state = env.step(state, int(policy.sample(X, rng, greedy)[0]))
        steps += 1


@dataclass
class EdgeAliasing:
    src: AttributeVector
    dst: AttributeVector
    groups: dict = field(default_factory=dict)  # key -> (attempts, successes)
    edge_probability: float | None = None

    @property
    def rates(self) -> dict:
        return {k: s / a for k, (a, s) in self.groups.items() if a}

    @property
    def spread(self) -> float:
        r = list(self.rates.values())
        return max(r) - min(r) if r else 0.0

    @property
    def attempts(self) -> int:
        return sum(a for a, _ in self.groups.values())


def aliasing_report(graph: TransitionGraph | None, traces, key_fn) -> dict[tuple[int, int], EdgeAliasing]:
    """Per-edge success rates grouped by a coarse source-state key.

    Each trace is one attempted transition: its first record holds the source
    state and the (fully specified) goal, its last record the attributes
    reached. ``key_fn`` maps a source state to its group key. The spread
    (max - min group success rate) scores how strongly the edge is aliased.
    """
    report: dict[tuple[int, int], EdgeAliasing] = {}
    for tr in traces:
        if not tr.records:
            continue
        first, last = tr.records[0], tr.records[-1]
        if first.goal is None:
            continue
        src, dst = first.attributes, first.goal.as_vector()
        e = (src.bits, dst.bits)
        entry = report.get(e)
        if entry is None:
            entry = report[e] = EdgeAliasing(src, dst)
            if graph is not None:
                entry.edge_probability = graph.edge_probability(src, dst)
        key = key_fn(first.state)
        a, s = entry.groups.get(key, (0, 0))
        entry.groups[key] = (a + 1, s + int(last.attributes == dst))
    return report


def attempt_trace(env, detector, policy, state, goal_bits: int, rng, t_max: int, greedy=False) -> EpisodeTrace:
    """Roll the policy toward a neighboring attribute set until attributes change or ``t_max``."""
    n = env.n_attributes
    sub = GoalSpec((1 << n) - 1, goal_bits, n)
    rho0 = detector.detect_bits(state)
    recs = []
    for _ in range(t_max):
        rho = detector.detect_bits(state)
        X = policy.build_inputs([state], [sub.mask], [sub.values], [rho])
        a = int(policy.sample(X, rng, greedy)[0])
        recs.append(TraceRecord(state, AttributeVector(rho, n), a, 0.0, sub))
        state = env.step(state, a)
        if detector.detect_bits(state) != rho0:
            break
    rho = detector.detect_bits(state)
    recs.append(TraceRecord(state, AttributeVector(rho, n), None, 1.0 if rho == goal_bits else 0.0, sub))
    return EpisodeTrace(tuple(recs))


def summarize_aliasing(report) -> dict:
    spreads = [e.spread for e in report.values() if len(e.groups) > 1]
    return {
        "edges": len(report),
        "multi_group_edges": len(spreads),
        "mean_spread": float(np.mean(spreads)) if spreads else 0.0,
        "max_spread": float(np.max(spreads)) if spreads else 0.0,
    }


def group_by_edge(traces):
    out = defaultdict(list)
    for tr in traces:
        if tr.records and tr.records[0].goal is not None:
            out[(tr.records[0].attributes.bits, tr.records[0].goal.values)].append(tr)
    return out


def sample_attempt_traces(env, detector, policy, graph: TransitionGraph, n: int, rng: np.random.Generator,
                          t_max: int, walk: int = 20, greedy: bool = False) -> list[EpisodeTrace]:
    """Attempted one-edge transitions along random walks of sampled goals.

    Each walk starts from a fresh reset and continues from wherever the
    previous attempt ended, restarting after ``walk`` attempts or at a node
    with no exploration edges.
    """
    traces = []
    state, age = None, 0
    while len(traces) < n:
        if state is None or age >= walk:
            state, age = env.reset(int(rng.integers(2**62))), 0
        g = graph.sample_goal_id(detector.detect_bits(state), rng)
        if g is None:
            state = None
            continue
        tr = attempt_trace(env, detector, policy, state, graph.nodes[g], rng, t_max, greedy)
        traces.append(tr)
        state = tr.records[-1].state
        age += 1
    return traces
