"""Explore phase: random or count-based exploratory policies over attribute transitions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ContractError
from .policy import GoalPolicy, ReinforceLearner

BONUS_SMOOTHING = 0.001


def smoothed_bonus(count: int, total: int) -> float:
    """``(count / total + 0.001) ** -0.5`` with ``count / total := 0`` when ``total == 0``."""
    if count < 0 or total < 0 or count > total:
        raise ContractError("need 0 <= count <= total")
    frac = count / total if total else 0.0
    return (frac + BONUS_SMOOTHING) ** -0.5


def sqrt_bonus(count: int) -> float:
    """``(count + 1) ** -0.5`` on the pre-increment count (first traversal earns 1)."""
    if count < 0:
        raise ContractError("count must be nonnegative")
    return (count + 1) ** -0.5


@dataclass
class ExploreCounts:
    counts: dict[tuple[int, int], int] = field(default_factory=dict)
    total: int = 0

    def add(self, src: int, dst: int) -> int:
        """Increment the (src, dst) count; returns the pre-increment count."""
        if src == dst:
            raise ContractError("self-loops are never recorded")
        before = self.counts.get((src, dst), 0)
        self.counts[(src, dst)] = before + 1
        self.total += 1
        return before

    def get(self, src: int, dst: int) -> int:
        return self.counts.get((src, dst), 0)

    @property
    def edges(self) -> set[tuple[int, int]]:
        return set(self.counts)

    def merge(self, other: "ExploreCounts") -> "ExploreCounts":
        out = ExploreCounts(dict(self.counts), self.total)
        for e, c in sorted(other.counts.items()):
            out.counts[e] = out.counts.get(e, 0) + c
            out.total += c
        return out

    def into_graph(self, graph) -> None:
        for (i, j), c in sorted(self.counts.items()):
            graph.add_explore(i, j, c)


def explore(env, detector, n_steps: int, rng: np.random.Generator, policy: GoalPolicy | None = None,
            bonus: str = "smoothed", horizon: int = 80, n_envs: int = 16, lr: float = 0.01,
            bonus_scale: float = 1.0, learn: bool = True, batch_segments: int = 16, entropy: float = 0.0,
            optimizer: str = "sgd"):
    """Run ``n_steps`` environment steps under the exploratory policy.

    ``policy=None`` explores with uniformly random actions. Otherwise the
    goal-free policy is trained online with REINFORCE on the count-based
    bonus, paid (scaled by ``bonus_scale``) at every attribute change. Returns
    ``(counts, policy)``; count keys are attribute bit patterns.
    """
    if n_steps < 0:
        raise ContractError("step budget must be nonnegative")
    if bonus not in ("smoothed", "sqrt"):
        raise ContractError(f"unknown bonus {bonus!r}")
    counts = ExploreCounts()
    n_envs = max(1, min(n_envs, n_steps)) if n_steps else 1
    learner = ReinforceLearner(policy, lr=lr, batch_segments=batch_segments, entropy=entropy,
                               optimizer=optimizer) if (policy is not None and learn) else None

    states = [env.reset(int(rng.integers(2**62))) for _ in range(n_envs)]
    attrs = [detector.detect_bits(s) for s in states]
    t_ep = [0] * n_envs
    buf_X = [[] for _ in range(n_envs)]
    buf_a = [[] for _ in range(n_envs)]
    buf_r = [[] for _ in range(n_envs)]

    steps = 0
    while steps < n_steps:
        active = list(range(min(n_envs, n_steps - steps)))
        if policy is None:
            actions = rng.integers(env.n_actions, size=len(active))
            X = None
        else:
            X = policy.build_inputs([states[i] for i in active], [0] * len(active),
                                    [0] * len(active), [attrs[i] for i in active])
            actions = policy.sample(X, rng)
        for k, i in enumerate(active):
            a = int(actions[k])
            nxt = env.step(states[i], a)
            rho = detector.detect_bits(nxt)
            r = 0.0
            if rho != attrs[i]:
                total_before = counts.total
                before = counts.add(attrs[i], rho)
                r = bonus_scale * (smoothed_bonus(before, total_before) if bonus == "smoothed" else sqrt_bonus(before))
            if learner is not None:
                buf_X[i].append(X[k])
                buf_a[i].append(a)
                buf_r[i].append(r)
            states[i], attrs[i] = nxt, rho
            t_ep[i] += 1
            steps += 1
            if t_ep[i] >= horizon:
                if learner is not None:
                    learner.add(np.asarray(buf_X[i]), buf_a[i], buf_r[i])
                    buf_X[i], buf_a[i], buf_r[i] = [], [], []
                states[i] = env.reset(int(rng.integers(2**62)))
                attrs[i] = detector.detect_bits(states[i])
                t_ep[i] = 0
    if learner is not None:
        learner.flush()
    return counts, policy


def reachable_edges(env, seeds, detector=None) -> set[tuple[int, int]]:
    """Every attribute transition reachable from the given resets (breadth-first, exact dynamics)."""
    attr = (lambda s: detector.detect_bits(s)) if detector is not None else env.attribute_bits
    edges = set()
    for seed in seeds:
        start = env.reset(seed)
        seen = {start}
        frontier = [start]
        while frontier:
            nxt_frontier = []
            for s in frontier:
                a_s = attr(s)
                for a in range(env.n_actions):
                    t = env.step(s, a)
                    a_t = attr(t)
                    if a_t != a_s:
                        edges.add((a_s, a_t))
                    if t not in seen:
                        seen.add(t)
                        nxt_frontier.append(t)
            frontier = nxt_frontier
    return edges
