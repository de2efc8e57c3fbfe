"""Phase 3: train the goal-conditional policy while filling in the success table.

Each attempt starts from the current detected attributes, targets a neighbor
sampled from the exploration counts, and ends on the first attribute change or
after ``t_max`` steps. Attempts are recorded in the graph and, for the
reinforcement-learned variant, turned into a REINFORCE segment with reward
``step`` per action plus ``success`` when the target is reached.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import TransitionGraph
from .policy import GoalPolicy, ReinforceLearner, RewardConfig


@dataclass
class TrainStats:
    steps: int = 0
    attempts: int = 0
    successes: int = 0
    resets: int = 0
    history: list | None = None  # per-window success rates

    @property
    def success_rate(self) -> float:
        return self.successes / self.attempts if self.attempts else 0.0


def train_policy(env, detector, graph: TransitionGraph, policy: GoalPolicy, n_steps: int,
                 rng: np.random.Generator, reward: RewardConfig = RewardConfig(), lr: float = 0.01,
                 n_envs: int = 16, batch_segments: int = 16, entropy: float = 0.01,
                 episode_len: int = 400, learn: bool = True, window: int = 2000, optimizer: str = "sgd",
                 average: str = "segments", baseline: str = "value", warmup: int = 0,
                 value_lr: float = 1e-3) -> TrainStats:
    """Joint REINFORCE training of ``policy`` and collection of attempt statistics.

    Environments restart every ``episode_len`` steps, and whenever the
    current attributes have no outgoing exploration edge.
    """
    learner = ReinforceLearner(policy, lr=lr, batch_segments=batch_segments, entropy=entropy,
                               optimizer=optimizer, average=average, baseline=baseline,
                               warmup=warmup, value_lr=value_lr, seed=int(rng.integers(2**31))) if learn else None
    n = env.n_attributes
    full = (1 << n) - 1
    stats = TrainStats(history=[])
    win_a = win_s = 0

    def fresh():
        s = env.reset(int(rng.integers(2**62)))
        return s, detector.detect_bits(s)

    states, attrs = [], []
    for _ in range(n_envs):
        s, r = fresh()
        states.append(s)
        attrs.append(r)
    goals: list[int | None] = [None] * n_envs
    t_att = [0] * n_envs
    t_ep = [0] * n_envs
    buf_X = [[] for _ in range(n_envs)]
    buf_a = [[] for _ in range(n_envs)]

    while stats.steps < n_steps:
        # make sure every worker has a goal, restarting isolated ones
        for i in range(n_envs):
            guard = 0
            while goals[i] is None:
                g = graph.sample_goal_id(attrs[i], rng)
                if g is None:
                    states[i], attrs[i] = fresh()
                    t_ep[i] = 0
                    stats.resets += 1
                    guard += 1
                    if guard > 1000:
                        raise RuntimeError("no start state with an outgoing edge")
                else:
                    goals[i] = graph.nodes[g]
                    t_att[i] = 0
        active = list(range(min(n_envs, n_steps - stats.steps)))
        X = policy.build_inputs([states[i] for i in active], [full] * len(active),
                                [goals[i] for i in active], [attrs[i] for i in active])
        actions = policy.sample(X, rng)
        for k, i in enumerate(active):
            a = int(actions[k])
            nxt = env.step(states[i], a)
            rho = detector.detect_bits(nxt)
            if learner is not None:
                buf_X[i].append(X[k])
                buf_a[i].append(a)
            t_att[i] += 1
            t_ep[i] += 1
            stats.steps += 1
            changed = rho != attrs[i]
            if changed or t_att[i] >= reward.t_max:
                ok = rho == goals[i]
                graph.record_attempt(attrs[i], rho, goals[i])
                stats.attempts += 1
                stats.successes += int(ok)
                win_a += 1
                win_s += int(ok)
                if win_a >= window:
                    stats.history.append(win_s / win_a)
                    win_a = win_s = 0
                if learner is not None:
                    rewards = np.full(len(buf_a[i]), reward.step)
                    if ok:
                        rewards[-1] += reward.success
                    learner.add(np.asarray(buf_X[i]), buf_a[i], rewards)
                    buf_X[i], buf_a[i] = [], []
                goals[i] = None
            states[i], attrs[i] = nxt, rho
            if t_ep[i] >= episode_len and goals[i] is None:
                states[i], attrs[i] = fresh()
                t_ep[i] = 0
    if learner is not None:
        learner.flush()
    if win_a:
        stats.history.append(win_s / win_a)
    return stats


def collect_inverse_statistics(env, detector, graph: TransitionGraph, policy: GoalPolicy, n_attempts: int,
                               rng: np.random.Generator, t_max: int = 1, n_chains: int = 256,
                               episode_len: int = 20, greedy: bool = True) -> TrainStats:
    """Roll a fixed (supervised) policy on sampled one-step goals and record the outcomes.

    ``n_chains`` walks run in lockstep; each attempt starts where the previous
    one ended, and a walk restarts after ``episode_len`` attempts or at a node
    without outgoing exploration edges.
    """
    full = (1 << env.n_attributes) - 1
    stats = TrainStats(history=[])
    states = [None] * n_chains
    age = [0] * n_chains
    while stats.attempts < n_attempts:
        m = min(n_chains, n_attempts - stats.attempts)
        attrs, goals = [], []
        for i in range(m):
            while True:
                if states[i] is None or age[i] >= episode_len:
                    states[i] = env.reset(int(rng.integers(2**62)))
                    age[i] = 0
                rho = detector.detect_bits(states[i])
                g = graph.sample_goal_id(rho, rng)
                if g is not None:
                    break
                states[i] = None
                stats.resets += 1
            attrs.append(rho)
            goals.append(graph.nodes[g])
        cur = list(attrs)
        live = list(range(m))
        for _ in range(t_max):
            if not live:
                break
            X = policy.build_inputs([states[i] for i in live], [full] * len(live),
                                    [goals[i] for i in live], [cur[i] for i in live])
            acts = policy.sample(X, rng, greedy)
            still = []
            for k, i in enumerate(live):
                states[i] = env.step(states[i], int(acts[k]))
                stats.steps += 1
                rho = detector.detect_bits(states[i])
                if rho != cur[i]:
                    cur[i] = rho
                else:
                    still.append(i)
            live = still
        for i in range(m):
            ok = cur[i] == goals[i]
            graph.record_attempt(attrs[i], cur[i], goals[i])
            stats.attempts += 1
            stats.successes += int(ok)
            age[i] += 1
    return stats


def train_reactive_baseline(env, detector, policy: GoalPolicy, n_steps: int, rng: np.random.Generator,
                            mode: str = "curriculum", horizon: int = 200, reward: RewardConfig = RewardConfig(),
                            lr: float = 0.03, n_envs: int = 16, batch_segments: int = 16, entropy: float = 0.03,
                            optimizer: str = "sgd", average: str = "steps", baseline: str = "value",
                            warmup: int = 300, value_lr: float = 3e-3, window: int = 2000) -> TrainStats:
    """REINFORCE directly on final goals, without planning.

    Tasks come from :func:`tasks.curriculum_task`; in curriculum mode the
    difficulty cap follows the fraction of ``n_steps`` consumed. Each episode
    is one REINFORCE segment ending at success or after ``horizon`` steps.
    Tasks already satisfied at the start are redrawn.
    """
    from .tasks import curriculum_task

    learner = ReinforceLearner(policy, lr=lr, batch_segments=batch_segments, entropy=entropy,
                               optimizer=optimizer, average=average, baseline=baseline,
                               warmup=warmup, value_lr=value_lr, seed=int(rng.integers(2**31)))
    stats = TrainStats(history=[])
    win_a = win_s = 0

    def draw():
        while True:
            s, goal = curriculum_task(env, rng, stats.steps / max(n_steps, 1), mode)
            rho = detector.detect_bits(s)
            if (rho ^ goal.values) & goal.mask:
                return s, goal, rho

    slots = [draw() for _ in range(n_envs)]
    t_ep = [0] * n_envs
    buf_X = [[] for _ in range(n_envs)]
    buf_a = [[] for _ in range(n_envs)]
    while stats.steps < n_steps:
        active = list(range(min(n_envs, n_steps - stats.steps)))
        X = policy.build_inputs([slots[i][0] for i in active], [slots[i][1].mask for i in active],
                                [slots[i][1].values for i in active], [slots[i][2] for i in active])
        actions = policy.sample(X, rng)
        for k, i in enumerate(active):
            s, goal, _ = slots[i]
            a = int(actions[k])
            nxt = env.step(s, a)
            rho = detector.detect_bits(nxt)
            buf_X[i].append(X[k])
            buf_a[i].append(a)
            t_ep[i] += 1
            stats.steps += 1
            ok = ((rho ^ goal.values) & goal.mask) == 0
            if ok or t_ep[i] >= horizon:
                rewards = np.full(len(buf_a[i]), reward.step)
                if ok:
                    rewards[-1] += reward.success
                learner.add(np.asarray(buf_X[i]), buf_a[i], rewards)
                buf_X[i], buf_a[i] = [], []
                stats.attempts += 1
                stats.successes += int(ok)
                win_a += 1
                win_s += int(ok)
                if win_a >= window:
                    stats.history.append(win_s / win_a)
                    win_a = win_s = 0
                slots[i] = draw()
                t_ep[i] = 0
            else:
                slots[i] = (nxt, goal, rho)
    learner.flush()
    if win_a:
        stats.history.append(win_s / win_a)
    return stats
