"""Goal-conditional policies, the REINFORCE learner and the blocks inverse model.

Policy input layout::

    [state features | goal mask | goal values | current attributes | difference | target words]

The difference block marks specified goal bits that disagree with the current
attributes; the target words locate (relative to the agent) the objects those
bits refer to, in environments that have object locations. Goal-free policies
(the exploratory policy) leave every goal slot at zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import EpisodeTrace, GoalSpec
from .envs import Env
from .nets import MLP, Adam, softmax


@dataclass(frozen=True)
class RewardConfig:
    success: float = 1.0
    step: float = -0.1
    t_max: int = 80

    def __post_init__(self):
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")


def bit_matrix(values, n: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.uint64).reshape(-1, 1)
    return ((arr >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(np.float64)


class GoalPolicy:
    """pi(s, goal) as a softmax over an MLP's action scores."""

    def __init__(self, env: Env, hidden=(100, 100), seed: int = 0, net: MLP | None = None):
        self.env = env
        self.n = env.n_attributes
        self.F = env.feature_dim
        self.T = getattr(env, "target_dim", 0)
        self.input_dim = self.F + 4 * self.n + self.T
        self.net = net if net is not None else MLP([self.input_dim, *hidden, env.n_actions], np.random.default_rng(seed))
        if self.net.sizes[0] != self.input_dim or self.net.sizes[-1] != env.n_actions:
            raise ValueError("network shape does not match environment")

    def copy(self) -> "GoalPolicy":
        return GoalPolicy(self.env, net=self.net.copy())

    @property
    def params(self) -> dict[str, np.ndarray]:
        return self.net.params

    def build_inputs(self, states, masks, values, currents, feature_idx=None) -> np.ndarray:
        """Batch input matrix; ``feature_idx`` may carry precomputed feature indices."""
        B = len(states)
        X = np.zeros((B, self.input_dim))
        if feature_idx is None:
            feature_idx = [self.env.feature_indices(s) for s in states]
        lens = [len(f) for f in feature_idx]
        if sum(lens):
            X[np.repeat(np.arange(B), lens), np.concatenate(feature_idx)] = 1.0
        F, n = self.F, self.n
        X[:, F:F + n] = bit_matrix(masks, n)
        X[:, F + n:F + 2 * n] = bit_matrix(values, n)
        X[:, F + 2 * n:F + 3 * n] = bit_matrix(currents, n)
        diff = [m & (v ^ c) for m, v, c in zip(masks, values, currents)]
        X[:, F + 3 * n:F + 4 * n] = bit_matrix(diff, n)
        if self.T:
            base = F + 4 * n
            for b, (s, d) in enumerate(zip(states, diff)):
                if d:
                    X[b, base + self.env.target_indices(s, d)] = 1.0
        return X

    def inputs_for(self, states, goals, currents) -> np.ndarray:
        masks = [0 if g is None else g.mask for g in goals]
        values = [0 if g is None else g.values for g in goals]
        return self.build_inputs(states, masks, values, currents)

    def probs(self, X: np.ndarray) -> np.ndarray:
        return self.net.probs(X)

    def sample(self, X: np.ndarray, rng: np.random.Generator, greedy=False) -> np.ndarray:
        p = self.probs(X)
        if greedy:
            return p.argmax(axis=1)
        u = rng.random((len(p), 1))
        a = (p.cumsum(axis=1) < u).sum(axis=1)
        return np.minimum(a, p.shape[1] - 1)


def act(policy: GoalPolicy, state, goal: GoalSpec | None, rng: np.random.Generator,
        greedy: bool = False, current: int | None = None) -> int:
    if goal is not None and goal.n != policy.n:
        raise ValueError("goal schema does not match the policy's environment")
    cur = policy.env.attribute_bits(state) if current is None else current
    X = policy.inputs_for([state], [goal], [cur])
    return int(policy.sample(X, rng, greedy)[0])


def returns_to_go(rewards) -> np.ndarray:
    r = np.asarray(rewards, dtype=np.float64)
    return np.cumsum(r[::-1])[::-1].copy()


def episode_arrays(policy: GoalPolicy, episode: EpisodeTrace):
    recs = [r for r in episode.records if r.action is not None]
    X = policy.inputs_for([r.state for r in recs], [r.goal for r in recs], [r.attributes.bits for r in recs])
    actions = np.array([r.action for r in recs], dtype=np.int64)
    rewards = np.array([r.reward for r in recs], dtype=np.float64)
    return X, actions, rewards


def reinforce_update(policy: GoalPolicy, episode: EpisodeTrace, baseline: float, lr: float) -> GoalPolicy:
    """One gradient-ascent step on ``sum_t (G_t - baseline) grad log pi(a_t | s_t, goal)``.

    ``G_t`` is the undiscounted return-to-go. Returns a new policy; the input
    policy is left untouched.
    """
    if len(episode) == 0:
        raise ValueError("empty episode")
    X, actions, rewards = episode_arrays(policy, episode)
    new = policy.copy()
    if lr == 0.0 or len(actions) == 0:
        return new
    adv = returns_to_go(rewards) - baseline
    grads, _ = policy.net.grad_logp(X, actions, adv)
    new.net.apply(grads, lr)
    return new


@dataclass
class ReinforceLearner:
    """Batched REINFORCE with a choice of baseline.

    ``baseline`` selects the variance-reduction term subtracted from ``G_t``:

    * ``"episode"``: running mean (EMA) of episode returns ``G_0``;
    * ``"step"``: one running mean of ``G_t`` per time index ``t``;
    * ``"value"``: a small regression network ``b(x)`` fitted to ``G_t``
      on the same inputs as the policy (it never affects the policy's
      gradient direction in expectation, only its variance).

    Finished segments are queued and applied as one averaged step once
    ``batch_segments`` have accumulated.
    """

    policy: GoalPolicy
    lr: float = 0.01
    baseline_decay: float = 0.99
    batch_segments: int = 16
    entropy: float = 0.0
    optimizer: str = "sgd"
    baseline: str = "episode"
    average: str = "segments"  # divide the summed gradient by #segments or #steps
    value_hidden: int = 64
    value_lr: float = 1e-3
    warmup: int = 0  # initial flushes that only fit the value baseline
    seed: int = 0
    running: float = 0.0
    _initialized: bool = False
    _step_baseline: np.ndarray = field(default_factory=lambda: np.zeros(0))
    _pending: list = field(default_factory=list)
    _adam: Adam | None = None
    value_net: MLP | None = None
    _value_opt: Adam | None = None
    updates: int = 0

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.baseline not in ("episode", "step", "value"):
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.average not in ("segments", "steps"):
            raise ValueError(f"unknown averaging {self.average!r}")
        if self.optimizer == "adam":
            self._adam = Adam(self.policy.params, lr=self.lr)
        if self.baseline == "value" and self.value_net is None:
            self.value_net = MLP([self.policy.input_dim, self.value_hidden, 1], np.random.default_rng(self.seed))
            self._value_opt = Adam(self.value_net.params, lr=self.value_lr)

    def _baseline_for(self, X: np.ndarray, G: np.ndarray) -> np.ndarray:
        if self.baseline == "value":
            return self.value_net.logits(X)[:, 0]
        if self.baseline == "episode":
            if not self._initialized:
                self.running = float(G[0])
                self._initialized = True
            b = np.full(len(G), self.running)
            self.running = self.baseline_decay * self.running + (1 - self.baseline_decay) * float(G[0])
            return b
        L, old = len(G), len(self._step_baseline)
        if L > old:
            # unseen time indices start at the first observed return
            self._step_baseline = np.concatenate([self._step_baseline, G[old:]])
        b = self._step_baseline[:L].copy()
        d = self.baseline_decay
        self._step_baseline[:L] = d * b + (1 - d) * G
        return b

    def add(self, X: np.ndarray, actions, rewards) -> None:
        if len(actions) == 0:
            return
        G = returns_to_go(rewards)
        b = self._baseline_for(X, G)
        self._pending.append((X, np.asarray(actions, dtype=np.int64), G - b, G))
        if len(self._pending) >= self.batch_segments:
            self.flush()

    def flush(self) -> None:
        if not self._pending:
            return
        X = np.concatenate([p[0] for p in self._pending])
        A = np.concatenate([p[1] for p in self._pending])
        W = np.concatenate([p[2] for p in self._pending])
        if self.updates >= self.warmup or self.value_net is None:
            grads, _ = self.policy.net.grad_logp(X, A, W, entropy=self.entropy)
            denom = len(self._pending) if self.average == "segments" else len(A)
            if self._adam is None:
                self.policy.net.apply(grads, self.lr / denom)
            else:
                # Adam descends, so hand it the negated ascent direction
                self._adam.step(self.policy.params, {k: -g / denom for k, g in grads.items()})
        if self.value_net is not None:
            G = np.concatenate([p[3] for p in self._pending])
            v, acts = self.value_net.forward(X)
            self._value_opt.step(self.value_net.params, self.value_net.backward(acts, (v - G[:, None]) / len(G)))
        self._pending.clear()
        self.updates += 1


# --- inverse model (blocks world) ---------------------------------------------


def inverse_dataset(env: Env, detector, n: int, rng: np.random.Generator, walk: int = 1):
    """One-step random-action transitions ``(state, next attributes, action)``.

    Transitions that leave the detected attributes unchanged are dropped.
    """
    out = []
    state = None
    steps = 0
    while len(out) < n:
        if state is None or steps % walk == 0:
            state = env.reset(int(rng.integers(2**62)))
        a = int(rng.integers(env.n_actions))
        nxt = env.step(state, a)
        before, after = detector.detect_bits(state), detector.detect_bits(nxt)
        steps += 1
        if after != before:
            out.append((state, before, after, a))
        state = nxt
    return out


def train_inverse_model(
    env: Env,
    dataset,
    hidden=(256, 256),
    epochs: int = 10,
    lr: float = 1e-3,
    batch: int = 256,
    seed: int = 0,
    losses: list | None = None,
) -> GoalPolicy:
    """Cross-entropy classifier predicting the action from (state, target attributes).

    ``dataset`` holds ``(state, current_bits, next_bits, action)`` tuples; the
    target enters through the (fully specified) goal slots.
    """
    rng = np.random.default_rng(seed)
    policy = GoalPolicy(env, hidden=hidden, seed=int(rng.integers(2**31)))
    full = (1 << env.n_attributes) - 1
    feats = [env.feature_indices(s) for s, _, _, _ in dataset]
    cur = [c for _, c, _, _ in dataset]
    nxt = [t for _, _, t, _ in dataset]
    actions = np.array([a for _, _, _, a in dataset], dtype=np.int64)
    opt = Adam(policy.params, lr=lr)
    N = len(dataset)
    for _ in range(epochs):
        perm = rng.permutation(N)
        total = 0.0
        for start in range(0, N, batch):
            sl = perm[start:start + batch]
            X = policy.build_inputs([dataset[i][0] for i in sl], [full] * len(sl), [nxt[i] for i in sl],
                                    [cur[i] for i in sl], feature_idx=[feats[i] for i in sl])
            grads, logp = policy.net.grad_logp(X, actions[sl], np.full(len(sl), -1.0 / len(sl)))
            opt.step(policy.params, grads)
            total -= logp.sum()
        if losses is not None:
            losses.append(total / N)
    return policy


def inverse_loss(policy: GoalPolicy, dataset) -> float:
    full = (1 << policy.n) - 1
    X = policy.build_inputs([s for s, _, _, _ in dataset], [full] * len(dataset),
                            [t for _, _, t, _ in dataset], [c for _, c, _, _ in dataset])
    p = softmax(policy.net.logits(X))
    a = np.array([d[3] for d in dataset])
    return float(-np.log(p[np.arange(len(a)), a]).mean())
