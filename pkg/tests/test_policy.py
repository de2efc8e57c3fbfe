import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from attrplan.core import EpisodeTrace, GoalSpec, TraceRecord, AttributeVector
from attrplan.detector import ExactDetector
from attrplan.nets import MLP, softmax
from attrplan.policy import (GoalPolicy, ReinforceLearner, RewardConfig, act, inverse_dataset, inverse_loss,
                             reinforce_update, returns_to_go, train_inverse_model)


def relative_error(a, b):
    return np.abs(a - b).max() / max(np.abs(a).max() + np.abs(b).max(), 1e-12)


def finite_difference(net, X, actions, weights, entropy=0.0, h=1e-6):
    """Central differences of sum_i w_i log pi(a_i|x_i) + entropy * sum_i H_i."""
    def objective():
        z = net.logits(X)
        z = z - z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        val = (weights * logp[np.arange(len(actions)), actions]).sum()
        if entropy:
            val += entropy * -(np.exp(logp) * logp).sum()
        return val

    out = {}
    for k, P in net.params.items():
        g = np.zeros_like(P)
        it = np.nditer(P, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = P[i]
            P[i] = old + h
            up = objective()
            P[i] = old - h
            down = objective()
            P[i] = old
            g[i] = (up - down) / (2 * h)
        out[k] = g
    return out


def random_instance(seed):
    rng = np.random.default_rng(seed)
    sizes = [int(rng.integers(2, 6)), *[int(x) for x in rng.integers(2, 6, size=rng.integers(0, 3))],
             int(rng.integers(2, 5))]
    net = MLP(sizes, rng, zero_output=False)
    B = int(rng.integers(1, 5))
    X = rng.normal(size=(B, sizes[0]))
    actions = rng.integers(sizes[-1], size=B)
    weights = rng.normal(size=B)
    return net, X, actions, weights


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("entropy", [0.0, 0.3])
def test_policy_gradient_matches_finite_differences(seed, entropy):
    net, X, actions, weights = random_instance(seed)
    grads, _ = net.grad_logp(X, actions, weights, entropy=entropy)
    fd = finite_difference(net, X, actions, weights, entropy)
    for k in grads:
        assert relative_error(grads[k], fd[k]) < 1e-4


@given(st.lists(st.floats(-500, 500), min_size=1, max_size=12), st.floats(1e-3, 1e3))
def test_softmax_normalized(logits, scale):
    p = softmax(np.asarray(logits)[None, :] * scale)
    assert abs(p.sum() - 1.0) < 1e-6 and (p >= 0).all()


def test_zero_weights_uniform(switches):
    pol = GoalPolicy(switches, hidden=(8,), seed=0)
    X = pol.inputs_for([switches.reset(0)], [None], [0])
    np.testing.assert_allclose(pol.probs(X), np.full((1, switches.n_actions), 1 / switches.n_actions))


def test_greedy_returns_unique_argmax(switches, rng):
    pol = GoalPolicy(switches, hidden=(), seed=0)
    pol.params["b0"][3] = 5.0
    s = switches.reset(0)
    assert all(act(pol, s, None, rng, greedy=True) == 3 for _ in range(20))


def test_sampling_is_deterministic_under_seed(switches):
    pol = GoalPolicy(switches, hidden=(8,), seed=0)
    pol.params["W1"][:] = np.random.default_rng(0).normal(size=pol.params["W1"].shape)
    s = switches.reset(1)
    a = [act(pol, s, None, np.random.default_rng(7)) for _ in range(5)]
    assert len(set(a)) == 1


def test_goal_schema_checked(switches):
    pol = GoalPolicy(switches, hidden=())
    with pytest.raises(ValueError):
        act(pol, switches.reset(0), GoalSpec(1, 1, 6), np.random.default_rng(0))


def test_reward_config():
    r = RewardConfig()
    assert (r.success, r.step, r.t_max) == (1.0, -0.1, 80)
    with pytest.raises(ValueError):
        RewardConfig(t_max=0)


def test_returns_to_go():
    np.testing.assert_allclose(returns_to_go([-0.1, -0.1, 0.9]), [0.7, 0.8, 0.9])


def make_episode(env, rewards, seed=0):
    rng = np.random.default_rng(seed)
    s = env.reset(seed)
    goal = GoalSpec.full(env.true_attributes(env.reset(seed + 1)))
    recs = []
    for r in rewards:
        a = int(rng.integers(env.n_actions))
        recs.append(TraceRecord(s, env.true_attributes(s), a, r, goal))
        s = env.step(s, a)
    recs.append(TraceRecord(s, env.true_attributes(s), None, 0.0, goal))
    return EpisodeTrace(tuple(recs), seed)


def _random_policy(env):
    pol = GoalPolicy(env, hidden=(8,), seed=0)
    rng = np.random.default_rng(1)
    for k in pol.params:
        pol.params[k] = rng.normal(size=pol.params[k].shape)
    return pol


def test_zero_learning_rate_leaves_params(switches):
    pol = _random_policy(switches)
    new = reinforce_update(pol, make_episode(switches, [-0.1, -0.1, 1.0]), 0.0, lr=0.0)
    for k in pol.params:
        np.testing.assert_array_equal(new.params[k], pol.params[k])


def test_zero_advantage_leaves_params(switches):
    pol = _random_policy(switches)
    # returns-to-go are all 0.5, equal to the baseline
    new = reinforce_update(pol, make_episode(switches, [0.0, 0.0, 0.5]), 0.5, lr=0.1)
    for k in pol.params:
        np.testing.assert_array_equal(new.params[k], pol.params[k])


def test_update_does_not_mutate_input(switches):
    pol = _random_policy(switches)
    before = {k: v.copy() for k, v in pol.params.items()}
    new = reinforce_update(pol, make_episode(switches, [1.0]), 0.0, lr=0.5)
    assert any(not np.array_equal(new.params[k], before[k]) for k in before)
    for k in before:
        np.testing.assert_array_equal(pol.params[k], before[k])


def test_empty_episode_rejected(switches):
    with pytest.raises(ValueError):
        reinforce_update(GoalPolicy(switches, hidden=()), EpisodeTrace(()), 0.0, 0.1)


class BanditEnv:
    """One state, two actions; used to check the learner in closed form."""
    name = "bandit"
    feature_dim = 1
    n_actions = 2
    n_attributes = 1
    target_dim = 0

    def feature_indices(self, state):
        return np.array([0])


def expected_bandit_logit_gap(lr, steps):
    """Deterministic recursion of the expected update for reward 1 on action 0, baseline 0.

    d/dz_0 E[r log pi] = p0 (1 - p0) and d/dz_1 = -p0 p1, so the logit gap
    grows by 2 lr p0 (1 - p0) per step.
    """
    gap = 0.0
    for _ in range(steps):
        p0 = 1 / (1 + np.exp(-gap))
        gap += 2 * lr * p0 * (1 - p0)
    return gap


def test_bandit_converges_to_rewarded_action():
    env = BanditEnv()
    pol = GoalPolicy(env, hidden=())
    rng = np.random.default_rng(0)
    lr, batch, steps = 0.5, 64, 150
    for _ in range(steps):
        X = np.zeros((batch, pol.input_dim))
        X[:, 0] = 1.0
        a = pol.sample(X, rng)
        grads, _ = pol.net.grad_logp(X, a, (a == 0).astype(float))
        pol.net.apply(grads, lr / batch)
    X = np.zeros((1, pol.input_dim))
    X[0, 0] = 1.0
    p0 = pol.probs(X)[0, 0]
    gap = pol.net.logits(X)[0, 0] - pol.net.logits(X)[0, 1]
    assert p0 > 0.95
    # the stochastic run tracks the expected-update recursion
    assert gap == pytest.approx(expected_bandit_logit_gap(lr, steps), rel=0.15)


@pytest.mark.parametrize("baseline", ["episode", "step", "value"])
@pytest.mark.parametrize("optimizer", ["sgd", "adam"])
def test_learner_variants_learn_bandit(baseline, optimizer):
    env = BanditEnv()
    pol = GoalPolicy(env, hidden=())
    learner = ReinforceLearner(pol, lr=0.5 if optimizer == "sgd" else 0.05, batch_segments=8, baseline=baseline,
                               optimizer=optimizer, average="steps", value_lr=0.05)
    rng = np.random.default_rng(0)
    X = np.zeros((1, pol.input_dim))
    X[0, 0] = 1.0
    for _ in range(3000):
        a = pol.sample(X, rng)
        learner.add(X, a, [1.0 if a[0] == 0 else 0.0])
    learner.flush()
    assert pol.probs(X)[0, 0] > 0.9


def test_learner_warmup_freezes_policy():
    env = BanditEnv()
    pol = GoalPolicy(env, hidden=())
    learner = ReinforceLearner(pol, lr=0.5, batch_segments=2, baseline="value", warmup=10)
    X = np.zeros((1, pol.input_dim))
    X[0, 0] = 1.0
    for i in range(20):
        learner.add(X, [i % 2], [1.0 if i % 2 == 0 else 0.0])
    assert learner.updates == 10
    assert not pol.params["W0"].any()
    learner.add(X, [0], [1.0])
    learner.add(X, [0], [1.0])
    assert pol.params["W0"].any()


def test_learner_rejects_unknown_options():
    pol = GoalPolicy(BanditEnv(), hidden=())
    for kw in ({"optimizer": "rmsprop"}, {"baseline": "median"}, {"average": "episodes"}):
        with pytest.raises(ValueError):
            ReinforceLearner(pol, **kw)


def test_policy_serialization_round_trip(crafting):
    pol = _random_policy(crafting)
    back = GoalPolicy(crafting, net=MLP.from_bytes(pol.net.to_bytes()))
    X = pol.inputs_for([crafting.reset(3)], [GoalSpec(8, 8, 6)], [0])
    np.testing.assert_array_equal(back.probs(X), pol.probs(X))


def test_inputs_layout(switches):
    pol = GoalPolicy(switches, hidden=())
    s = switches.reset(0)
    cur = switches.attribute_bits(s)
    goal = GoalSpec(0xF, 0b0010, 16)
    X = pol.inputs_for([s], [goal], [cur])[0]
    F, n = pol.F, pol.n
    assert np.array_equal(X[:F], switches.features(s))
    assert str(AttributeVector.from_sequence(X[F:F + n].astype(int).tolist())) == "1111" + "0" * 12
    diff = goal.mask & (goal.values ^ cur)
    assert AttributeVector.from_sequence(X[F + 3 * n:F + 4 * n].astype(int).tolist()).bits == diff
    # target words point at switch 0 only when its group differs
    assert X[F + 4 * n:].sum() == (3 if diff else 0)


# --- inverse model ---------------------------------------------------------------------


def test_inverse_dataset_excludes_noops(blocks):
    det = ExactDetector(blocks)
    data = inverse_dataset(blocks, det, 500, np.random.default_rng(0))
    for s, before, after, a in data:
        assert before != after
        assert blocks.attribute_bits(blocks.step(s, a)) == after


def test_inverse_memorizes_tiny_set(blocks):
    data = inverse_dataset(blocks, ExactDetector(blocks), 24, np.random.default_rng(1))
    pol = train_inverse_model(blocks, data, hidden=(64,), epochs=300, lr=1e-2, batch=24, seed=0)
    full = (1 << 36) - 1
    for s, before, after, a in data:
        X = pol.build_inputs([s], [full], [after], [before])
        chosen = int(pol.sample(X, None, greedy=True)[0])
        # several actions can produce the same attributes; the chosen one must
        assert blocks.attribute_bits(blocks.step(s, chosen)) == after


def test_inverse_loss_non_increasing_full_batch(blocks):
    data = inverse_dataset(blocks, ExactDetector(blocks), 64, np.random.default_rng(2))
    losses = []
    train_inverse_model(blocks, data, hidden=(32,), epochs=40, lr=1e-3, batch=64, seed=0, losses=losses)
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_inverse_one_step_success_on_heldout(blocks):
    det = ExactDetector(blocks)
    data = inverse_dataset(blocks, det, 20_000, np.random.default_rng(0))
    pol = train_inverse_model(blocks, data, epochs=10, seed=1)
    held = inverse_dataset(blocks, det, 1000, np.random.default_rng(99))
    full = (1 << 36) - 1
    X = pol.build_inputs([h[0] for h in held], [full] * len(held), [h[2] for h in held], [h[1] for h in held])
    acts = pol.sample(X, None, greedy=True)
    ok = np.mean([blocks.attribute_bits(blocks.step(h[0], int(a))) == h[2] for h, a in zip(held, acts)])
    assert ok >= 0.95
    assert inverse_loss(pol, held) < 0.5
