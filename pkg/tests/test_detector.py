import json

import numpy as np
import pytest

from attrplan.core import AttributeVector, ContractError
from attrplan.detector import (ExactDetector, NoisyDetector, detector_from_dict, dumps, fit, labeled_pairs,
                               make_detector)
from attrplan.envs import make_env


def random_states(env, n, seed=0, walk=10):
    rng = np.random.default_rng(seed)
    out = []
    s = env.reset(0)
    for i in range(n):
        s = env.reset(int(rng.integers(2**62))) if i % walk == 0 else env.step(s, int(rng.integers(env.n_actions)))
        out.append(s)
    return out


def test_exact_equals_truth(any_env):
    det = ExactDetector(any_env)
    for s in random_states(any_env, 200):
        assert det.detect(s) == any_env.true_attributes(s)


def test_noisy_zero_eps_is_exact(any_env):
    det = NoisyDetector(any_env, 0.0, seed=3)
    for s in random_states(any_env, 200):
        assert det.detect_bits(s) == any_env.attribute_bits(s)


def test_noisy_is_a_fixed_function_of_state(blocks):
    det = NoisyDetector(blocks, 0.3, seed=1)
    for s in random_states(blocks, 50):
        assert det.detect_bits(s) == det.detect_bits(s)


@pytest.mark.parametrize("eps", [0.014, 0.5])
def test_noisy_flip_rate_within_three_standard_errors(blocks, eps):
    det = NoisyDetector(blocks, eps, seed=2)
    # distinct states so every sample is a fresh draw
    from attrplan.envs.blocks import all_states
    states = all_states()[:10_000]
    n = blocks.n_attributes
    flips = sum((det.detect_bits(s) ^ blocks.attribute_bits(s)).bit_count() for s in states)
    trials = len(states) * n
    se = np.sqrt(eps * (1 - eps) / trials)
    assert abs(flips / trials - eps) < 3 * se


def test_noisy_rejects_bad_eps(blocks):
    with pytest.raises(ContractError):
        NoisyDetector(blocks, 1.5)


def test_fit_pins_constant_attribute():
    env = make_env("crafting")
    pairs = labeled_pairs(env, 500, seed=0, walk=5)  # short walks never craft a bridge
    bridge = 5
    assert all(rho[bridge] == 0 for _, rho in pairs)
    det = fit(pairs, env, epochs=20)
    assert det.constant[bridge] == 0
    for f, _ in pairs[:50]:
        assert det.predict_bits_matrix(f[None, :])[0, bridge] == 0


def direct_indicator_columns(env):
    """Feature column that equals each attribute (colour words, inventory words)."""
    if env.name == "switches":
        return [env._color_base + i for i in range(env.n_attributes)]
    return [env._inv_base + i for i in range(env.n_attributes)]


@pytest.mark.parametrize("name", ["switches", "crafting"])
def test_fit_separable_grid_worlds_zero_heldout_error(name):
    env = make_env(name)
    pairs = labeled_pairs(env, 1500, seed=1, walk=40)
    # separability oracle: a hand-built linear rule classifies every example
    X = np.array([f for f, _ in pairs])
    Y = np.array([rho.to_array() for _, rho in pairs])
    assert np.array_equal((X[:, direct_indicator_columns(env)] - 0.5 > 0).astype(float), Y)
    det = fit(pairs, env, epochs=600, seed=0)
    assert det.heldout_error == 0.0
    for f, rho in pairs[:200]:
        row = det.predict_bits_matrix(f[None, :])[0]
        assert AttributeVector.from_sequence(row.tolist()) == rho


def test_fit_blocks_error_below_reference():
    env = make_env("blocks")
    pairs = labeled_pairs(env, 10_000, seed=2)
    det = fit(pairs, env, epochs=60, seed=0)
    assert det.heldout_error <= 0.014


def test_fit_rejects_empty_and_mismatched():
    env = make_env("switches")
    with pytest.raises(ContractError):
        fit([], env)
    with pytest.raises(ContractError):
        fit([(np.zeros(3), AttributeVector(0, 16))], env)


def test_serialization_round_trip(switches):
    pairs = labeled_pairs(switches, 500, seed=0)
    det = fit(pairs, switches, epochs=10)
    back = detector_from_dict(json.loads(dumps(det)), switches)
    np.testing.assert_array_equal(back.weights, det.weights)
    for s in random_states(switches, 50):
        assert back.detect_bits(s) == det.detect_bits(s)
    noisy = NoisyDetector(switches, 0.1, seed=4)
    back = detector_from_dict(json.loads(dumps(noisy)), switches)
    for s in random_states(switches, 50):
        assert back.detect_bits(s) == noisy.detect_bits(s)


def test_make_detector_modes(switches):
    assert make_detector("exact", switches).mode == "exact"
    assert make_detector("noisy", switches, eps=0.1).mode == "noisy"
    with pytest.raises(ContractError):
        make_detector("learned", switches)
    with pytest.raises(ContractError):
        make_detector("cnn", switches)
