import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from attrplan.core import ContractError
from attrplan.envs.crafting import ITEMS, PRODUCTS, RECIPES
from attrplan.envs.switches import toggles_needed
from attrplan.tasks import crafting_task, curriculum_task, generate_tasks, switches_task


def popcount(x):
    return bin(x).count("1")


def test_tasks_deterministic_in_seed(any_env):
    a = generate_tasks(any_env, "multi-step", 20, 7)
    assert a == generate_tasks(any_env, "multi-step", 20, 7)
    assert a != generate_tasks(any_env, "multi-step", 20, 8)


def test_multi_step_goals_are_full_and_reachable_layouts(any_env):
    n = any_env.n_attributes
    for t in generate_tasks(any_env, "multi-step", 30, 0):
        assert t.goal.mask == (1 << n) - 1
        assert t.kind == "multi-step"


def test_underspecified_keeps_seventy_percent(blocks, switches):
    for env, kept in ((blocks, 25), (switches, 11)):
        for t in generate_tasks(env, "underspecified", 50, 1):
            assert popcount(t.goal.mask) == kept
            assert t.goal.values & ~t.goal.mask == 0


def test_four_stack_goal(blocks):
    tasks = generate_tasks(blocks, "4-stack", 5, 0)
    goal = blocks.attribute_bits(blocks.stack_goal_state())
    assert {t.goal.values for t in tasks} == {goal}
    assert len({t.start_seed for t in tasks}) == 5


def test_unit_goal_covers_each_product(crafting):
    tasks = generate_tasks(crafting, "unit-goal", 300, 0)
    seen = set()
    for t in tasks:
        assert popcount(t.goal.mask) == 1 and t.goal.values == t.goal.mask
        seen.add(ITEMS[t.goal.mask.bit_length() - 1])
    assert seen == set(PRODUCTS)


def test_kind_mismatch_rejected(switches, blocks):
    with pytest.raises(ContractError):
        generate_tasks(switches, "4-stack", 1, 0)
    with pytest.raises(ContractError):
        generate_tasks(blocks, "unit-goal", 1, 0)
    with pytest.raises(ContractError):
        generate_tasks(blocks, "nonsense", 1, 0)
    with pytest.raises(ContractError):
        generate_tasks(blocks, "multi-step", -1, 0)


@given(st.integers(1, 12), st.integers(0, 2**32))
def test_switches_curriculum_distance_exact(difficulty, seed):
    from attrplan.envs import make_env
    env = make_env("switches")
    state, goal = switches_task(env, np.random.default_rng(seed), difficulty)
    target = env.colors_from_bits(goal.values)
    assert toggles_needed(state[2], target) == difficulty


def test_switches_multi_step_toggle_range(switches):
    dist = [toggles_needed(t.start(switches)[2], switches.colors_from_bits(t.goal.values))
            for t in generate_tasks(switches, "multi-step", 2000, 0)]
    assert min(dist) == 0 and max(dist) <= 12
    # each switch needs a uniform 0..3 toggles, so the mean is 4 * 1.5
    assert np.mean(dist) == pytest.approx(6.0, abs=0.15)


@pytest.mark.parametrize("difficulty", [1, 2])
def test_crafting_curriculum_difficulty(crafting, difficulty):
    rng = np.random.default_rng(difficulty)
    bit = {name: 1 << i for i, name in enumerate(ITEMS)}
    for _ in range(200):
        state, goal = crafting_task(crafting, rng, difficulty)
        inv = state[3]
        product = ITEMS[goal.mask.bit_length() - 1]
        assert not inv & goal.mask
        need = sum(bit[i] for i in RECIPES[product])
        # one remaining action means exactly that the recipe can be crafted now
        assert (inv & need == need) == (difficulty == 1)
        for k, pos in enumerate(state[1]):
            held = inv & bit[ITEMS[k]]
            assert pos is not None or held or any(inv & bit[p] for p in PRODUCTS)


def test_curriculum_cap_grows(switches):
    rng = np.random.default_rng(0)

    def distance(progress):
        state, goal = curriculum_task(switches, rng, progress)
        return toggles_needed(state[2], switches.colors_from_bits(goal.values))

    assert {distance(0.0) for _ in range(50)} == {1}
    assert max(distance(1.0) for _ in range(300)) > 8
    # the top level is trained over the last twelfth, not only at the final step
    assert max(distance(11.5 / 12) for _ in range(2000)) == 12


def test_crafting_curriculum_reaches_hard_tasks(crafting):
    rng = np.random.default_rng(0)
    first = {crafting_task_difficulty(crafting, *curriculum_task(crafting, rng, 0.4)) for _ in range(100)}
    second = {crafting_task_difficulty(crafting, *curriculum_task(crafting, rng, 0.6)) for _ in range(100)}
    assert first == {1} and second == {1, 2}


def crafting_task_difficulty(env, state, goal):
    bit = {name: 1 << i for i, name in enumerate(ITEMS)}
    product = ITEMS[goal.mask.bit_length() - 1]
    need = sum(bit[i] for i in RECIPES[product])
    return 1 if state[3] & need == need else 2


def test_curriculum_test_tasks_mode(crafting):
    state, goal = curriculum_task(crafting, np.random.default_rng(0), 0.3, mode="test-tasks")
    assert popcount(goal.mask) == 1 and state[3] == 0


def test_curriculum_errors(blocks, switches):
    with pytest.raises(ContractError):
        curriculum_task(blocks, np.random.default_rng(0), 0.5)
    with pytest.raises(ContractError):
        curriculum_task(switches, np.random.default_rng(0), 0.5, mode="shuffled")
