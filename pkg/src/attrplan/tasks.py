"""Evaluation task generators and the curriculum sampler for the reactive baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ContractError, GoalSpec
from .envs.crafting import ITEMS, PRODUCTS, RECIPES, RESOURCES
from .envs.switches import toggles_needed

UNDERSPECIFIED_FRACTION = 0.7
TASK_KINDS = ("multi-step", "4-stack", "underspecified", "unit-goal")
_VALID = {
    "switches": ("multi-step", "underspecified"),
    "crafting": ("multi-step", "underspecified", "unit-goal"),
    "blocks": ("multi-step", "4-stack", "underspecified"),
}


@dataclass(frozen=True)
class Task:
    start_seed: int
    goal: GoalSpec
    kind: str

    def start(self, env):
        return env.reset(self.start_seed)


def _mask_random(n: int, k: int, rng: np.random.Generator) -> int:
    mask = 0
    for i in rng.choice(n, size=k, replace=False):
        mask |= 1 << int(i)
    return mask


def generate_tasks(env, kind: str, count: int, seed: int) -> list[Task]:
    """``count`` tasks of the given kind, deterministic in ``seed``.

    * ``multi-step``: the full attributes of a fresh random initialization;
    * ``4-stack``: blocks 0..3 stacked bottom-to-top in the centre cell;
    * ``underspecified``: a multi-step goal with ``round(0.7 n)`` random bits kept;
    * ``unit-goal``: one product bit of the crafting world, all else unspecified.
    """
    if kind not in TASK_KINDS:
        raise ContractError(f"unknown task kind {kind!r}")
    if kind not in _VALID.get(env.name, ()):
        raise ContractError(f"task kind {kind!r} is not defined for {env.name}")
    if count < 0:
        raise ContractError("task count must be nonnegative")
    rng = np.random.default_rng(seed)
    n = env.n_attributes
    full = (1 << n) - 1
    tasks = []
    for _ in range(count):
        start_seed = int(rng.integers(2**62))
        if kind == "4-stack":
            goal = GoalSpec(full, env.attribute_bits(env.stack_goal_state()), n)
        elif kind == "unit-goal":
            bit = ITEMS.index(PRODUCTS[int(rng.integers(len(PRODUCTS)))])
            goal = GoalSpec(1 << bit, 1 << bit, n)
        else:
            target = env.attribute_bits(env.reset(int(rng.integers(2**62))))
            mask = full
            if kind == "underspecified":
                mask = _mask_random(n, round(UNDERSPECIFIED_FRACTION * n), rng)
            goal = GoalSpec(mask, target & mask, n)
        tasks.append(Task(start_seed, goal, kind))
    return tasks


# --- curriculum (reactive baseline) -------------------------------------------


def switches_task(env, rng: np.random.Generator, difficulty: int):
    """Start state plus a full goal exactly ``difficulty`` toggles away (1..12)."""
    state = env.reset(int(rng.integers(2**62)))
    colors = list(state[2])
    # distribute ``difficulty`` toggles over four switches, at most 3 each
    per = [0, 0, 0, 0]
    for _ in range(difficulty):
        free = [k for k in range(4) if per[k] < 3]
        per[int(rng.choice(free))] += 1
    target = tuple((c + p) % 4 for c, p in zip(colors, per))
    goal_bits = env.attribute_bits((state[0], state[1], target))
    assert toggles_needed(tuple(colors), target) == difficulty
    return state, GoalSpec((1 << env.n_attributes) - 1, goal_bits, env.n_attributes)


def _inventory_graph():
    """Abstract crafting dynamics over ``(inventory, grabbed resources)``."""
    bit = {name: 1 << i for i, name in enumerate(ITEMS)}
    start = (0, 0)
    seen = {start: []}
    frontier = [start]
    while frontier:
        nxt = []
        for inv, grabbed in frontier:
            succ = []
            for k, r in enumerate(RESOURCES):
                if not grabbed >> k & 1:
                    succ.append((inv | bit[r], grabbed | 1 << k))
            for p in PRODUCTS:
                need = sum(bit[i] for i in RECIPES[p])
                if inv & need == need:
                    succ.append(((inv & ~need) | bit[p], grabbed))
            seen[(inv, grabbed)] = succ
            for t in succ:
                if t not in seen:
                    seen[t] = []
                    nxt.append(t)
        frontier = nxt
    return seen


def _actions_to_own(graph, node, item_bit: int) -> int | None:
    """Fewest grab/craft actions from ``node`` until ``item_bit`` is held."""
    dist = {node: 0}
    frontier = [node]
    while frontier:
        nxt = []
        for u in frontier:
            if u[0] & item_bit:
                return dist[u]
            for v in graph[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    return None


_CRAFT_GRAPH = _inventory_graph()


def crafting_with_inventory(state, inventory: int, grabbed: int):
    """Same layout as ``state`` with the given inventory; grabbed resources leave the grid."""
    agent, resources, tables, _ = state
    res = tuple(None if grabbed >> k & 1 else pos for k, pos in enumerate(resources))
    return (agent, res, tables, inventory)


def crafting_task(env, rng: np.random.Generator, difficulty: int):
    """Unit goal on a product needing 1 (easy) or more (hard) remaining grab/craft actions."""
    state = env.reset(int(rng.integers(2**62)))
    options = []
    for node in sorted(_CRAFT_GRAPH):
        for p in PRODUCTS:
            b = 1 << ITEMS.index(p)
            c = _actions_to_own(_CRAFT_GRAPH, node, b)
            if c is None or c == 0:
                continue
            if (difficulty <= 1) == (c == 1):
                options.append((node, b))
    (inv, grabbed), b = options[int(rng.integers(len(options)))]
    return crafting_with_inventory(state, inv, grabbed), GoalSpec(b, b, env.n_attributes)


MAX_DIFFICULTY = {"switches": 12, "crafting": 2}


def curriculum_task(env, rng: np.random.Generator, progress: float, mode: str = "curriculum"):
    """Training task for the reactive baseline.

    ``progress`` in [0, 1] is the fraction of training done. In curriculum mode
    the difficulty cap steps from 1 to the maximum, spending an equal share of
    training at each level (so the top level is reached); in test-tasks mode
    tasks are drawn from the evaluation distribution throughout.
    """
    if mode not in ("curriculum", "test-tasks"):
        raise ContractError(f"unknown baseline mode {mode!r}")
    if env.name not in MAX_DIFFICULTY:
        raise ContractError(f"no curriculum for {env.name}")
    if mode == "test-tasks":
        kind = "unit-goal" if env.name == "crafting" else "multi-step"
        task = generate_tasks(env, kind, 1, int(rng.integers(2**62)))[0]
        return task.start(env), task.goal
    top = MAX_DIFFICULTY[env.name]
    cap = min(top, 1 + int(np.floor(min(max(progress, 0.0), 1.0) * top)))
    d = int(rng.integers(1, cap + 1))
    if env.name == "switches":
        return switches_task(env, rng, d)
    return crafting_task(env, rng, d)
