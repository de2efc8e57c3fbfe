"""Crafting grid world with three resources and three products.

Recipes (each product has its own crafting table square)::

    plank  <- wood
    rope   <- grass
    bridge <- plank + rope + ore

Crafting consumes the ingredients. Resources are single-count: grabbing one
removes it from the grid and sets its inventory bit.
"""

from __future__ import annotations

import numpy as np

from ..core import AttributeSchema
from .base import MOVE_NAMES, Env, GridMixin

ITEMS = ("wood", "ore", "grass", "plank", "rope", "bridge")
RESOURCES = ("wood", "ore", "grass")
PRODUCTS = ("plank", "rope", "bridge")
RECIPES = {
    "plank": ("wood",),
    "rope": ("grass",),
    "bridge": ("plank", "rope", "ore"),
}
GRAB, CRAFT = 4, 5

_BIT = {name: 1 << i for i, name in enumerate(ITEMS)}
_RECIPE_MASK = {p: sum(_BIT[i] for i in ins) for p, ins in RECIPES.items()}


class CraftingEnv(GridMixin, Env):
    """State is ``(agent, resource_positions, table_positions, inventory)``.

    ``resource_positions[k]`` is ``None`` once resource ``k`` has been grabbed;
    ``inventory`` is an integer bitmask over ``ITEMS``.
    """

    name = "crafting"

    def __init__(self, size: int = 6):
        if size * size < len(RESOURCES) + len(PRODUCTS):
            raise ValueError("grid too small for resources and tables")
        self.size = size
        self.schema = AttributeSchema(tuple(f"has_{i}" for i in ITEMS))
        self.action_names = MOVE_NAMES + ("grab", "craft")
        self._inv_base = self._init_grid_words(len(RESOURCES) + len(PRODUCTS))
        self.feature_dim = self._inv_base + len(ITEMS)
        self.target_dim = self._slot_width

    def reset(self, seed: int):
        rng = np.random.default_rng(seed)
        n_obj = len(RESOURCES) + len(PRODUCTS)
        cells = rng.choice(self.size * self.size, size=n_obj, replace=False)
        pos = [(int(i) // self.size, int(i) % self.size) for i in cells]
        a = int(rng.integers(0, self.size * self.size))
        return ((a // self.size, a % self.size), tuple(pos[:3]), tuple(pos[3:]), 0)

    def step(self, state, action: int):
        action = int(action)
        self.check_action(action)
        agent, resources, tables, inv = state
        if action == GRAB:
            if agent in resources:
                k = resources.index(agent)
                resources = resources[:k] + (None,) + resources[k + 1:]
                return (agent, resources, tables, inv | _BIT[RESOURCES[k]])
            return state
        if action == CRAFT:
            if agent in tables:
                product = PRODUCTS[tables.index(agent)]
                need = _RECIPE_MASK[product]
                if inv & need == need:
                    return (agent, resources, tables, (inv & ~need) | _BIT[product])
            return state
        new = self._move(agent, action)
        if new == agent:
            return state
        return (new, resources, tables, inv)

    def attribute_bits(self, state) -> int:
        return state[3]

    def feature_indices(self, state) -> np.ndarray:
        agent, resources, tables, inv = state
        idx = []
        for k, pos in enumerate(resources + tables):
            if pos is not None:
                idx.extend(self._object_words(k, agent, pos))
        for i in range(len(ITEMS)):
            if inv >> i & 1:
                idx.append(self._inv_base + i)
        return np.asarray(idx, dtype=np.int64)

    def target_indices(self, state, diff_bits: int) -> np.ndarray:
        # resource bits point at the resource, product bits at the product's table
        agent, resources, tables, _ = state
        idx = set()
        for k, pos in enumerate(resources + tables):
            if diff_bits >> k & 1 and pos is not None:
                idx.update(self._target_words(agent, pos))
        return np.asarray(sorted(idx), dtype=np.int64)

    def snapshot(self, state):
        agent, resources, tables, inv = state
        return {
            "agent": list(agent),
            "resources": [None if p is None else list(p) for p in resources],
            "tables": [list(p) for p in tables],
            "inventory": [ITEMS[i] for i in range(len(ITEMS)) if inv >> i & 1],
        }

    def source_key(self, state):
        return tuple(p is None for p in state[1])


def item_bit(name: str) -> int:
    return ITEMS.index(name)


def prerequisites(product: str) -> tuple[str, ...]:
    return RECIPES[product]
