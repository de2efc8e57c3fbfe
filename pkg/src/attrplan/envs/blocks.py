"""Discrete symbolic blocks world: four blocks dropped on a 3x3 grid.

A state is a tuple of nine stacks (bottom to top), indexed ``row * 3 + col``;
row 0 is the back row and column 0 the left column. Action ``block * 9 + cell``
lifts ``block`` and drops it on top of whatever occupies ``cell``. Moving a
block that has another block on top of it, or dropping it back on its own
cell, leaves the state unchanged.
"""

from __future__ import annotations

import numpy as np

from ..core import AttributeSchema
from .base import Env

BLOCKS = ("red", "green", "blue", "yellow")
N_BLOCKS = 4
GRID = 3
N_CELLS = GRID * GRID
RELATIONS = ("left_of", "behind_of", "on_top_of")
PAIRS = tuple((a, b) for a in range(N_BLOCKS) for b in range(N_BLOCKS) if a != b)


def attr_index(relation: str, a: int, b: int) -> int:
    return PAIRS.index((a, b)) * len(RELATIONS) + RELATIONS.index(relation)


class BlocksEnv(Env):
    name = "blocks"

    def __init__(self):
        self.schema = AttributeSchema(
            tuple(f"{rel}({BLOCKS[a]},{BLOCKS[b]})" for a, b in PAIRS for rel in RELATIONS)
        )
        self.action_names = tuple(f"drop_{BLOCKS[b]}@{c}" for b in range(N_BLOCKS) for c in range(N_CELLS))
        # words: (cell, level, block), (cell, block) and (cell, whole stack content)
        self._stacks = _all_stack_contents()
        self._stack_id = {s: i for i, s in enumerate(self._stacks)}
        self._cb_base = N_CELLS * N_BLOCKS * N_BLOCKS
        self._sc_base = self._cb_base + N_CELLS * N_BLOCKS
        self.feature_dim = self._sc_base + N_CELLS * len(self._stacks)
        self._attr_cache: dict = {}

    def reset(self, seed: int):
        rng = np.random.default_rng(seed)
        stacks = [[] for _ in range(N_CELLS)]
        for b in rng.permutation(N_BLOCKS):
            stacks[int(rng.integers(0, N_CELLS))].append(int(b))
        return tuple(tuple(s) for s in stacks)

    @staticmethod
    def locate(state, block: int) -> tuple[int, int]:
        for cell, stack in enumerate(state):
            if block in stack:
                return cell, stack.index(block)
        raise ValueError(f"block {block} missing from state")

    def step(self, state, action: int):
        action = int(action)
        self.check_action(action)
        block, target = divmod(action, N_CELLS)
        cell, level = self.locate(state, block)
        if cell == target or level != len(state[cell]) - 1:
            return state
        stacks = list(state)
        stacks[cell] = state[cell][:-1]
        stacks[target] = state[target] + (block,)
        return tuple(stacks)

    def attribute_bits(self, state) -> int:
        cached = self._attr_cache.get(state)
        if cached is not None:
            return cached
        where = {}
        for cell, stack in enumerate(state):
            for level, b in enumerate(stack):
                where[b] = (cell // GRID, cell % GRID, cell, level)
        bits = 0
        for p, (a, b) in enumerate(PAIRS):
            ra, ca, cella, la = where[a]
            rb, cb, cellb, lb = where[b]
            base = p * 3
            if ca < cb:
                bits |= 1 << base
            if ra < rb:
                bits |= 1 << (base + 1)
            if cella == cellb and la == lb + 1:
                bits |= 1 << (base + 2)
        if len(self._attr_cache) < 100_000:
            self._attr_cache[state] = bits
        return bits

    def feature_indices(self, state) -> np.ndarray:
        idx = []
        for cell, stack in enumerate(state):
            for level, b in enumerate(stack):
                idx.append((cell * N_BLOCKS + level) * N_BLOCKS + b)
                idx.append(self._cb_base + cell * N_BLOCKS + b)
            idx.append(self._sc_base + cell * len(self._stacks) + self._stack_id[stack])
        return np.asarray(idx, dtype=np.int64)

    def snapshot(self, state):
        return [list(s) for s in state]

    def source_key(self, state):
        """Occupied-column and occupied-row patterns."""
        cols = rows = 0
        for cell, stack in enumerate(state):
            if stack:
                rows |= 1 << (cell // GRID)
                cols |= 1 << (cell % GRID)
        return (cols, rows)

    def is_legal(self, state) -> bool:
        if len(state) != N_CELLS:
            return False
        seen = [b for s in state for b in s]
        return sorted(seen) == list(range(N_BLOCKS))

    def stack_goal_state(self, order=(0, 1, 2, 3), cell: int = 4):
        """A single vertical stack, ``order`` listed bottom to top."""
        stacks = [()] * N_CELLS
        stacks[cell] = tuple(order)
        return tuple(stacks)


def _all_stack_contents():
    """Every ordered subset of blocks, i.e. every possible single-cell stack (65)."""
    out = [()]
    frontier = [()]
    for _ in range(N_BLOCKS):
        frontier = [s + (b,) for s in frontier for b in range(N_BLOCKS) if b not in s]
        out.extend(frontier)
    return out


def all_states():
    """Every legal configuration (9*10*11*12 = 11880 of them)."""
    out = []

    def rec(stacks, remaining):
        if not remaining:
            out.append(tuple(tuple(s) for s in stacks))
            return
        b = remaining[0]
        for cell in range(N_CELLS):
            for pos in range(len(stacks[cell]) + 1):
                stacks[cell].insert(pos, b)
                rec(stacks, remaining[1:])
                stacks[cell].pop(pos)

    rec([[] for _ in range(N_CELLS)], list(range(N_BLOCKS)))
    return out
