"""Colored switches grid world: four switches, four colors each."""

from __future__ import annotations

import numpy as np

from ..core import AttributeSchema
from .base import MOVE_NAMES, Env, GridMixin

N_SWITCHES = 4
N_COLORS = 4
TOGGLE = 4


class SwitchesEnv(GridMixin, Env):
    """State is ``(agent, positions, colors)`` with ``agent=(row, col)``.

    The toggle action cycles the color of the switch under the agent
    (``c -> (c + 1) % 4``); it does nothing elsewhere.
    """

    name = "switches"

    def __init__(self, size: int = 6):
        if size * size < N_SWITCHES:
            raise ValueError("grid too small for four switches")
        self.size = size
        self.schema = AttributeSchema(
            tuple(f"switch{k}_color{c}" for k in range(N_SWITCHES) for c in range(N_COLORS))
        )
        self.action_names = MOVE_NAMES + ("toggle",)
        self._color_base = self._init_grid_words(N_SWITCHES)
        self.feature_dim = self._color_base + N_SWITCHES * N_COLORS
        self.target_dim = self._slot_width

    def reset(self, seed: int):
        rng = np.random.default_rng(seed)
        cells = rng.choice(self.size * self.size, size=N_SWITCHES, replace=False)
        positions = tuple((int(i) // self.size, int(i) % self.size) for i in cells)
        colors = tuple(int(c) for c in rng.integers(0, N_COLORS, size=N_SWITCHES))
        a = int(rng.integers(0, self.size * self.size))
        return ((a // self.size, a % self.size), positions, colors)

    def step(self, state, action: int):
        action = int(action)
        self.check_action(action)
        agent, positions, colors = state
        if action == TOGGLE:
            if agent in positions:
                k = positions.index(agent)
                colors = colors[:k] + ((colors[k] + 1) % N_COLORS,) + colors[k + 1:]
                return (agent, positions, colors)
            return state
        new = self._move(agent, action)
        if new == agent:
            return state
        return (new, positions, colors)

    def attribute_bits(self, state) -> int:
        bits = 0
        for k, c in enumerate(state[2]):
            bits |= 1 << (k * N_COLORS + c)
        return bits

    def feature_indices(self, state) -> np.ndarray:
        agent, positions, colors = state
        idx = []
        for k, pos in enumerate(positions):
            idx.extend(self._object_words(k, agent, pos))
            idx.append(self._color_base + k * N_COLORS + colors[k])
        return np.asarray(idx, dtype=np.int64)

    def target_indices(self, state, diff_bits: int) -> np.ndarray:
        agent, positions, _ = state
        idx = set()
        for k, pos in enumerate(positions):
            if (diff_bits >> (k * N_COLORS)) & (2**N_COLORS - 1):
                idx.update(self._target_words(agent, pos))
        return np.asarray(sorted(idx), dtype=np.int64)

    def snapshot(self, state):
        agent, positions, colors = state
        return {"agent": list(agent), "switches": [list(p) for p in positions], "colors": list(colors)}

    def source_key(self, state):
        # which switches the agent already stands on or next to
        agent, positions, _ = state
        return tuple(abs(p[0] - agent[0]) + abs(p[1] - agent[1]) <= 1 for p in positions)

    def colors_from_bits(self, bits: int) -> tuple[int, ...]:
        out = []
        for k in range(N_SWITCHES):
            group = (bits >> (k * N_COLORS)) & (2**N_COLORS - 1)
            out.append(group.bit_length() - 1)
        return tuple(out)


def toggles_needed(current: tuple[int, ...], target: tuple[int, ...]) -> int:
    """Minimum number of toggles between two color assignments."""
    return sum((t - c) % N_COLORS for c, t in zip(current, target))
