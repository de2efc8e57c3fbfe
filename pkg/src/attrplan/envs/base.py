"""Common environment contract.

Environments are value-semantics state machines: states are immutable,
hashable tuples and ``step`` is a pure function of ``(state, action)``.
"""

from __future__ import annotations

from typing import Any, Hashable

import numpy as np

from ..core import AttributeSchema, AttributeVector

MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right
MOVE_NAMES = ("up", "down", "left", "right")


class Env:
    name: str = "env"
    schema: AttributeSchema
    action_names: tuple[str, ...]
    feature_dim: int
    target_dim: int = 0

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    @property
    def n_attributes(self) -> int:
        return self.schema.length

    def reset(self, seed: int):
        raise NotImplementedError

    def step(self, state, action: int):
        raise NotImplementedError

    def attribute_bits(self, state) -> int:
        raise NotImplementedError

    def true_attributes(self, state) -> AttributeVector:
        return AttributeVector(self.attribute_bits(state), self.schema.length)

    def feature_indices(self, state) -> np.ndarray:
        """Indices of the active indicator features (bag-of-words form)."""
        raise NotImplementedError

    def target_indices(self, state, diff_bits: int) -> np.ndarray:
        """Indicator words (in ``[0, target_dim)``) locating the objects that the
        attributes in ``diff_bits`` refer to. Empty for environments without
        object locations."""
        return np.zeros(0, dtype=np.int64)

    def features(self, state) -> np.ndarray:
        x = np.zeros(self.feature_dim)
        x[self.feature_indices(state)] = 1.0
        return x

    def snapshot(self, state) -> Any:
        """Canonical JSON-compatible encoding of a state, used in traces."""
        raise NotImplementedError

    def source_key(self, state) -> Hashable:
        """Coarse grouping key used when diagnosing attribute aliasing."""
        return None

    def check_action(self, action: int) -> None:
        if not 0 <= int(action) < self.n_actions:
            raise ValueError(f"action {action} out of range for {self.name} ({self.n_actions} actions)")


class GridMixin:
    """Relative-location indicator words for 2-D grid worlds.

    For each object slot the encoder emits the joint word (slot, dy, dx) plus
    the row and column marginals (slot, dy) and (slot, dx).
    """

    size: int

    def _init_grid_words(self, n_slots: int) -> int:
        span = 2 * self.size - 1
        self._span = span
        self._slot_width = span * span + 2 * span
        self._n_slots = n_slots
        return n_slots * self._slot_width

    def _object_words(self, slot: int, agent: tuple[int, int], pos: tuple[int, int]) -> tuple[int, int, int]:
        off = self.size - 1
        dy = pos[0] - agent[0] + off
        dx = pos[1] - agent[1] + off
        base = slot * self._slot_width
        span = self._span
        return base + dy * span + dx, base + span * span + dy, base + span * span + span + dx

    def _target_words(self, agent: tuple[int, int], pos: tuple[int, int]) -> tuple[int, int, int]:
        """Slot-free version of :meth:`_object_words`, for goal-relevant objects."""
        return self._object_words(0, agent, pos)

    def _move(self, pos: tuple[int, int], action: int) -> tuple[int, int]:
        dr, dc = MOVES[action]
        r, c = pos[0] + dr, pos[1] + dc
        if 0 <= r < self.size and 0 <= c < self.size:
            return (r, c)
        return pos
