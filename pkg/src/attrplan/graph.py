"""Attribute transition graph: exploration counts and per-epoch success statistics.

Nodes are attribute vectors interned to dense integer ids in order of first
sight. Two edge statistics are kept:

* exploration counts ``c_e(i, j)`` from the explore phase, which define the
  candidate edge set and the goal-sampling weights;
* per-epoch attempt / success counts ``A_t(i, j)``, ``S_t(i, j)`` gathered
  while training the low-level policy, combined into an exponentially
  decayed success rate ``sum_t g^(T-t) S_t / sum_t g^(T-t) A_t``.
"""

from __future__ import annotations

import json
from collections import defaultdict

import numpy as np

from .core import AttributeSchema, AttributeVector, ContractError

GRAPH_FORMAT_VERSION = 1


def _bits(x) -> int:
    return x.bits if isinstance(x, AttributeVector) else int(x)


class TransitionGraph:
    def __init__(self, n_attributes: int, gamma: float = 0.9, epoch_size: int = 2000,
                 min_attempts: float = 3.0, prob_floor: float = 1e-6, schema: AttributeSchema | None = None,
                 prob_ceiling: float = 0.99):
        if not 0.0 < gamma <= 1.0:
            raise ContractError("decay rate must lie in (0, 1]")
        if epoch_size <= 0:
            raise ContractError("epoch size must be positive")
        self.n = int(n_attributes)
        self.schema = schema
        self.gamma = float(gamma)
        self.epoch_size = int(epoch_size)
        self.min_attempts = float(min_attempts)
        self.prob_floor = float(prob_floor)
        # planning clamps probabilities to [floor, ceiling]; a ceiling below 1
        # keeps every hop at positive cost so plans cannot wander for free
        self.prob_ceiling = float(prob_ceiling)
        if not 0.0 < self.prob_floor <= self.prob_ceiling <= 1.0:
            raise ContractError("need 0 < prob_floor <= prob_ceiling <= 1")
        self.nodes: list[int] = []
        self.node_id: dict[int, int] = {}
        self.explore: dict[tuple[int, int], int] = {}
        self._out: dict[int, dict[int, int]] = defaultdict(dict)
        self.epochs: list[dict[tuple[int, int], list[int]]] = [{}]
        self.attempts_in_epoch = 0
        self.frozen = False
        self.version = 0  # bumped on every mutation; planners cache on it

    # -- nodes -----------------------------------------------------------------
    def intern(self, rho) -> int:
        b = _bits(rho)
        i = self.node_id.get(b)
        if i is None:
            if b >> self.n:
                raise ContractError("attribute vector longer than graph schema")
            self._mutate()
            i = len(self.nodes)
            self.nodes.append(b)
            self.node_id[b] = i
        return i

    def vector(self, node: int) -> AttributeVector:
        return AttributeVector(self.nodes[node], self.n)

    def has_node(self, rho) -> bool:
        return _bits(rho) in self.node_id

    @property
    def epoch(self) -> int:
        """Current epoch index T (1-based)."""
        return len(self.epochs)

    def _mutate(self):
        if self.frozen:
            raise ContractError("graph is frozen")
        self.version += 1

    def freeze(self) -> "TransitionGraph":
        self.frozen = True
        return self

    # -- exploration counts --------------------------------------------------------
    def add_explore(self, src, dst, count: int = 1) -> None:
        i, j = self.intern(src), self.intern(dst)
        if i == j:
            raise ContractError("self-loops are never recorded")
        self._mutate()
        self.explore[(i, j)] = self.explore.get((i, j), 0) + count
        self._out[i][j] = self._out[i].get(j, 0) + count

    @property
    def explore_total(self) -> int:
        return sum(self.explore.values())

    def explore_neighbors(self, rho) -> dict[int, int]:
        i = self.node_id.get(_bits(rho))
        if i is None:
            return {}
        return self._out.get(i, {})

    def sample_goal(self, current, rng: np.random.Generator) -> AttributeVector | None:
        """Neighbor of ``current`` drawn proportionally to exploration counts.

        Returns ``None`` when ``current`` is unknown or has no outgoing edge.
        """
        j = self.sample_goal_id(_bits(current), rng)
        return None if j is None else self.vector(j)

    def sample_goal_id(self, current_bits: int, rng: np.random.Generator) -> int | None:
        i = self.node_id.get(current_bits)
        if i is None:
            return None
        out = self._out.get(i)
        if not out:
            return None
        targets = sorted(out)
        w = np.array([out[j] for j in targets], dtype=np.float64)
        k = int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right"))
        return targets[min(k, len(targets) - 1)]

    # -- policy-phase statistics ---------------------------------------------------
    def record_attempt(self, src, reached, goal) -> None:
        """Count an attempt on edge (src, goal); a success iff ``reached == goal``."""
        s, r, g = _bits(src), _bits(reached), _bits(goal)
        if s == g:
            raise ContractError("attempt source equals its goal")
        i, j = self.intern(s), self.intern(g)
        self._mutate()
        cell = self.epochs[-1].get((i, j))
        if cell is None:
            cell = self.epochs[-1][(i, j)] = [0, 0]
        cell[0] += 1
        if r == g:
            cell[1] += 1
        self.attempts_in_epoch += 1
        if self.attempts_in_epoch >= self.epoch_size:
            self.new_epoch()

    def new_epoch(self) -> None:
        self._mutate()
        self.epochs.append({})
        self.attempts_in_epoch = 0

    def decayed_counts(self, src, dst) -> tuple[float, float]:
        """``(sum_t g^(T-t) S_t, sum_t g^(T-t) A_t)`` for one edge."""
        i = self.node_id.get(_bits(src))
        j = self.node_id.get(_bits(dst))
        if i is None or j is None:
            return 0.0, 0.0
        T = len(self.epochs)
        s = a = 0.0
        for t, table in enumerate(self.epochs, start=1):
            cell = table.get((i, j))
            if cell is not None:
                w = self.gamma ** (T - t)
                a += w * cell[0]
                s += w * cell[1]
        return s, a

    def edge_probability(self, src, dst) -> float | None:
        """Decayed success ratio, or ``None`` if the edge has no decayed attempts."""
        s, a = self.decayed_counts(src, dst)
        if a <= 0.0:
            return None
        return s / a

    def edge_probability_ablated(self, src, dst) -> float | None:
        """Fraction of explore-phase transitions out of ``src`` that ended in ``dst``."""
        i = self.node_id.get(_bits(src))
        if i is None:
            return None
        out = self._out.get(i)
        if not out:
            return None
        j = self.node_id.get(_bits(dst))
        return out.get(j, 0) / sum(out.values())

    def decayed_table(self) -> dict[tuple[int, int], tuple[float, float]]:
        T = len(self.epochs)
        acc: dict[tuple[int, int], list[float]] = {}
        for t, table in enumerate(self.epochs, start=1):
            w = self.gamma ** (T - t)
            for e, (A, S) in table.items():
                cell = acc.get(e)
                if cell is None:
                    cell = acc[e] = [0.0, 0.0]
                cell[0] += w * S
                cell[1] += w * A
        return {e: (v[0], v[1]) for e, v in acc.items()}

    def probability_table(self, kind: str = "decayed") -> dict[int, list[tuple[int, float]]]:
        """Outgoing ``(node, probability)`` lists for planning.

        ``decayed`` keeps edges with at least ``min_attempts`` decayed attempts;
        ``ablated`` uses the normalized exploration counts.
        """
        out: dict[int, list[tuple[int, float]]] = defaultdict(list)
        if kind == "decayed":
            for (i, j), (s, a) in sorted(self.decayed_table().items()):
                if a > 0.0 and a >= self.min_attempts:
                    out[i].append((j, s / a))
        elif kind == "ablated":
            for i in sorted(self._out):
                row = self._out[i]
                tot = sum(row.values())
                for j in sorted(row):
                    out[i].append((j, row[j] / tot))
        else:
            raise ContractError(f"unknown edge estimator {kind!r}")
        return dict(out)

    # -- stats & serialization ------------------------------------------------------
    def stats(self, kind: str = "decayed") -> dict:
        table = self.probability_table(kind)
        probs = [p for row in table.values() for _, p in row]
        hist, edges = np.histogram(probs, bins=10, range=(0.0, 1.0))
        return {
            "nodes": len(self.nodes),
            "explore_edges": len(self.explore),
            "explore_total": self.explore_total,
            "planning_edges": len(probs),
            "attempted_edges": len(self.decayed_table()),
            "epochs": self.epoch,
            "prob_hist": hist.tolist(),
            "prob_bins": [round(float(x), 2) for x in edges],
        }

    def to_dict(self, config_hash: str | None = None) -> dict:
        return {
            "format": "attrplan.graph",
            "version": GRAPH_FORMAT_VERSION,
            "config_hash": config_hash,
            "n_attributes": self.n,
            "schema": None if self.schema is None else list(self.schema.names),
            "gamma": self.gamma,
            "epoch_size": self.epoch_size,
            "min_attempts": self.min_attempts,
            "prob_floor": self.prob_floor,
            "prob_ceiling": self.prob_ceiling,
            "epoch": self.epoch,
            "attempts_in_epoch": self.attempts_in_epoch,
            "frozen": self.frozen,
            "nodes": [str(self.vector(i)) for i in range(len(self.nodes))],
            "explore": {"phase": "explore", "edges": [[i, j, c] for (i, j), c in sorted(self.explore.items())]},
            "policy": {
                "phase": "policy",
                "epochs": [[[i, j, A, S] for (i, j), (A, S) in sorted(t.items())] for t in self.epochs],
            },
        }

    def dumps(self, config_hash: str | None = None) -> str:
        return json.dumps(self.to_dict(config_hash), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "TransitionGraph":
        if doc.get("format") != "attrplan.graph" or doc.get("version") != GRAPH_FORMAT_VERSION:
            raise ContractError("unsupported graph document")
        schema = AttributeSchema(tuple(doc["schema"])) if doc.get("schema") else None
        g = cls(doc["n_attributes"], doc["gamma"], doc["epoch_size"], doc["min_attempts"], doc["prob_floor"], schema,
                doc["prob_ceiling"])
        for s in doc["nodes"]:
            g.intern(AttributeVector.from_string(s))
        for i, j, c in doc["explore"]["edges"]:
            g.explore[(i, j)] = c
            g._out[i][j] = c
        g.epochs = [{(i, j): [A, S] for i, j, A, S in t} for t in doc["policy"]["epochs"]]
        if len(g.epochs) != doc["epoch"]:
            raise ContractError("epoch index disagrees with stored epochs")
        g.attempts_in_epoch = doc["attempts_in_epoch"]
        g.frozen = doc.get("frozen", False)
        return g

    @classmethod
    def loads(cls, text: str) -> "TransitionGraph":
        return cls.from_dict(json.loads(text))
