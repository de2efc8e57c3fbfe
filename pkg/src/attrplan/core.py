"""Shared domain types: attribute schemas, attribute vectors, goals, traces.

Attribute vectors are stored as Python integers (bit ``i`` of the integer is
attribute ``i``) so hashing and comparison stay cheap inside rollout loops.
The string form lists attribute 0 first, e.g. ``"1010"`` sets attributes 0
and 2.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

SCHEMA_FORMAT_VERSION = 1


class ContractError(ValueError):
    """Raised when inputs violate an operation's preconditions."""


class SchemaMismatch(ContractError):
    pass


@dataclass(frozen=True)
class AttributeSchema:
    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if any((not isinstance(n, str)) or n == "" for n in names):
            raise ContractError("attribute names must be non-empty strings")
        if len(set(names)) != len(names):
            raise ContractError("attribute names must be unique")

    @property
    def length(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def to_json(self) -> str:
        doc = {"format": "attrplan.schema", "version": SCHEMA_FORMAT_VERSION, "names": list(self.names)}
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AttributeSchema":
        doc = json.loads(text)
        if doc.get("format") != "attrplan.schema":
            raise ContractError("not a schema document")
        if doc.get("version") != SCHEMA_FORMAT_VERSION:
            raise ContractError(f"unsupported schema version {doc.get('version')}")
        return cls(tuple(doc["names"]))


def _bits_from_sequence(seq: Iterable[int]) -> tuple[int, int]:
    value = 0
    n = 0
    for i, b in enumerate(seq):
        if b not in (0, 1, True, False):
            raise ContractError(f"attribute bits must be 0/1, got {b!r}")
        if b:
            value |= 1 << i
        n = i + 1
    return value, n


@dataclass(frozen=True, slots=True)
class AttributeVector:
    """Binary attribute assignment; value-based equality and hashing."""

    bits: int
    n: int

    def __post_init__(self):
        if self.n < 0 or self.bits < 0 or self.bits >> self.n:
            raise ContractError(f"bits {self.bits} do not fit in {self.n} attributes")

    @classmethod
    def from_sequence(cls, seq: Sequence[int]) -> "AttributeVector":
        value, n = _bits_from_sequence(seq)
        return cls(value, len(seq) if hasattr(seq, "__len__") else n)

    @classmethod
    def from_string(cls, s: str) -> "AttributeVector":
        if set(s) - {"0", "1"}:
            raise ContractError(f"attribute strings use only 0 and 1, got {s!r}")
        return cls.from_sequence([int(c) for c in s])

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(i)
        return (self.bits >> i) & 1

    def __len__(self) -> int:
        return self.n

    def to_array(self, dtype=np.float64) -> np.ndarray:
        return bits_to_array(self.bits, self.n, dtype)

    def __str__(self) -> str:
        return "".join(str((self.bits >> i) & 1) for i in range(self.n))


def bits_to_array(bits: int, n: int, dtype=np.float64) -> np.ndarray:
    out = np.zeros(n, dtype=dtype)
    i = 0
    while bits:
        if bits & 1:
            out[i] = 1
        bits >>= 1
        i += 1
    return out


@dataclass(frozen=True, slots=True)
class GoalSpec:
    """Partial target assignment: ``values`` must hold wherever ``mask`` is set."""

    mask: int
    values: int
    n: int

    def __post_init__(self):
        full = (1 << self.n) - 1
        if self.mask & ~full or self.values & ~full or self.mask < 0 or self.values < 0:
            raise ContractError("goal mask/values exceed schema length")
        if self.values & ~self.mask:
            raise ContractError("goal values must be zero wherever mask is zero")

    @classmethod
    def full(cls, rho: AttributeVector) -> "GoalSpec":
        return cls((1 << rho.n) - 1, rho.bits, rho.n)

    @classmethod
    def from_strings(cls, mask: str, values: str) -> "GoalSpec":
        m = AttributeVector.from_string(mask)
        v = AttributeVector.from_string(values)
        if m.n != v.n:
            raise SchemaMismatch("mask and values lengths differ")
        return cls(m.bits, v.bits, m.n)

    @property
    def is_full(self) -> bool:
        return self.mask == (1 << self.n) - 1

    def as_vector(self) -> AttributeVector:
        """Fully specified goals are interchangeable with attribute vectors."""
        if not self.is_full:
            raise ContractError("only fully specified goals convert to attribute vectors")
        return AttributeVector(self.values, self.n)

    @property
    def num_specified(self) -> int:
        return self.mask.bit_count()

    def to_array(self, dtype=np.float64) -> np.ndarray:
        """Mask bits followed by value bits, the goal input layout used by policies."""
        return np.concatenate([bits_to_array(self.mask, self.n, dtype), bits_to_array(self.values, self.n, dtype)])


def _check_schema(rho: AttributeVector, goal: GoalSpec) -> None:
    if rho.n != goal.n:
        raise SchemaMismatch(f"attribute vector has {rho.n} bits but goal has {goal.n}")


def satisfies(rho: AttributeVector, goal: GoalSpec) -> bool:
    _check_schema(rho, goal)
    return ((rho.bits ^ goal.values) & goal.mask) == 0


def hamming_specified(rho: AttributeVector, goal: GoalSpec) -> int:
    _check_schema(rho, goal)
    return ((rho.bits ^ goal.values) & goal.mask).bit_count()


@dataclass(frozen=True)
class Transition:
    src: AttributeVector
    dst: AttributeVector
    steps: int
    success: bool

    def __post_init__(self):
        if self.src == self.dst:
            raise ContractError("self-loop transitions are never recorded")
        if self.steps < 0:
            raise ContractError("steps must be nonnegative")


@dataclass(frozen=True)
class TraceRecord:
    state: Any  # environment-defined canonical snapshot
    attributes: AttributeVector
    action: int | None
    reward: float
    goal: GoalSpec | None


@dataclass(frozen=True)
class EpisodeTrace:
    records: tuple[TraceRecord, ...] = field(default_factory=tuple)
    seed: int = 0

    def __len__(self) -> int:
        return len(self.records)


def derive_seed(master: int, label: str) -> int:
    """Stage seed from a master seed via a labelled hash (stable across runs)."""
    digest = hashlib.sha256(f"{int(master)}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def make_rng(master: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, label))
