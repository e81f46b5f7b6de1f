"""Exact superposition engine with integer weights.

Every state the search algorithms build has non-negative real amplitudes of
the form sqrt(w / total) with integer w, so a state is kept as a map from
basis label to integer weight. Probabilities are exact rationals. Identical
labels merge by adding weights; that is only valid because no amplitude is
ever negative or complex, which holds for everything in this package.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Hashable, Iterable, Optional, Tuple, Union

from .core import DUMMY, KeyRecordPair, QBTreeError, QueryRange
from .metrics import IoCounters
from .qram import EmptyState, Qram


class EmptySet(QBTreeError):
    pass


class ZeroWeight(QBTreeError):
    pass


class WeightedState:
    __slots__ = ("entries", "total")

    def __init__(self, entries: Dict[Hashable, int], total: Optional[int] = None):
        self.entries = entries
        self.total = sum(entries.values()) if total is None else total

    def __len__(self) -> int:
        return len(self.entries)

    def __repr__(self) -> str:
        return f"WeightedState({self.entries!r}, total={self.total})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedState):
            return NotImplemented
        return self.total == other.total and self.entries == other.entries

    def probability(self, label: Hashable) -> Fraction:
        return Fraction(self.entries.get(label, 0), self.total)

    def probabilities(self) -> Dict[Hashable, Fraction]:
        return {k: Fraction(w, self.total) for k, w in self.entries.items()}

    def amplitude(self, label: Hashable) -> float:
        return float(self.probability(label)) ** 0.5

    def support(self) -> set:
        return set(self.entries)

    def is_uniform(self) -> bool:
        return len(set(self.entries.values())) <= 1

    def check(self) -> None:
        assert self.total > 0, "state has zero total weight"
        assert all(w > 0 for w in self.entries.values()), "zero-weight entry stored"
        assert sum(self.entries.values()) == self.total, "total out of sync"


@dataclass
class FlaggedState:
    """Result of the range oracle: the in-branch state plus the out-branch weight."""

    in_state: WeightedState
    out_weight: int
    total: int


@dataclass
class Analytic:
    """Evaluate post-selection by its exact expected attempt count."""


@dataclass
class Stochastic:
    """Evaluate post-selection by seeded sampling."""

    rng: random.Random = field(default_factory=random.Random)

    @classmethod
    def seeded(cls, seed: int) -> "Stochastic":
        return cls(random.Random(seed))


Mode = Union[Analytic, Stochastic]


def uniform_init(labels: Iterable[Hashable]) -> WeightedState:
    entries = dict.fromkeys(labels, 1)
    if not entries:
        raise EmptySet("cannot build a superposition over no labels")
    return WeightedState(entries, len(entries))


def weighted_init(
    items: Iterable[Tuple[Hashable, int]], counters: Optional[IoCounters] = None
) -> WeightedState:
    """Amplitude-encode a classical list; charged one access per item."""
    entries: Dict[Hashable, int] = {}
    m = 0
    for label, w in items:
        if w <= 0:
            raise ZeroWeight(f"label {label!r} has weight {w}")
        entries[label] = entries.get(label, 0) + w
        m += 1
    if not entries:
        raise EmptySet("cannot build a superposition over no labels")
    if counters is not None:
        counters.classical_node_accesses += m
    return WeightedState(entries)


def expand(state: WeightedState, B: int) -> WeightedState:
    """Hadamard-expand a slot register of log2(B) qubits next to each label."""
    out = {}
    for label, w in state.entries.items():
        for j in range(B):
            out[(label, j)] = w
    return WeightedState(out, state.total * B)


def descend(state: WeightedState, q0: Qram, B: int) -> WeightedState:
    """One expansion plus one hierarchy-QRAM load: nodes become their children.

    Leaves map to themselves and DUMMY maps to DUMMY, so their weight is
    multiplied by B.
    """
    cells = q0.cells
    out: Dict[Any, int] = {}
    get = out.get
    for node, w in state.entries.items():
        if node == DUMMY:
            out[DUMMY] = get(DUMMY, 0) + w * B
            continue
        base = node * B
        for j in range(B):
            child = cells.get(base + j, DUMMY)
            out[child] = get(child, 0) + w
    q0.counters.qram_loads += 1
    return WeightedState(out, state.total * B)


def load_pairs(state: WeightedState, q1: Qram, B: int) -> WeightedState:
    """One expansion plus one data-QRAM load: leaves become their pairs."""
    cells = q1.cells
    out: Dict[Any, int] = {}
    dummy = 0
    for node, w in state.entries.items():
        if node == DUMMY:
            dummy += w * B
            continue
        base = node * B
        for j in range(B):
            val = cells.get(base + j, DUMMY)
            if val == DUMMY:
                dummy += w
            else:
                out[val] = out.get(val, 0) + w
    if dummy:
        out[DUMMY] = out.get(DUMMY, 0) + dummy
    q1.counters.qram_loads += 1
    return WeightedState(out, state.total * B)


def label_key(label: Hashable):
    """Key carried by a basis label, or None for DUMMY and non-data labels."""
    if isinstance(label, KeyRecordPair):
        return label.key
    if isinstance(label, (int, tuple)) and label != DUMMY:
        return label
    return None


def mark_in_range(state: WeightedState, r: QueryRange) -> FlaggedState:
    inside = {}
    for label, w in state.entries.items():
        key = label_key(label)
        if key is not None and r.contains(key):
            inside[label] = w
    in_total = sum(inside.values())
    return FlaggedState(WeightedState(inside, in_total), state.total - in_total, state.total)


def success_probability(f: FlaggedState) -> Fraction:
    return Fraction(f.in_state.total, f.total)


def expected_attempts(f: FlaggedState) -> Fraction:
    if f.in_state.total == 0:
        raise ZeroWeight("post-selection can never succeed")
    return Fraction(f.total, f.in_state.total)


def post_select(
    f: FlaggedState, rng: random.Random, counters: Optional[IoCounters] = None
) -> Optional[WeightedState]:
    """Measure the flag qubit once. Returns the in-state on success, else None."""
    if counters is not None:
        counters.post_selection_attempts += 1
    if f.in_state.total == 0:
        return None
    if rng.randrange(f.total) < f.in_state.total:
        return f.in_state
    return None


def measure_once(state: WeightedState, rng: random.Random) -> Hashable:
    if not state.entries:
        raise EmptyState("cannot measure an empty state")
    draw = rng.randrange(state.total)
    for label, w in state.entries.items():
        if draw < w:
            return label
        draw -= w
    raise AssertionError("weights do not sum to total")
