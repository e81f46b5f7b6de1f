"""Static quantum B+ tree and the global-classical local-quantum range search.

The classical tree narrows the query to at most two nodes on one level such
that one of them has a child lying wholly inside the range. The quantum part
then enumerates every pair slot under those nodes with one hierarchy-QRAM
load per level and one data-QRAM load at the bottom, and post-selects the
in-range branch.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

from .btree import NodeStore, WeightBalancedTree
from .core import KeyRecordPair, QBTreeError, QueryRange, TreeParams
from .metrics import IoCounters
from .qstate import (
    Analytic,
    Mode,
    WeightedState,
    descend,
    expected_attempts,
    load_pairs,
    mark_in_range,
    post_select,
    uniform_init,
    weighted_init,
)


class NoResults(QBTreeError):
    pass


class NodeClass(enum.Enum):
    OUTSIDE = "outside"
    PARTIAL = "partial"
    INSIDE = "inside"


def classify_node(lo: int, hi: int, r_lo: int, r_hi: int) -> NodeClass:
    if hi < r_lo or lo > r_hi:
        return NodeClass.OUTSIDE
    if lo >= r_lo and hi <= r_hi:
        return NodeClass.INSIDE
    return NodeClass.PARTIAL


@dataclass
class QuantumCandidates:
    level: int
    height: int
    nodes: List[int]


@dataclass
class LeafFallback:
    pairs: List[KeyRecordPair]
    leaves: List[int] = field(default_factory=list)


GlobalOutcome = Union[QuantumCandidates, LeafFallback]


@dataclass
class QueryResult:
    """Outcome of a quantum range query.

    ``kind`` is ``"superposition"`` when the quantum path ran, ``"classical"``
    when the leaf fallback produced the answer as a list, and ``"empty"`` when
    nothing matched. ``pairs`` carries the classical list, or for the dynamic
    structure the in-range pairs still sitting in the insert buffer. ``io`` is
    the query's IO: exact in stochastic mode, expected in analytic mode.
    """

    kind: str
    state: Optional[WeightedState] = None
    pairs: List[KeyRecordPair] = field(default_factory=list)
    attempts: Fraction = Fraction(0)
    io: Fraction = Fraction(0)
    success_probability: Optional[Fraction] = None
    candidates: List[Tuple[int, int]] = field(default_factory=list)

    def support(self) -> set:
        out = set(self.pairs)
        if self.state is not None:
            out |= set(self.state.entries)
        return out

    @property
    def uniform(self) -> bool:
        return self.state is None or self.state.is_uniform()


class QuantumBPlusTree:
    """A weight-balanced B+ tree mirrored into a hierarchy QRAM and a data QRAM.

    For node i and slot j, q0[i*B+j] holds the j-th child id (i itself for a
    leaf) and q1[i*B+j] holds the j-th pair of a leaf or the j-th child's
    routing range of an internal node. Empty slots read as DUMMY.
    """

    def __init__(self, tree: WeightBalancedTree):
        if not tree.store.quantum:
            raise ValueError("tree store has no QRAMs")
        self.tree = tree

    @classmethod
    def build(cls, data, params: TreeParams, counters: Optional[IoCounters] = None,
              store: Optional[NodeStore] = None, dim: int = 0) -> "QuantumBPlusTree":
        tree = WeightBalancedTree.bulk_load(data, params, counters, dim=dim, store=store,
                                            quantum=True)
        return cls(tree)

    @classmethod
    def from_nested(cls, nested, params: TreeParams,
                    counters: Optional[IoCounters] = None) -> "QuantumBPlusTree":
        return cls(WeightBalancedTree.from_nested(nested, params, counters, quantum=True))

    @property
    def store(self) -> NodeStore:
        return self.tree.store

    @property
    def q0(self):
        return self.tree.store.q0

    @property
    def q1(self):
        return self.tree.store.q1

    @property
    def params(self) -> TreeParams:
        return self.tree.params

    @property
    def counters(self) -> IoCounters:
        return self.tree.counters

    def global_classical_search(self, r: QueryRange) -> GlobalOutcome:
        return global_classical_search(self.tree, r)

    def local_quantum_search(self, c: QuantumCandidates, r: QueryRange,
                             mode: Mode) -> Tuple[WeightedState, Fraction]:
        state, attempts, _ = local_quantum_search(
            self.store, [(n, c.height) for n in c.nodes], r, mode, uniform=True)
        return state, attempts

    def query(self, r: QueryRange, mode: Optional[Mode] = None) -> QueryResult:
        return query(self, r, mode)


def global_classical_search(tree: WeightBalancedTree, r: QueryRange) -> GlobalOutcome:
    """Level-by-level narrowing from the root.

    Each node in the current list costs one access; its children's routing
    ranges live in that page. The first time some node has a child wholly
    inside the range, the current list is returned as the candidates. If the
    list reaches the leaves instead, the (at most two) leaves are scanned.
    """
    store = tree.store
    nodes = store.nodes
    r_lo, r_hi = r.bounds(tree.dim)
    current = [tree.root]
    level = 0
    while current and nodes[current[0]].height > 0:
        nxt: List[int] = []
        for nid in current:
            node = store.read(nid)
            for cid in node.children:
                child = nodes[cid]
                if not child.weight:
                    continue
                cls = classify_node(child.lo, child.hi, r_lo, r_hi)
                if cls is NodeClass.INSIDE:
                    return QuantumCandidates(level, node.height, list(current))
                if cls is NodeClass.PARTIAL:
                    nxt.append(cid)
        current = nxt
        level += 1
    found: List[KeyRecordPair] = []
    for nid in current:
        leaf = store.read(nid)
        found.extend(p for p in leaf.pairs if r.contains(p.key))
    return LeafFallback(found, list(current))


def local_quantum_search(store: NodeStore, candidates: Sequence[Tuple[int, int]],
                         r: QueryRange, mode: Optional[Mode],
                         uniform: bool = False) -> Tuple[WeightedState, Fraction, FlaggedStateInfo]:
    """Enumerate all pair slots under ``candidates`` and post-select the range.

    ``candidates`` is a list of (node id, height). Each node is initialised
    with weight B^(height+1) so that, after the deepest candidate has been
    walked down to the leaves (shallower ones self-map at the leaf level),
    every pair slot carries the same weight. ``uniform=True`` uses plain
    uniform initialisation, which is free; otherwise initialisation is charged
    one access per candidate. A failed post-selection restarts from
    initialisation and pays for every load again.
    """
    B = store.params.B
    counters = store.counters
    depth = max(h for _, h in candidates)
    before = counters.snapshot()
    if uniform:
        state = uniform_init(n for n, _ in candidates)
    else:
        state = weighted_init(((n, B ** (h + 1)) for n, h in candidates), counters)
    for _ in range(depth):
        state = descend(state, store.q0, B)
    state = load_pairs(state, store.q1, B)
    flagged = mark_in_range(state, r)
    per_attempt = counters.since(before)
    if flagged.in_state.total == 0:
        raise NoResults("no in-range pair under the candidate nodes")
    info = FlaggedStateInfo(flagged.in_state.total, flagged.total,
                            per_attempt.total_io())
    if mode is None or isinstance(mode, Analytic):
        return flagged.in_state, expected_attempts(flagged), info
    attempts = 1
    while post_select(flagged, mode.rng, counters) is None:
        attempts += 1
        counters.merge(IoCounters(per_attempt.qram_loads, per_attempt.qram_stores,
                                  per_attempt.classical_node_accesses, 0))
    return flagged.in_state, Fraction(attempts), info


@dataclass
class FlaggedStateInfo:
    in_weight: int
    total: int
    io_per_attempt: int

    @property
    def success_probability(self) -> Fraction:
        return Fraction(self.in_weight, self.total)


def query(t: QuantumBPlusTree, r: QueryRange, mode: Optional[Mode] = None) -> QueryResult:
    counters = t.counters
    before = counters.snapshot()
    outcome = t.global_classical_search(r)
    if isinstance(outcome, LeafFallback):
        io = Fraction(counters.since(before).total_io())
        kind = "classical" if outcome.pairs else "empty"
        return QueryResult(kind, pairs=sorted(outcome.pairs), io=io)
    cands = [(n, outcome.height) for n in outcome.nodes]
    state, attempts, info = local_quantum_search(t.store, cands, r, mode, uniform=True)
    return _quantum_result(state, attempts, info, counters, before, mode, cands)


def _quantum_result(state, attempts, info, counters, before, mode, cands,
                    side: Optional[List[KeyRecordPair]] = None) -> QueryResult:
    io = Fraction(counters.since(before).total_io())
    if mode is None or isinstance(mode, Analytic):
        # One attempt was simulated; the remaining expected attempts are added.
        io += (attempts - 1) * info.io_per_attempt
    return QueryResult("superposition", state=state, pairs=sorted(side or []),
                       attempts=attempts, io=io,
                       success_probability=info.success_probability, candidates=cands)
