"""d-dimensional quantum range tree and its classical counterpart.

The primary tree indexes the last coordinate. Each internal node carries a
(d-1)-dimensional structure over the pairs beneath it; leaves hold at most B
pairs and are answered by a direct scan. Every 1-D tree at the bottom of the
recursion lives in one shared quantum node store, so a single superposition
can span all of them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .btree import NodeStore, WeightBalancedTree
from .core import (
    Dataset,
    EmptyDataset,
    InvalidKey,
    KeyRecordPair,
    QueryRange,
    TreeParams,
    key_dims,
)
from .metrics import IoCounters
from .qstate import Mode
from .quantum_btree import (
    NodeClass,
    QuantumBPlusTree,
    QuantumCandidates,
    QueryResult,
    classify_node,
    global_classical_search,
    local_quantum_search,
    query as static_query,
    _quantum_result,
)


@dataclass
class QuantumRangeTree:
    dim: int
    primary: WeightBalancedTree
    secondary: Dict[int, "QuantumRangeTree"] = field(default_factory=dict)

    @property
    def counters(self) -> IoCounters:
        return self.primary.counters

    @property
    def params(self) -> TreeParams:
        return self.primary.params

    def one_dim_trees(self) -> List[WeightBalancedTree]:
        if self.dim == 1:
            return [self.primary]
        out = []
        for sub in self.secondary.values():
            out.extend(sub.one_dim_trees())
        return out


@dataclass
class CanonicalSet:
    """Canonical cover of a 1-D slab.

    ``entries`` holds (node id, reason): ``"inside"`` nodes lie wholly in the
    slab, ``"boundary"`` leaves straddle it and must be filtered.
    """

    entries: List[Tuple[int, str]] = field(default_factory=list)

    def nodes(self, reason: Optional[str] = None) -> List[int]:
        return [n for n, why in self.entries if reason is None or why == reason]


def build_rtree(data, params: TreeParams, dim: Optional[int] = None,
                counters: Optional[IoCounters] = None) -> QuantumRangeTree:
    pairs = sorted(data.pairs if isinstance(data, Dataset) else data)
    if not pairs:
        raise EmptyDataset("cannot build a range tree over no pairs")
    d = key_dims(pairs[0].key) if dim is None else dim
    if d < 1 or any(key_dims(p.key) != d for p in pairs):
        raise InvalidKey(f"every key must have {d} coordinates")
    counters = counters if counters is not None else IoCounters()
    qstore = NodeStore(params, counters, quantum=True)
    cstore = NodeStore(params, counters, quantum=False) if d > 1 else None
    return _build(pairs, d, params, qstore, cstore)


def _build(pairs: List[KeyRecordPair], d: int, params: TreeParams,
           qstore: NodeStore, cstore: Optional[NodeStore]) -> QuantumRangeTree:
    if d == 1:
        return QuantumRangeTree(1, WeightBalancedTree.bulk_load(pairs, params, dim=0, store=qstore))
    tree = WeightBalancedTree.bulk_load(pairs, params, dim=d - 1, store=cstore)
    secondary = {}
    for node in tree.iter_nodes():
        if node.height:
            secondary[node.id] = _build(tree.pairs(node.id), d - 1, params, qstore, cstore)
    return QuantumRangeTree(d, tree, secondary)


def canonical_nodes(tree: WeightBalancedTree, r: QueryRange) -> CanonicalSet:
    """Maximal inside nodes plus straddling leaves along the coordinate ``tree.dim``."""
    lo, hi = r.bounds(tree.dim)
    nodes = tree.nodes
    out = CanonicalSet()
    root = nodes[tree.root]
    cls = classify_node(root.lo, root.hi, lo, hi) if root.weight else NodeClass.OUTSIDE
    if cls is NodeClass.OUTSIDE:
        return out
    if cls is NodeClass.INSIDE:
        out.entries.append((root.id, "inside"))
        return out
    stack = [root.id]
    while stack:
        node = tree.store.read(stack.pop())
        if node.height == 0:
            out.entries.append((node.id, "boundary"))
            continue
        for cid in node.children:
            c = nodes[cid]
            if not c.weight:
                continue
            cls = classify_node(c.lo, c.hi, lo, hi)
            if cls is NodeClass.INSIDE:
                out.entries.append((cid, "inside"))
            elif cls is NodeClass.PARTIAL:
                stack.append(cid)
    out.entries.sort(key=lambda e: nodes[e[0]].lo)
    return out


def _collect(t: QuantumRangeTree, r: QueryRange, side: List[KeyRecordPair],
             trees: List[WeightBalancedTree]) -> None:
    """Reduce a d-dim query to 1-D trees; pairs found in leaves go to ``side``."""
    if t.dim == 1:
        trees.append(t.primary)
        return
    store = t.primary.store
    for nid, _ in canonical_nodes(t.primary, r).entries:
        node = store.nodes[nid]
        if node.height:
            _collect(t.secondary[nid], r, side, trees)
        else:
            store.read(nid)
            side.extend(p for p in node.pairs if r.contains(p.key))


def md_query(t: QuantumRangeTree, r: QueryRange, mode: Optional[Mode] = None) -> QueryResult:
    if t.dim == 1:
        return static_query(QuantumBPlusTree(t.primary), r, mode)
    counters = t.counters
    before = counters.snapshot()
    side: List[KeyRecordPair] = []
    trees: List[WeightBalancedTree] = []
    _collect(t, r, side, trees)
    cands: List[Tuple[int, int]] = []
    fallback: List[KeyRecordPair] = []
    triggered = False
    for tree in trees:
        outcome = global_classical_search(tree, r)
        if isinstance(outcome, QuantumCandidates):
            triggered = True
            cands.extend((n, outcome.height) for n in outcome.nodes)
        else:
            cands.extend((n, 0) for n in outcome.leaves)
            fallback.extend(outcome.pairs)
    if not triggered:
        pairs = sorted(side + fallback)
        io = counters.since(before).total_io()
        return QueryResult("classical" if pairs else "empty", pairs=pairs, io=io)
    store = trees[0].store
    state, attempts, info = local_quantum_search(store, cands, r, mode)
    return _quantum_result(state, attempts, info, counters, before, mode, cands, side)


def classical_range_tree_query(t: QuantumRangeTree, r: QueryRange) -> List[KeyRecordPair]:
    side: List[KeyRecordPair] = []
    trees: List[WeightBalancedTree] = []
    _collect(t, r, side, trees)
    for tree in trees:
        side.extend(tree.classical_range_query(r))
    return sorted(side)
