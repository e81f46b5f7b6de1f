"""Dynamic quantum B+ tree built with the logarithmic method.

Pairs first land in a sorted buffer of capacity B. A full buffer is flushed
as a one-leaf tree into forest 0; whenever forest i holds B trees they are
merged into one tree of the next height. All trees share one node store and
therefore one pair of QRAMs, so a single superposition can span them.

Two side indexes locate a pair for deletion: ``t0`` maps (key, rec) to a
pair id handed out in insertion order, and ``t1`` maps pair ids to the
forest holding them via range assignment.
"""
from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .btree import NodeStore, NotFound, WeightBalancedTree, check_balance
from .core import DuplicatePair, KeyRecordPair, QueryRange, TreeParams, check_key
from .intervalmap import IntervalMap
from .metrics import IoCounters
from .quantum_btree import (
    NodeClass,
    QueryResult,
    classify_node,
    local_quantum_search,
    _quantum_result,
)
from .qstate import Mode

BUFFER = -1


@dataclass
class ForestReport:
    violations: List[str] = field(default_factory=list)
    forest_sizes: List[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


class PairIdIndex:
    """(key, rec) -> pair id, metered as a classical B+ tree of the same fanout."""

    def __init__(self, B: int, counters: IoCounters):
        self.B = B
        self.counters = counters
        self.ids: Dict[KeyRecordPair, int] = {}

    def _charge(self) -> None:
        n = max(len(self.ids), 1)
        self.counters.classical_node_accesses += math.ceil(math.log(n, self.B)) + 1 if n > 1 else 1

    def get(self, pair: KeyRecordPair) -> Optional[int]:
        self._charge()
        return self.ids.get(pair)

    def put(self, pair: KeyRecordPair, pid: int) -> None:
        self._charge()
        self.ids[pair] = pid

    def remove(self, pair: KeyRecordPair) -> None:
        self._charge()
        del self.ids[pair]

    def __contains__(self, pair) -> bool:
        return pair in self.ids

    def __len__(self) -> int:
        return len(self.ids)


class DynamicQuantumBTree:
    def __init__(self, params: TreeParams, counters: Optional[IoCounters] = None,
                 quantum: bool = True):
        self.params = params
        self.counters = counters if counters is not None else IoCounters()
        # quantum=False gives the classical baseline: same forests, no QRAM mirror.
        self.store = NodeStore(params, self.counters, quantum=quantum)
        self.forests: List[List[WeightBalancedTree]] = []
        self.buffer: List[KeyRecordPair] = []
        self.t0 = PairIdIndex(params.B, self.counters)
        self.t1 = IntervalMap(self.counters)
        self.next_id = 0
        # Live pair ids in ascending order; used to split a tree's ids into
        # contiguous runs for range assignment in t1.
        self._live_ids: List[int] = []
        self.last_delete_actions: List[tuple] = []

    # -- bookkeeping ----------------------------------------------------------
    @property
    def B(self) -> int:
        return self.params.B

    def __len__(self) -> int:
        return len(self.t0)

    def trees(self):
        for forest in self.forests:
            yield from forest

    def live_pairs(self) -> List[KeyRecordPair]:
        out = list(self.buffer)
        for t in self.trees():
            out.extend(t.pairs())
        return sorted(out)

    def _forest(self, i: int) -> List[WeightBalancedTree]:
        while len(self.forests) <= i:
            self.forests.append([])
        return self.forests[i]

    def _assign_forest(self, pairs: List[KeyRecordPair], forest: int) -> None:
        """Point t1 at ``forest`` for these pairs, one range update per contiguous run."""
        ids = self.t0.ids
        positions = sorted(bisect.bisect_left(self._live_ids, ids[p]) for p in pairs)
        run_start = prev = None
        for pos in positions:
            if run_start is None:
                run_start = prev = pos
            elif pos == prev + 1:
                prev = pos
            else:
                self.t1.assign(self._live_ids[run_start], self._live_ids[prev], forest)
                run_start = prev = pos
        if run_start is not None:
            self.t1.assign(self._live_ids[run_start], self._live_ids[prev], forest)

    def _place(self, tree: WeightBalancedTree) -> None:
        self._forest(tree.height).append(tree)
        self._assign_forest(tree.pairs(), tree.height)

    def _drop(self, tree: WeightBalancedTree) -> None:
        self.forests[tree.height].remove(tree)

    def _discard_nodes(self, tree: WeightBalancedTree) -> List[KeyRecordPair]:
        """Read every node of ``tree`` (metered), free them and return the pairs."""
        ids = tree.node_ids()
        for nid in ids:
            self.store.read(nid)
        pairs = tree.pairs()
        for nid in ids:
            self.store.free(nid)
        return pairs

    # -- insertion ------------------------------------------------------------
    def insert(self, pair) -> None:
        pair = KeyRecordPair(*pair)
        check_key(pair.key)
        if pair in self.t0:
            raise DuplicatePair(f"{pair} is already live")
        pid = self.next_id
        self.next_id += 1
        self.t0.put(pair, pid)
        self._live_ids.append(pid)
        self.t1.assign(pid, pid, BUFFER)
        bisect.insort(self.buffer, pair)
        self.counters.classical_node_accesses += 1
        if len(self.buffer) >= self.B:
            self._flush()

    def _flush(self) -> None:
        pairs, self.buffer = self.buffer, []
        self.counters.classical_node_accesses += 1
        tree = WeightBalancedTree.bulk_load(pairs, self.params, store=self.store)
        self._place(tree)
        self._cascade(tree.height)

    def _cascade(self, i: int) -> None:
        while i < len(self.forests) and len(self.forests[i]) >= self.B:
            group = self.forests[i]
            self.forests[i] = []
            runs = [self._discard_nodes(t) for t in group]
            merged = list(heapq.merge(*runs))
            tree = WeightBalancedTree.bulk_load(merged, self.params, store=self.store)
            self._place(tree)
            i = tree.height

    # -- deletion -------------------------------------------------------------
    def delete(self, pair) -> None:
        pair = KeyRecordPair(*pair)
        pid = self.t0.get(pair)
        if pid is None:
            raise NotFound(f"{pair} is not live")
        forest = self.t1.get(pid)
        self.last_delete_actions = []
        if forest == BUFFER:
            self.counters.classical_node_accesses += 1
            self.buffer.remove(pair)
        else:
            tree = self._locate(pair, forest)
            self.last_delete_actions = tree.delete(pair)
            self._repair_root(tree)
        self.t0.remove(pair)
        del self._live_ids[bisect.bisect_left(self._live_ids, pid)]

    def _locate(self, pair: KeyRecordPair, forest: int) -> WeightBalancedTree:
        x = pair.key
        for tree in self.forests[forest]:
            root = self.store.read(tree.root)
            if root.lo <= x <= root.hi and tree.find_leaf(pair) is not None:
                return tree
        raise NotFound(f"{pair} not found in forest {forest}")

    def _repair_root(self, tree: WeightBalancedTree) -> None:
        while True:
            if tree.weight == 0:
                self._drop(tree)
                self._discard_nodes(tree)
                return
            root = tree.nodes[tree.root]
            if root.height == 0 or len(root.children) >= 2:
                break
            forest = self.forests[root.height]
            others = [t for t in forest if t is not tree]
            if any(self._borrow_root_child(tree, u) for u in others):
                self.last_delete_actions.append(("root-borrow", tree.root))
                break
            if others:
                self.last_delete_actions.append(("root-merge", tree.root, others[0].root))
                self._merge_roots(tree, others[0])
                return
            # Sole tree of its height: drop the root and move down one forest.
            self._drop(tree)
            self.store.read(tree.root)
            tree.collapse_root()
            self.last_delete_actions.append(("downgrade", tree.root))
            self._place(tree)
            h = tree.height
            self._cascade(h)
            if not any(t is tree for t in self.forests[h]):
                return
        root = tree.nodes[tree.root]
        if root.height and not tree._children_balanced(root):
            self._drop(tree)
            pairs = self._discard_nodes(tree)
            rebuilt = WeightBalancedTree.bulk_load(pairs, self.params, store=self.store)
            self._place(rebuilt)
            self._cascade(rebuilt.height)

    def _borrow_root_child(self, tree: WeightBalancedTree, donor: WeightBalancedTree) -> bool:
        """Move one boundary child of ``donor``'s root under ``tree``'s root."""
        nodes = self.store.nodes
        root, droot = nodes[tree.root], nodes[donor.root]
        self.store.read(droot.id)
        if len(droot.children) < 3:
            return False
        only = nodes[root.children[0]]
        for idx in (0, -1):
            cid = droot.children[idx]
            c = nodes[cid]
            if c.hi < only.lo:
                pos = 0
            elif c.lo > only.hi:
                pos = len(root.children)
            else:
                continue
            droot.children.remove(cid)
            root.children.insert(pos, cid)
            c.parent = root.id
            for t, n in ((donor, droot), (tree, root)):
                t._refresh(n)
                self.store.write(n)
            self._assign_forest(tree.pairs(cid), root.height)
            return True
        return False

    def _merge_roots(self, tree: WeightBalancedTree, other: WeightBalancedTree) -> None:
        """Join two trees of one height; by root merge if the key ranges allow it."""
        nodes = self.store.nodes
        root, oroot = nodes[tree.root], nodes[other.root]
        kids = sorted(root.children + oroot.children, key=lambda c: nodes[c].lo)
        disjoint = all(nodes[a].hi < nodes[b].lo for a, b in zip(kids, kids[1:]))
        self._drop(tree)
        self._drop(other)
        if disjoint and len(kids) <= self.B:
            self.store.read(tree.root)
            oroot.children = kids
            for c in kids:
                nodes[c].parent = oroot.id
            self.store.free(root.id)
            other._refresh(oroot)
            self.store.write(oroot)
            self._place(other)
            self._cascade(other.height)
            return
        pairs = sorted(self._discard_nodes(tree) + self._discard_nodes(other))
        merged = WeightBalancedTree.bulk_load(pairs, self.params, store=self.store)
        self._place(merged)
        self._cascade(merged.height)

    # -- query ----------------------------------------------------------------
    def dynamic_query(self, r: QueryRange, mode: Optional[Mode] = None) -> QueryResult:
        if not self.store.quantum:
            raise ValueError("structure was built without QRAMs; use classical_query")
        counters = self.counters
        before = counters.snapshot()
        side: List[KeyRecordPair] = []
        if self.buffer:
            counters.classical_node_accesses += 1
            side = [p for p in self.buffer if r.contains(p.key)]
        r_lo, r_hi = r.bounds(0)
        nodes = self.store.nodes
        top = len(self.forests) - 1
        lists: List[List[int]] = [[] for _ in range(max(top + 1, 1))]
        for h, forest in enumerate(self.forests):
            for tree in forest:
                root = nodes[tree.root]
                if root.weight and classify_node(root.lo, root.hi, r_lo, r_hi) is not NodeClass.OUTSIDE:
                    lists[h].append(tree.root)
        # Root routing ranges are read from the roots' own pages.
        counters.classical_node_accesses += sum(len(f) for f in self.forests)
        triggered_at = None
        for i in range(top, 0, -1):
            pending: List[int] = []
            for nid in lists[i]:
                node = nodes[nid]
                for cid in node.children:
                    child = nodes[cid]
                    if not child.weight:
                        continue
                    cls = classify_node(child.lo, child.hi, r_lo, r_hi)
                    if cls is NodeClass.INSIDE:
                        triggered_at = i
                        break
                    if cls is NodeClass.PARTIAL:
                        pending.append(cid)
                if triggered_at is not None:
                    break
            if triggered_at is not None:
                break
            lists[i - 1].extend(pending)
        if triggered_at is None:
            found = []
            for nid in lists[0]:
                counters.classical_node_accesses += 1
                found.extend(p for p in nodes[nid].pairs if r.contains(p.key))
            pairs = sorted(found + side)
            io = counters.since(before).total_io()
            return QueryResult("classical" if pairs else "empty", pairs=pairs, io=io)
        cands = [(nid, h) for h in range(triggered_at + 1) for nid in lists[h]]
        state, attempts, info = local_quantum_search(self.store, cands, r, mode)
        return _quantum_result(state, attempts, info, counters, before, mode, cands, side)

    def classical_query(self, r: QueryRange) -> List[KeyRecordPair]:
        """Exact answer by classical scans of the buffer and every tree."""
        out: List[KeyRecordPair] = []
        if self.buffer:
            self.counters.classical_node_accesses += 1
            out.extend(p for p in self.buffer if r.contains(p.key))
        for tree in self.trees():
            out.extend(tree.classical_range_query(r))
        return sorted(out)

    def flush_buffer(self) -> None:
        """Force the buffer into forest 0 even if it is not full."""
        if self.buffer:
            self._flush()

    # -- invariants -----------------------------------------------------------
    def check_forest_invariants(self) -> ForestReport:
        report = ForestReport(forest_sizes=[len(f) for f in self.forests])
        v = report.violations
        B = self.B
        if len(self.buffer) >= B:
            v.append(f"buffer holds {len(self.buffer)} >= B pairs")
        if self.buffer != sorted(self.buffer):
            v.append("buffer is not sorted")
        placement = {p: BUFFER for p in self.buffer}
        for i, forest in enumerate(self.forests):
            if len(forest) > B - 1:
                v.append(f"forest {i} holds {len(forest)} trees")
            for tree in forest:
                if tree.height != i:
                    v.append(f"tree rooted at {tree.root} has height {tree.height} in forest {i}")
                rep = check_balance(tree)
                v.extend(f"forest {i} tree {tree.root}: {msg}" for msg in rep.violations)
                for p in tree.pairs():
                    if p in placement:
                        v.append(f"{p} stored twice")
                    placement[p] = i
        if set(placement) != set(self.t0.ids):
            v.append("t0 domain differs from the live pairs")
        if len(set(self.t0.ids.values())) != len(self.t0.ids):
            v.append("t0 ids are not unique")
        saved = self.t1.counters
        self.t1.counters = None
        try:
            for p, forest in placement.items():
                pid = self.t0.ids.get(p)
                if pid is not None and self.t1.get(pid) != forest:
                    v.append(f"t1 maps {p} (id {pid}) to {self.t1.get(pid)}, actual {forest}")
        finally:
            self.t1.counters = saved
        if self._live_ids != sorted(self.t0.ids.values()):
            v.append("live id list out of sync with t0")
        return report
