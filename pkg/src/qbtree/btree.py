"""Weight-balanced B+ tree.

This is both the classical half of the quantum structures and the classical
baseline. Nodes live in a :class:`NodeStore` that several trees may share,
which is how the dynamic forests and the range tree put all their nodes into
one id space (and therefore one QRAM address space).

Every node holds at most B children (or B pairs for a leaf); unused slots are
trailing dummies and are not materialised. A node's routing range is the
min/max key coordinate beneath it and lives in the parent's page, so reading
all child routing ranges of a node costs one access to that node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

from .core import (
    DUMMY,
    KEY_MIN,
    Dataset,
    EmptyDataset,
    KeyRecordPair,
    QBTreeError,
    QueryRange,
    TreeParams,
    coord,
)
from .metrics import IoCounters
from .qram import Qram, Routing


class NotFound(QBTreeError):
    pass


@dataclass(eq=False)
class Node:
    id: int
    height: int
    children: List[int] = field(default_factory=list)
    pairs: List[KeyRecordPair] = field(default_factory=list)
    lo: int = DUMMY
    hi: int = KEY_MIN
    weight: int = 0
    parent: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return self.height == 0

    @property
    def fanout(self) -> int:
        return len(self.pairs) if self.height == 0 else len(self.children)


class NodeStore:
    """Node table, id allocator, IO counters and the optional QRAM pair.

    ``mirror(node)`` rewrites the node's B slots in both QRAMs (2B stores);
    it is a no-op for stores built without QRAMs.
    """

    def __init__(self, params: TreeParams, counters: Optional[IoCounters] = None,
                 quantum: bool = False):
        self.params = params
        self.counters = counters if counters is not None else IoCounters()
        self.nodes: dict[int, Node] = {}
        self.next_id = 0
        self.q0: Optional[Qram] = Qram(self.counters) if quantum else None
        self.q1: Optional[Qram] = Qram(self.counters) if quantum else None

    @property
    def quantum(self) -> bool:
        return self.q0 is not None

    def new_node(self, height: int) -> Node:
        node = Node(self.next_id, height)
        self.next_id += 1
        self.nodes[node.id] = node
        return node

    def free(self, node_id: int) -> None:
        # Freed ids are never referenced by a live node, so their QRAM cells
        # are unreachable and left as they are.
        del self.nodes[node_id]

    def read(self, node_id: int) -> Node:
        self.counters.classical_node_accesses += 1
        return self.nodes[node_id]

    def write(self, node: Node) -> None:
        self.counters.classical_node_accesses += 1
        self.mirror(node)

    def mirror(self, node: Node) -> None:
        if self.q0 is None:
            return
        B = self.params.B
        base = node.id * B
        if node.height == 0:
            for j in range(B):
                self.q0.store(base + j, node.id)
                self.q1.store(base + j, node.pairs[j] if j < len(node.pairs) else DUMMY)
        else:
            nodes = self.nodes
            for j in range(B):
                if j < len(node.children):
                    child = nodes[node.children[j]]
                    self.q0.store(base + j, child.id)
                    self.q1.store(base + j, Routing(child.lo, child.hi))
                else:
                    self.q0.store(base + j, DUMMY)
                    self.q1.store(base + j, DUMMY)


def _even_split(items: Sequence, parts: int) -> List[Sequence]:
    """Split into ``parts`` runs whose sizes differ by at most one, larger runs first."""
    q, r = divmod(len(items), parts)
    out, start = [], 0
    for i in range(parts):
        end = start + q + (1 if i < r else 0)
        out.append(items[start:end])
        start = end
    return out


def bulk_height(n: int, B: int) -> int:
    """Smallest height whose full capacity B^(h+1) holds n pairs."""
    h = 0
    while B ** (h + 1) < n:
        h += 1
    return h


class WeightBalancedTree:
    def __init__(self, store: NodeStore, root: int, dim: int = 0):
        self.store = store
        self.root = root
        self.dim = dim

    # -- basic accessors ----------------------------------------------------
    @property
    def params(self) -> TreeParams:
        return self.store.params

    @property
    def B(self) -> int:
        return self.store.params.B

    @property
    def nodes(self) -> dict[int, Node]:
        return self.store.nodes

    @property
    def counters(self) -> IoCounters:
        return self.store.counters

    @property
    def height(self) -> int:
        return self.nodes[self.root].height

    @property
    def weight(self) -> int:
        return self.nodes[self.root].weight

    def sort_key(self, p: KeyRecordPair):
        return (coord(p.key, self.dim), p)

    def iter_nodes(self, start: Optional[int] = None) -> Iterable[Node]:
        """Breadth-first walk without metering."""
        frontier = [self.root if start is None else start]
        while frontier:
            nxt = []
            for nid in frontier:
                node = self.nodes[nid]
                yield node
                nxt.extend(node.children)
            frontier = nxt

    def pairs(self, start: Optional[int] = None) -> List[KeyRecordPair]:
        """All pairs under ``start`` in leaf order, without metering."""
        out: List[KeyRecordPair] = []
        stack = [self.root if start is None else start]
        while stack:
            node = self.nodes[stack.pop()]
            if node.height == 0:
                out.extend(node.pairs)
            else:
                stack.extend(reversed(node.children))
        return out

    def node_ids(self, start: Optional[int] = None) -> List[int]:
        return [n.id for n in self.iter_nodes(start)]

    def leaf_count(self) -> int:
        return sum(1 for n in self.iter_nodes() if n.height == 0)

    # -- construction -------------------------------------------------------
    def _refresh(self, node: Node) -> None:
        """Recompute weight and routing range from the node's own slots."""
        d = self.dim
        if node.height == 0:
            node.weight = len(node.pairs)
            if node.pairs:
                node.lo = coord(node.pairs[0].key, d)
                node.hi = coord(node.pairs[-1].key, d)
            else:
                node.lo, node.hi = DUMMY, KEY_MIN
        else:
            kids = [self.nodes[c] for c in node.children]
            node.weight = sum(k.weight for k in kids)
            live = [k for k in kids if k.weight]
            if live:
                node.lo = min(k.lo for k in live)
                node.hi = max(k.hi for k in live)
            else:
                node.lo, node.hi = DUMMY, KEY_MIN

    def layout(self, pairs: Sequence[KeyRecordPair], height: int) -> int:
        """Build a subtree of exactly ``height`` over sorted ``pairs``.

        The top node gets ceil(W / B^height) children, every node below it gets
        B, and the pairs are spread evenly over the resulting leaves. Ids are
        allocated breadth-first. Returns the subtree root id.
        """
        B = self.B
        store = self.store
        W = len(pairs)
        if height == 0:
            groups = [list(pairs)]
            top = 1
        else:
            top = max(1, math.ceil(W / B ** height))
            leaves = top * B ** (height - 1)
            groups = [list(g) for g in _even_split(pairs, leaves)]
        # Shape of each level, top-down: number of nodes at each height.
        counts = [1] + [top * B ** t for t in range(height)]
        levels: List[List[Node]] = []
        for t, count in enumerate(counts):
            levels.append([store.new_node(height - t) for _ in range(count)])
        for leaf, group in zip(levels[-1], groups):
            leaf.pairs = group
        for t in range(len(levels) - 1):
            parents, kids = levels[t], levels[t + 1]
            fan = len(kids) // len(parents)
            for i, parent in enumerate(parents):
                parent.children = [k.id for k in kids[i * fan:(i + 1) * fan]]
                for k in kids[i * fan:(i + 1) * fan]:
                    k.parent = parent.id
        for level in reversed(levels):
            for node in level:
                self._refresh(node)
        for level in levels:
            for node in level:
                store.write(node)
        return levels[0][0].id

    @classmethod
    def bulk_load(cls, data, params: TreeParams, counters: Optional[IoCounters] = None,
                  dim: int = 0, store: Optional[NodeStore] = None,
                  quantum: bool = False) -> "WeightBalancedTree":
        pairs = list(data.pairs if isinstance(data, Dataset) else data)
        if not pairs:
            raise EmptyDataset("cannot bulk load an empty dataset")
        if store is None:
            store = NodeStore(params, counters, quantum=quantum)
        tree = cls(store, -1, dim)
        pairs.sort(key=tree.sort_key)
        tree.root = tree.layout(pairs, bulk_height(len(pairs), params.B))
        tree.nodes[tree.root].parent = None
        return tree

    @classmethod
    def from_nested(cls, nested, params: TreeParams, counters: Optional[IoCounters] = None,
                    quantum: bool = False) -> "WeightBalancedTree":
        """Build a tree from an explicit nested layout.

        A leaf is a list of :class:`KeyRecordPair`; an internal node is a list
        of child layouts. Ids are assigned breadth-first from 0. Used to
        reproduce hand-drawn trees that bulk loading would not produce.
        """
        store = NodeStore(params, counters, quantum=quantum)
        tree = cls(store, -1, 0)

        def depth(s):
            return 0 if not s or isinstance(s[0], KeyRecordPair) else 1 + depth(s[0])

        queue = [(nested, None)]
        made: List[tuple] = []
        while queue:
            nxt = []
            for s, parent in queue:
                node = store.new_node(depth(s))
                node.parent = parent
                if parent is not None:
                    store.nodes[parent].children.append(node.id)
                if node.height == 0:
                    node.pairs = sorted(s, key=tree.sort_key)
                else:
                    nxt.extend((c, node.id) for c in s)
                made.append(node)
            queue = nxt
        for node in reversed(made):
            tree._refresh(node)
        for node in made:
            store.write(node)
        tree.root = made[0].id
        return tree

    # -- classical query ----------------------------------------------------
    def classical_range_query(self, r: QueryRange) -> List[KeyRecordPair]:
        """Exact range scan; one access per node visited."""
        lo, hi = r.bounds(self.dim)
        out: List[KeyRecordPair] = []
        root = self.nodes[self.root]
        if root.weight == 0 or root.hi < lo or root.lo > hi:
            self.store.read(self.root)
            return out
        stack = [self.root]
        while stack:
            node = self.store.read(stack.pop())
            if node.height == 0:
                out.extend(p for p in node.pairs if r.contains(p.key))
                continue
            for cid in reversed(node.children):
                c = self.nodes[cid]
                if c.weight and c.lo <= hi and c.hi >= lo:
                    stack.append(cid)
        return out

    def find_leaf(self, pair: KeyRecordPair) -> Optional[int]:
        """Locate the leaf holding ``pair``; metered as a point search."""
        x = coord(pair.key, self.dim)
        stack = [self.root]
        while stack:
            node = self.store.read(stack.pop())
            if node.height == 0:
                if pair in node.pairs:
                    return node.id
                continue
            for cid in reversed(node.children):
                c = self.nodes[cid]
                if c.weight and c.lo <= x <= c.hi:
                    stack.append(cid)
        return None

    # -- deletion and rebalancing ---------------------------------------------
    def min_weight(self, height: int) -> int:
        return self.B ** (height + 1) // 4

    def is_balanced_node(self, node: Node) -> bool:
        return self.min_weight(node.height) <= node.weight <= self.B ** (node.height + 1)

    def delete(self, pair: KeyRecordPair) -> List[tuple]:
        """Replace ``pair`` with a dummy and repair every imbalanced ancestor.

        Returns the repair actions taken, e.g. ``("borrow", node, sibling,
        moved)``, ``("merge", node, sibling)`` or ``("rebuild", old, new)``.
        The root is left alone; callers decide what to do with a root that has
        fewer than two children.
        """
        leaf_id = self.find_leaf(pair)
        if leaf_id is None:
            raise NotFound(f"{pair} is not in the tree")
        leaf = self.nodes[leaf_id]
        leaf.pairs.remove(pair)
        actions: List[tuple] = []
        # Update weights and routing bottom-up along the path.
        nid: Optional[int] = leaf_id
        while nid is not None:
            node = self.nodes[nid]
            self._refresh(node)
            self.store.write(node)
            nid = node.parent
        nid = leaf_id
        while nid is not None and nid != self.root:
            node = self.nodes[nid]
            parent_id = node.parent
            if not self.is_balanced_node(node):
                actions.extend(self._repair(node))
            elif not self._children_balanced(node):
                # A child with no sibling to lean on stayed light; re-lay this node.
                actions.append(self._rebuild(self.nodes[parent_id], [node]))
            nid = parent_id
        return actions

    def rebuild_all(self) -> tuple:
        """Re-lay the whole tree at its bulk-load height."""
        old = self.node_ids()
        for nid in old:
            self.store.read(nid)
        pairs = self.pairs()
        for nid in old:
            self.store.free(nid)
        self.root = self.layout(pairs, bulk_height(len(pairs), self.B))
        self.nodes[self.root].parent = None
        return ("rebuild", old, [self.root])

    def _children_balanced(self, node: Node) -> bool:
        return all(self.is_balanced_node(self.nodes[c]) for c in node.children)

    def _repair(self, node: Node) -> List[tuple]:
        parent = self.nodes[node.parent]
        idx = parent.children.index(node.id)
        left = self.nodes[parent.children[idx - 1]] if idx > 0 else None
        right = self.nodes[parent.children[idx + 1]] if idx + 1 < len(parent.children) else None
        self.store.read(parent.id)
        for sib in (left, right):
            if sib is not None and self._try_borrow(node, sib, from_left=sib is left):
                moved = node.children[0 if sib is left else -1] if node.height else None
                return [("borrow", node.id, sib.id, moved)]
        sib = left if left is not None else right
        if sib is None:
            return []
        a, b = (sib, node) if sib is left else (node, sib)
        if a.fanout + b.fanout <= self.B:
            merged = self._merge(a, b, parent)
            if self._children_balanced(merged):
                return [("merge", a.id, b.id)]
            a, b = merged, None
        return [self._rebuild(parent, [x for x in (a, b) if x is not None])]

    def _try_borrow(self, node: Node, sib: Node, from_left: bool) -> bool:
        B = self.B
        if sib.fanout < 2 or node.fanout + 1 > B:
            return False
        if node.height == 0:
            moved_w = 1
        else:
            moved_w = self.nodes[sib.children[-1 if from_left else 0]].weight
        if sib.weight - moved_w < self.min_weight(sib.height):
            return False
        if not self.min_weight(node.height) <= node.weight + moved_w <= B ** (node.height + 1):
            return False
        if node.height == 0:
            p = sib.pairs.pop(-1 if from_left else 0)
            if from_left:
                node.pairs.insert(0, p)
            else:
                node.pairs.append(p)
        else:
            cid = sib.children.pop(-1 if from_left else 0)
            if from_left:
                node.children.insert(0, cid)
            else:
                node.children.append(cid)
            self.nodes[cid].parent = node.id
        if not self._children_balanced(node):
            # Undo: borrowing does not fix a subtree with a deeper imbalance.
            if node.height == 0:
                p = node.pairs.pop(0 if from_left else -1)
                sib.pairs.insert(len(sib.pairs) if from_left else 0, p)
            else:
                cid = node.children.pop(0 if from_left else -1)
                sib.children.insert(len(sib.children) if from_left else 0, cid)
                self.nodes[cid].parent = sib.id
            return False
        for n in (sib, node):
            self._refresh(n)
            self.store.write(n)
        parent = self.nodes[node.parent]
        self.store.write(parent)
        return True

    def _merge(self, a: Node, b: Node, parent: Node) -> Node:
        """Fold the right sibling ``b`` into ``a``; ``b``'s id is freed."""
        if a.height == 0:
            a.pairs.extend(b.pairs)
        else:
            a.children.extend(b.children)
            for cid in b.children:
                self.nodes[cid].parent = a.id
        parent.children.remove(b.id)
        self.store.read(b.id)
        self.store.free(b.id)
        self._refresh(a)
        self.store.write(a)
        self.store.write(parent)
        return a

    def _rebuild(self, parent: Node, group: List[Node]) -> tuple:
        """Re-lay adjacent siblings as perfectly balanced subtrees of the same height."""
        height = group[0].height
        pairs: List[KeyRecordPair] = []
        old_ids: List[int] = []
        for n in group:
            for sub in list(self.iter_nodes(n.id)):
                self.store.read(sub.id)
                old_ids.append(sub.id)
            pairs.extend(self.pairs(n.id))
        pos = parent.children.index(group[0].id)
        for n in group:
            parent.children.remove(n.id)
        for nid in old_ids:
            self.store.free(nid)
        m = max(1, math.ceil(len(pairs) / self.B ** (height + 1)))
        new_ids = []
        for chunk in _even_split(pairs, m):
            rid = self.layout(chunk, height)
            self.nodes[rid].parent = parent.id
            new_ids.append(rid)
        parent.children[pos:pos] = new_ids
        self._refresh(parent)
        self.store.write(parent)
        return ("rebuild", [n.id for n in group], new_ids)

    def collapse_root(self) -> bool:
        """Drop an internal root that has a single child. Returns True if it did."""
        root = self.nodes[self.root]
        if root.height == 0 or len(root.children) != 1:
            return False
        child = root.children[0]
        self.store.free(root.id)
        self.root = child
        self.nodes[child].parent = None
        return True


@dataclass
class BalanceReport:
    weights: dict
    balanced: dict
    perfectly_balanced: dict
    violations: List[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def all_perfect(self) -> bool:
        return all(self.perfectly_balanced.values())


def check_balance(t: WeightBalancedTree) -> BalanceReport:
    B = t.B
    weights, balanced, perfect, violations = {}, {}, {}, []
    root = t.nodes[t.root]
    if root.parent is not None:
        violations.append(f"root {root.id} has a parent")
    if root.height > 0 and len(root.children) < 2:
        violations.append(f"root {root.id} has {len(root.children)} children")
    for node in t.iter_nodes():
        h = node.height
        if h == 0:
            w = len(node.pairs)
            keys = [t.sort_key(p) for p in node.pairs]
            if keys != sorted(keys):
                violations.append(f"leaf {node.id} pairs out of order")
            if node.children:
                violations.append(f"leaf {node.id} has children")
        else:
            kids = [t.nodes[c] for c in node.children]
            w = sum(k.weight for k in kids)
            for k in kids:
                if k.height != h - 1:
                    violations.append(f"node {k.id} at height {k.height} under height {h}")
                if k.parent != node.id:
                    violations.append(f"node {k.id} parent pointer is {k.parent}, expected {node.id}")
            live = [k for k in kids if k.weight]
            for a, b in zip(live, live[1:]):
                if a.hi > b.lo:
                    violations.append(f"children {a.id},{b.id} of {node.id} overlap")
        if node.fanout > B:
            violations.append(f"node {node.id} fanout {node.fanout} > {B}")
        if w != node.weight:
            violations.append(f"node {node.id} weight {node.weight} != actual {w}")
        weights[node.id] = w
        if node.id != t.root:
            balanced[node.id] = B ** (h + 1) // 4 <= w <= B ** (h + 1)
            perfect[node.id] = B ** (h + 1) // 2 <= w <= B ** (h + 1)
            if not balanced[node.id]:
                violations.append(f"node {node.id} (h={h}) weight {w} outside "
                                  f"[{B ** (h + 1) // 4}, {B ** (h + 1)}]")
    sub_pairs = t.pairs()
    if sub_pairs:
        lo = coord(min(sub_pairs, key=t.sort_key).key, t.dim)
        hi = coord(max(sub_pairs, key=t.sort_key).key, t.dim)
        if (root.lo, root.hi) != (lo, hi):
            violations.append(f"root routing {(root.lo, root.hi)} != {(lo, hi)}")
    return BalanceReport(weights, balanced, perfect, violations)


def classical_range_query(t: WeightBalancedTree, r: QueryRange) -> List[KeyRecordPair]:
    return t.classical_range_query(r)
