"""Shared test utilities."""
from qbtree.core import DUMMY
from qbtree.qram import Routing


def mirror_violations(store):
    """Compare every live node against its QRAM cells."""
    B = store.params.B
    bad = []
    for node in store.nodes.values():
        base = node.id * B
        for j in range(B):
            if node.height == 0:
                want0 = node.id
                want1 = node.pairs[j] if j < len(node.pairs) else DUMMY
            elif j < len(node.children):
                child = store.nodes[node.children[j]]
                want0, want1 = child.id, Routing(child.lo, child.hi)
            else:
                want0 = want1 = DUMMY
            if store.q0[base + j] != want0 or store.q1[base + j] != want1:
                bad.append((node.id, j))
    return bad
