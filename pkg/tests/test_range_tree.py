import itertools
import random

import pytest
from hypothesis import given, strategies as st

from qbtree.core import EmptyDataset, InvalidKey, KeyRecordPair, make_dataset, make_range, validate_params
from qbtree.metrics import IoCounters
from qbtree.qstate import Analytic
from qbtree.quantum_btree import QuantumBPlusTree
from qbtree.range_tree import (
    build_rtree,
    canonical_nodes,
    classical_range_tree_query,
    md_query,
)


def grid(n_side, B=4):
    pts = [(x, y) for x in range(n_side) for y in range(n_side)]
    d = make_dataset(KeyRecordPair(p, i) for i, p in enumerate(pts))
    return d, build_rtree(d, validate_params(B))


def test_build_rejects_empty_and_mixed():
    with pytest.raises(EmptyDataset):
        build_rtree([], validate_params(4))
    with pytest.raises(InvalidKey):
        build_rtree([KeyRecordPair((1, 2), 0), KeyRecordPair((1, 2, 3), 1)], validate_params(4))


def test_one_dim_equals_static_query():
    rng = random.Random(1)
    d = make_dataset(KeyRecordPair(k, i) for i, k in enumerate(rng.sample(range(1000), 200)))
    t = build_rtree(d, validate_params(4))
    s = QuantumBPlusTree.build(d, validate_params(4))
    for _ in range(30):
        lo = rng.randrange(1000)
        r = make_range(lo, lo + rng.randrange(300))
        a, b = md_query(t, r), s.query(r)
        assert a.support() == b.support() and a.success_probability == b.success_probability


def test_structure_audit_n16():
    d, t = grid(4)
    assert t.dim == 2
    internal = [n for n in t.primary.iter_nodes() if n.height]
    assert set(t.secondary) == {n.id for n in internal}
    for n in internal:
        sub = t.secondary[n.id]
        assert sub.dim == 1
        assert sorted(sub.primary.pairs()) == sorted(t.primary.pairs(n.id))


def test_pairs_per_level_sum_to_n():
    rng = random.Random(4)
    pts = {(rng.randrange(500), rng.randrange(500)) for _ in range(300)}
    d = make_dataset(KeyRecordPair(p, i) for i, p in enumerate(sorted(pts)))
    t = build_rtree(d, validate_params(4))
    per_height = {}
    for n in t.primary.iter_nodes():
        if n.height:
            per_height[n.height] = per_height.get(n.height, 0) + len(t.secondary[n.id].primary.pairs())
    assert set(per_height.values()) == {len(d)}


def test_canonical_full_and_empty():
    _, t = grid(6)
    tree = t.primary
    assert canonical_nodes(tree, make_range((0, -10), (0, 100))).entries == [(tree.root, "inside")]
    assert canonical_nodes(tree, make_range((0, 50), (0, 60))).entries == []


def test_canonical_exact_cover_exhaustive():
    _, t = grid(7, B=4)
    tree = t.primary
    for lo, hi in itertools.combinations_with_replacement(range(-1, 9), 2):
        r = make_range((0, lo), (0, hi))
        covered = []
        for nid, why in canonical_nodes(tree, r).entries:
            pairs = tree.pairs(nid)
            if why == "inside":
                assert all(lo <= p.key[1] <= hi for p in pairs)
            else:
                assert tree.nodes[nid].height == 0
                pairs = [p for p in pairs if lo <= p.key[1] <= hi]
            covered.extend(pairs)
        assert len(covered) == len(set(covered))
        assert set(covered) == {p for p in tree.pairs() if lo <= p.key[1] <= hi}


def test_grid_point_query_singleton():
    d, t = grid(12)
    res = md_query(t, make_range((5, 7), (5, 7)))
    assert res.support() == {p for p in d.pairs if p.key == (5, 7)}


def test_classical_empty_and_full():
    d, t = grid(10)
    assert classical_range_tree_query(t, make_range((50, 50), (60, 60))) == []
    assert classical_range_tree_query(t, make_range((0, 0), (9, 9))) == list(d.pairs)


def test_classical_io_grows_with_output():
    d, t = grid(32, B=4)
    ios = []
    for w in (2, 8, 32):
        c = t.counters.snapshot()
        classical_range_tree_query(t, make_range((0, 0), (w - 1, w - 1)))
        ios.append(t.counters.since(c).total_io())
    assert ios[0] < ios[1] < ios[2]


def test_three_dims_oracle():
    rng = random.Random(9)
    pts = {tuple(rng.randrange(12) for _ in range(3)) for _ in range(150)}
    d = make_dataset(KeyRecordPair(p, i) for i, p in enumerate(sorted(pts)))
    t = build_rtree(d, validate_params(4))
    for _ in range(40):
        lo = tuple(rng.randrange(12) for _ in range(3))
        hi = tuple(l + rng.randrange(8) for l in lo)
        r = make_range(lo, hi)
        res = md_query(t, r, Analytic())
        assert res.support() == set(d.filter(r)) and res.uniform
        assert set(classical_range_tree_query(t, r)) == set(d.filter(r))


@given(st.integers(1, 256), st.sampled_from([4, 8, 16]), st.integers(0, 10**6))
def test_md_query_matches_oracle(n, B, seed):
    rng = random.Random(seed)
    side = rng.choice([6, 20, 300])
    pts = {(rng.randrange(side), rng.randrange(side)) for _ in range(n)}
    d = make_dataset(KeyRecordPair(p, i) for i, p in enumerate(sorted(pts)))
    t = build_rtree(d, validate_params(B), counters=IoCounters())
    xs = sorted(rng.randrange(-1, side + 1) for _ in range(2))
    ys = sorted(rng.randrange(-1, side + 1) for _ in range(2))
    r = make_range((xs[0], ys[0]), (xs[1], ys[1]))
    res = md_query(t, r, Analytic())
    assert res.support() == set(d.filter(r))
    assert res.uniform
    if res.kind == "superposition":
        assert res.attempts <= 8 * B
