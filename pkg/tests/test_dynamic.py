import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from qbtree.btree import NotFound
from qbtree.core import DUMMY, DuplicatePair, KeyRecordPair, make_dataset, make_range, validate_params
from qbtree.dynamic import BUFFER, DynamicQuantumBTree
from qbtree.metrics import IoCounters
from qbtree.qstate import Analytic, descend, load_pairs, weighted_init
from qbtree.quantum_btree import QuantumBPlusTree

from helpers import mirror_violations


def fill(d, keys, start=0):
    pairs = [KeyRecordPair(k, start + i) for i, k in enumerate(keys)]
    for p in pairs:
        d.insert(p)
    return pairs


def test_fresh_structure_is_clean():
    d = DynamicQuantumBTree(validate_params(4))
    assert d.check_forest_invariants().ok and len(d) == 0


def test_b_inserts_flush_one_leaf_tree():
    d = DynamicQuantumBTree(validate_params(4))
    fill(d, [5, 1, 3, 2])
    assert d.buffer == [] and [len(f) for f in d.forests] == [1]
    assert d.forests[0][0].height == 0


def test_b_squared_inserts_cascade():
    d = DynamicQuantumBTree(validate_params(4))
    fill(d, range(16))
    assert [len(f) for f in d.forests] == [0, 1]
    assert d.forests[1][0].height == 1
    assert d.check_forest_invariants().ok


def test_duplicate_and_missing():
    d = DynamicQuantumBTree(validate_params(4))
    fill(d, [1])
    with pytest.raises(DuplicatePair):
        d.insert(KeyRecordPair(1, 0))
    with pytest.raises(NotFound):
        d.delete(KeyRecordPair(2, 0))


def test_delete_from_buffer_skips_forests():
    d = DynamicQuantumBTree(validate_params(4))
    pairs = fill(d, [1, 2])
    assert d.t1.get(d.t0.ids[pairs[0]]) == BUFFER
    d.delete(pairs[0])
    assert d.buffer == [pairs[1]] and d.check_forest_invariants().ok


def test_corruption_is_reported():
    d = DynamicQuantumBTree(validate_params(4))
    pairs = fill(d, range(40))
    assert d.check_forest_invariants().ok
    d.t1.assign(d.t0.ids[pairs[0]], d.t0.ids[pairs[0]], 5)
    assert not d.check_forest_invariants().ok
    d = DynamicQuantumBTree(validate_params(4))
    fill(d, range(40))
    tree = d.forests[1].pop()
    d.forests[0].append(tree)
    assert not d.check_forest_invariants().ok


def test_single_tree_matches_static_query():
    B = 4
    d = DynamicQuantumBTree(validate_params(B))
    pairs = fill(d, range(0, 128, 2))
    assert sum(len(f) for f in d.forests) == 1 and not d.buffer
    static = QuantumBPlusTree.build(make_dataset(pairs), validate_params(B))
    for lo, hi in [(10, 40), (0, 200), (51, 51), (3, 9)]:
        r = make_range(lo, hi)
        a, b = d.dynamic_query(r, Analytic()), static.query(r, Analytic())
        assert a.support() == b.support()
        assert a.kind == b.kind
        if a.kind == "superposition":
            assert a.success_probability == b.success_probability


def test_pair_weights_equal_across_heights():
    B = 4
    d = DynamicQuantumBTree(validate_params(B))
    fill(d, random.Random(2).sample(range(10_000), 16 * 9 + 4 * 3 + 2))
    heights = {t.height for t in d.trees()}
    assert len(heights) >= 2
    roots = [(t.root, t.height) for t in d.trees()]
    state = weighted_init((n, B ** (h + 1)) for n, h in roots)
    for _ in range(max(h for _, h in roots)):
        state = descend(state, d.store.q0, B)
    state = load_pairs(state, d.store.q1, B)
    real = {w for label, w in state.entries.items() if label != DUMMY}
    assert len(real) == 1


def run_workload(B, ops, seed, delete_p, key_span):
    rng = random.Random(seed)
    d = DynamicQuantumBTree(validate_params(B))
    live = []
    actions = Counter()
    for step in range(ops):
        if live and rng.random() < delete_p:
            d.delete(live.pop(rng.randrange(len(live))))
            actions.update(a[0] for a in d.last_delete_actions)
        else:
            p = KeyRecordPair(rng.randrange(key_span), step)
            live.append(p)
            d.insert(p)
    return d, live, actions


@settings(max_examples=25)
@given(st.sampled_from([4, 8]), st.integers(0, 10**6), st.floats(0.0, 0.7))
def test_workload_invariants_and_oracle(B, seed, delete_p):
    d, live, _ = run_workload(B, 600, seed, delete_p, 2000)
    rep = d.check_forest_invariants()
    assert rep.ok, rep.violations[:3]
    assert d.live_pairs() == sorted(live)
    assert mirror_violations(d.store) == []
    rng = random.Random(seed)
    data = make_dataset(live)
    for _ in range(10):
        lo = rng.randrange(-10, 2010)
        r = make_range(lo, lo + rng.randrange(600))
        res = d.dynamic_query(r, Analytic())
        assert res.support() == set(data.filter(r))
        assert res.uniform


def test_every_repair_path_is_exercised():
    total = Counter()
    for seed in range(4):
        d, live, actions = run_workload(4, 3000, seed, 0.45, 3000)
        assert d.check_forest_invariants().ok
        total.update(actions)
    for kind in ("borrow", "merge", "rebuild", "root-borrow", "root-merge", "downgrade"):
        assert total[kind] > 0, total


def test_delete_everything():
    d, live, _ = run_workload(4, 500, 1, 0.0, 10**6)
    random.Random(0).shuffle(live)
    for p in live:
        d.delete(p)
        assert d.check_forest_invariants().ok
    assert len(d) == 0 and not list(d.trees())
    assert d.dynamic_query(make_range(0, 10**6)).kind == "empty"


def test_classical_baseline_mode():
    d = DynamicQuantumBTree(validate_params(4), quantum=False)
    pairs = fill(d, range(50))
    assert d.store.q0 is None
    assert d.classical_query(make_range(10, 19)) == pairs[10:20]
    with pytest.raises(ValueError):
        d.dynamic_query(make_range(0, 1))


def test_insert_io_is_logarithmic():
    c = IoCounters()
    d = DynamicQuantumBTree(validate_params(16), c)
    rng = random.Random(0)
    n = 5000
    for i in range(n):
        d.insert(KeyRecordPair(rng.randrange(10**9), i))
    assert c.total_io() / n <= 20 * math.log(n, 16)
