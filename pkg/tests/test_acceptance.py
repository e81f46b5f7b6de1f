"""Acceptance criteria, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""
import math
import random
import subprocess
import sys
import time
from fractions import Fraction

from qbtree.bench import ExperimentConfig, run_experiment
from qbtree.btree import check_balance
from qbtree.core import KeyRecordPair, make_dataset, make_range, validate_params
from qbtree.dynamic import DynamicQuantumBTree
from qbtree.fixtures import example_query, example_tree, micro_fixture
from qbtree.metrics import IoCounters
from qbtree.qstate import (
    Analytic,
    expected_attempts,
    mark_in_range,
    post_select,
    success_probability,
    uniform_init,
)
from qbtree.range_tree import build_rtree, classical_range_tree_query, md_query
from qbtree.verify import static_sweep

RESULTS = []


def report(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def ceil_log(n, B):
    h = 0
    while B ** h < n:
        h += 1
    return h


_sweep = {}


def static_sweep_stats():
    if "s" not in _sweep:
        start = time.perf_counter()
        stats = static_sweep(1000, seed=2024)
        _sweep["s"] = (stats, time.perf_counter() - start)
    return _sweep["s"]


def test_worked_example():
    start = time.perf_counter()
    t = example_tree()
    res = t.query(example_query())
    elapsed = time.perf_counter() - start
    keys = sorted(p.key for p in res.state.entries)
    ok = (
        [n for n, _ in res.candidates] == [1, 2]
        and {h for _, h in res.candidates} == {1}
        and res.success_probability == Fraction(3, 32)
        and keys == [6, 8, 10]
        and res.state.is_uniform()
        and elapsed < 1
    )
    report("worked example", ok,
           f"candidates={[n for n, _ in res.candidates]}, p={res.success_probability}, "
           f"keys={keys}, uniform={res.state.is_uniform()}, {elapsed:.3f}s")


def test_micro_fixture():
    start = time.perf_counter()
    f = micro_fixture()
    p = success_probability(f)
    keys = [pr.key for pr in f.in_state.entries]
    elapsed = time.perf_counter() - start
    report("post-selection micro-fixture", p == Fraction(1, 4) and keys == [4] and elapsed < 1,
           f"p={p}, result={keys}, {elapsed:.3f}s")


def test_mean_attempts():
    start = time.perf_counter()
    example_like = uniform_init(KeyRecordPair(k, k) for k in range(32))
    states = [mark_in_range(example_like, make_range(0, 2)), micro_fixture()]
    rng = random.Random(77)
    trials = 100_000
    worst = 0.0
    details = []
    for f in states:
        total = 0
        for _ in range(trials):
            n = 1
            while post_select(f, rng) is None:
                n += 1
            total += n
        exact = expected_attempts(f)
        err = abs(total / trials - float(exact)) / float(exact)
        worst = max(worst, err)
        details.append(f"{total / trials:.3f} vs {exact}")
    elapsed = time.perf_counter() - start
    report("mean attempts", worst <= 0.02 and elapsed < 30,
           f"{'; '.join(details)}; worst rel. error {worst:.4f}, {trials} trials each, {elapsed:.1f}s")


def test_oracle_equivalence():
    stats, elapsed = static_sweep_stats()
    oracle = [v for v in stats.violations if "oracle" in v or "uniform" in v]
    report("oracle equivalence", not oracle and stats.instances == 1000 and elapsed < 60,
           f"{stats.instances} instances ({stats.quantum} quantum), {len(oracle)} violations, "
           f"{elapsed:.1f}s")


def test_candidates_and_density():
    stats, _ = static_sweep_stats()
    bad = [v for v in stats.violations if "candidates" in v or "density" in v]
    report("candidate and density bounds", not bad,
           f"max candidates {stats.max_candidates}, min density {stats.min_density}, "
           f"{len(bad)} violations")


def test_static_io_bound():
    stats, _ = static_sweep_stats()
    bad = [v for v in stats.violations if ": io " in v]
    report("static IO bound", not bad,
           f"max io / (10B(ceil(log_B N)+1)) = {float(stats.max_io_ratio):.3f}, {len(bad)} violations")


def static_rows(n, sel, queries=200, seed=11):
    q, c = run_experiment(ExperimentConfig(mode="static", N=n, B=16, selectivity=sel,
                                           query_count=queries, seed=seed))
    return q.mean_query_io, c.mean_query_io


def test_scaling_trend():
    start = time.perf_counter()
    sizes = [4096, 16384, 65536, 262144, 1048576]
    rows = {n: static_rows(n, 0.05) for n in sizes}
    elapsed = time.perf_counter() - start
    qs = [rows[n][0] for n in sizes]
    cs = [rows[n][1] for n in sizes]
    ratio = cs[-1] / qs[-1]
    q_var = max(qs) / min(qs)
    c_growth = cs[-1] / cs[0]
    table = ", ".join(f"N={n}: q={rows[n][0]:.1f} c={rows[n][1]:.1f}" for n in sizes)
    report("scaling trend", ratio >= 100 and q_var < 3 and c_growth >= 100 and elapsed < 600,
           f"ratio@1M={ratio:.0f} (>=100), quantum variation={q_var:.2f}x (<3), "
           f"classical growth={c_growth:.0f}x (>=100); {table}; {elapsed:.0f}s")


def test_selectivity_trend():
    q1, c1 = static_rows(262144, 0.01)
    q10, c10 = static_rows(262144, 0.10)
    report("selectivity trend", q10 <= q1 and c10 >= 5 * c1,
           f"quantum {q1:.2f} -> {q10:.2f} (needs non-increase), "
           f"classical {c1:.1f} -> {c10:.1f} ({c10 / c1:.1f}x, needs >=5x)")


def test_dynamic_workload():
    B = 16
    rng = random.Random(31)
    counters = IoCounters()
    d = DynamicQuantumBTree(validate_params(B), counters)
    live = []
    insert_io = []
    violations = []
    for step in range(1, 10_001):
        if live and rng.random() < 0.01:
            d.delete(live.pop(rng.randrange(len(live))))
        p = KeyRecordPair(rng.randrange(10**12), step)
        before = counters.snapshot()
        d.insert(p)
        insert_io.append(counters.since(before).total_io())
        live.append(p)
        if step % 1000 == 0:
            violations.extend(d.check_forest_invariants().violations)
    n = len(live)
    c_insert = (sum(insert_io) / len(insert_io)) / math.log(n, B)
    d.flush_buffer()
    data = make_dataset(live)
    keys = [p.key for p in data.pairs]
    mismatches = 0
    worst_att = Fraction(0)
    bound = 8 * B * ceil_log(n, B)
    for _ in range(100):
        a = rng.randrange(n)
        b = min(n - 1, a + rng.randrange(max(1, n // 10)))
        r = make_range(keys[a], keys[b])
        res = d.dynamic_query(r, Analytic())
        if res.support() != set(data.filter(r)) or not res.uniform:
            mismatches += 1
        worst_att = max(worst_att, res.attempts)
    ok = not violations and c_insert <= 20 and mismatches == 0 and worst_att <= bound
    report("dynamic workload", ok,
           f"{len(violations)} invariant violations, insert c={c_insert:.2f} (<=20), "
           f"{mismatches} oracle mismatches, max attempts {float(worst_att):.2f} "
           f"(<= 8B*ceil(log_B N) = {bound})")


def test_deletion_fixtures():
    t = example_tree().tree
    a = t.delete(KeyRecordPair(6, 6))
    ok_a = a and a[0][:3] == ("borrow", 1, 2) and a[0][3] == 6 and check_balance(t).ok
    t = example_tree().tree
    b = t.delete(KeyRecordPair(27, 27))
    ok_b = b and b[0][0] == "rebuild" and check_balance(t).ok
    report("deletion fixtures", bool(ok_a and ok_b), f"delete 6 -> {a}; delete 27 -> {b}")


def test_range_tree_2d():
    start = time.perf_counter()
    rng = random.Random(5150)
    violations = 0
    worst = 0.0
    by_k = []
    for i in range(500):
        B = (4, 8, 16)[i % 3]
        n = rng.randint(1, 256)
        side = rng.choice([8, 32, 1000])
        pts = {(rng.randrange(side), rng.randrange(side)) for _ in range(n)}
        data = make_dataset(KeyRecordPair(p, j) for j, p in enumerate(sorted(pts)))
        xs = sorted(rng.randrange(-1, side + 1) for _ in range(2))
        ys = sorted(rng.randrange(-1, side + 1) for _ in range(2))
        r = make_range((xs[0], ys[0]), (xs[1], ys[1]))
        t = build_rtree(data, validate_params(B), counters=IoCounters())
        res = md_query(t, r, Analytic())
        expected = set(data.filter(r))
        if res.support() != expected or not res.uniform:
            violations += 1
        worst = max(worst, float(res.io) / (B * (ceil_log(len(data), B) + 1) ** 2))
        before = t.counters.snapshot()
        classical_range_tree_query(t, r)
        by_k.append((len(expected), t.counters.since(before).total_io()))
    elapsed = time.perf_counter() - start
    by_k.sort()
    quarter = len(by_k) // 4
    low = sum(io for _, io in by_k[:quarter]) / quarter
    high = sum(io for _, io in by_k[-quarter:]) / quarter
    ok = violations == 0 and worst <= 10 and high > low and elapsed < 120
    report("range tree d=2", ok,
           f"{violations} violations, max quantum io / (B(ceil(log_B N)+1)^2) = {worst:.2f} (<=10), "
           f"classical mean IO {low:.1f} (lowest-k quarter) vs {high:.1f} (highest-k quarter), "
           f"{elapsed:.1f}s")


def test_determinism(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"run{i}.csv"
        subprocess.run([sys.executable, "-m", "qbtree.cli", "bench", "--mode", "static",
                        "--n", "2048,8192", "--b", "16", "--selectivity", "0.01,0.05",
                        "--queries", "50", "--seed", "42", "--eval", "analytic",
                        "--out", str(path)], check=True)
        outs.append(path.read_bytes())
    report("determinism", outs[0] == outs[1] and len(outs[0]) > 0,
           f"two runs, {len(outs[0])} bytes each, identical={outs[0] == outs[1]}")


if __name__ == "__main__":
    import pathlib
    import tempfile

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for fn in tests:
        try:
            if fn is test_determinism:
                fn(pathlib.Path(tempfile.mkdtemp()))
            else:
                fn()
        except AssertionError:
            pass
