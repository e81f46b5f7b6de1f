"""Randomised invariant and oracle sweeps shared by the CLI and the tests."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List

from .btree import check_balance
from .core import KeyRecordPair, make_dataset, make_range, validate_params
from .dynamic import DynamicQuantumBTree
from .metrics import IoCounters
from .qstate import Analytic
from .quantum_btree import QuantumBPlusTree
from .range_tree import build_rtree, classical_range_tree_query, md_query


@dataclass
class SweepStats:
    instances: int = 0
    quantum: int = 0
    max_candidates: int = 0
    min_density: Fraction = Fraction(1)
    max_io_ratio: Fraction = Fraction(0)
    violations: List[str] = field(default_factory=list)


def random_instance(rng: random.Random, max_n: int = 512):
    n = rng.randint(1, max_n)
    span = rng.choice([2 * n, 8 * n, 10**6])
    keys = rng.sample(range(span), n)
    pairs = [KeyRecordPair(k, i) for i, k in enumerate(keys)]
    a, b = sorted(rng.randrange(-2, span + 2) for _ in range(2))
    return make_dataset(pairs), make_range(a, b)


def static_sweep(count: int, seed: int, Bs=(4, 8, 16), max_n: int = 512) -> SweepStats:
    """Oracle, candidate, density and IO-bound checks on random static instances."""
    rng = random.Random(seed)
    st = SweepStats()
    for i in range(count):
        B = Bs[i % len(Bs)]
        data, r = random_instance(rng, max_n)
        params = validate_params(B)
        t = QuantumBPlusTree.build(data, params, IoCounters())
        res = t.query(r, Analytic())
        expected = set(data.filter(r))
        tag = f"instance {i} (B={B}, N={len(data)}, range={r.lo}..{r.hi})"
        st.instances += 1
        if res.support() != expected:
            st.violations.append(f"{tag}: support differs from the oracle")
        if not res.uniform:
            st.violations.append(f"{tag}: weights not uniform")
        if res.kind == "superposition":
            st.quantum += 1
            st.max_candidates = max(st.max_candidates, len(res.candidates))
            if len(res.candidates) > 2:
                st.violations.append(f"{tag}: {len(res.candidates)} candidates")
            p = res.success_probability
            st.min_density = min(st.min_density, p)
            if p < Fraction(1, 8 * B):
                st.violations.append(f"{tag}: density {p} < 1/(8B)")
        levels = 0
        while B ** levels < len(data):
            levels += 1
        bound = 10 * B * (levels + 1)
        st.max_io_ratio = max(st.max_io_ratio, res.io / bound)
        if res.io > bound:
            st.violations.append(f"{tag}: io {res.io} > {bound}")
        bal = check_balance(t.tree)
        st.violations.extend(f"{tag}: {v}" for v in bal.violations)
    return st


def dynamic_sweep(ops: int, seed: int, B: int = 16, check_every: int = 1000,
                  queries: int = 100) -> SweepStats:
    rng = random.Random(seed)
    st = SweepStats()
    d = DynamicQuantumBTree(validate_params(B))
    live: List[KeyRecordPair] = []
    for step in range(1, ops + 1):
        if live and rng.random() < 0.01:
            d.delete(live.pop(rng.randrange(len(live))))
        p = KeyRecordPair(rng.randrange(10**9), step)
        live.append(p)
        d.insert(p)
        if step % check_every == 0:
            st.violations.extend(f"after {step} ops: {v}"
                                 for v in d.check_forest_invariants().violations)
    data = make_dataset(live)
    keys = [p.key for p in data.pairs]
    for i in range(queries):
        a, b = sorted(rng.randrange(len(keys)) for _ in range(2))
        r = make_range(keys[a], keys[b])
        res = d.dynamic_query(r, Analytic())
        st.instances += 1
        if res.kind == "superposition":
            st.quantum += 1
            st.max_candidates = max(st.max_candidates, len(res.candidates))
        if res.support() != set(data.filter(r)):
            st.violations.append(f"dynamic query {i}: support differs from the oracle")
        if not res.uniform:
            st.violations.append(f"dynamic query {i}: weights not uniform")
    return st


def range2d_sweep(count: int, seed: int, Bs=(4, 8, 16), max_n: int = 256) -> SweepStats:
    rng = random.Random(seed)
    st = SweepStats()
    for i in range(count):
        B = Bs[i % len(Bs)]
        n = rng.randint(1, max_n)
        side = rng.choice([8, 32, 1000])
        pts = {(rng.randrange(side), rng.randrange(side)) for _ in range(n)}
        data = make_dataset(KeyRecordPair(k, j) for j, k in enumerate(sorted(pts)))
        xs = sorted(rng.randrange(-1, side + 1) for _ in range(2))
        ys = sorted(rng.randrange(-1, side + 1) for _ in range(2))
        r = make_range((xs[0], ys[0]), (xs[1], ys[1]))
        t = build_rtree(data, validate_params(B), counters=IoCounters())
        res = md_query(t, r, Analytic())
        expected = set(data.filter(r))
        st.instances += 1
        tag = f"2-D instance {i} (B={B}, N={len(data)})"
        if res.support() != expected:
            st.violations.append(f"{tag}: support differs from the oracle")
        if not res.uniform:
            st.violations.append(f"{tag}: weights not uniform")
        if set(classical_range_tree_query(t, r)) != expected:
            st.violations.append(f"{tag}: classical range tree differs from the oracle")
        if res.kind == "superposition":
            st.quantum += 1
            st.max_candidates = max(st.max_candidates, len(res.candidates))
    return st
