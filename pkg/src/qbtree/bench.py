"""Dataset ingestion, query generation and the experiment driver."""
from __future__ import annotations

import csv
import io
import math
import random
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

from .btree import WeightBalancedTree
from .core import (
    Dataset,
    KeyRecordPair,
    QBTreeError,
    QueryRange,
    make_dataset,
    make_range,
    validate_params,
)
from .dynamic import DynamicQuantumBTree
from .metrics import IoCounters
from .qstate import Analytic, Mode, Stochastic
from .quantum_btree import QuantumBPlusTree
from .range_tree import build_rtree, classical_range_tree_query, md_query

MODES = ("static", "dynamic", "range2d")
EVALS = ("analytic", "stochastic")
KEY_MODES = ("timestamp", "location2d")

CSV_FIELDS = ("structure", "N", "B", "selectivity", "mean_query_io", "mean_attempts",
              "mean_insert_io", "mean_delete_io", "seed")

DYNAMIC_DELETE_CHANCE = 0.01


class ParseError(QBTreeError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "static"
    N: int = 4096
    B: int = 16
    selectivity: float = 0.05
    query_count: int = 100
    seed: int = 0
    dataset_path: Optional[str] = None
    eval: str = "analytic"
    key_mode: str = "timestamp"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.eval not in EVALS:
            raise ValueError(f"eval must be one of {EVALS}")
        if self.key_mode not in KEY_MODES:
            raise ValueError(f"key mode must be one of {KEY_MODES}")
        if not 0 < self.selectivity <= 1:
            raise ValueError("selectivity must lie in (0, 1]")
        if self.query_count < 1:
            raise ValueError("query count must be at least 1")
        if self.N < 1:
            raise ValueError("N must be positive")
        validate_params(self.B)


@dataclass
class ResultRow:
    structure: str
    N: int
    B: int
    selectivity: float
    mean_query_io: float
    mean_attempts: Optional[float]
    mean_insert_io: Optional[float]
    mean_delete_io: Optional[float]
    seed: int

    def as_csv(self) -> dict:
        def fmt(x):
            return "" if x is None else f"{float(x):.6f}"

        return {
            "structure": self.structure,
            "N": self.N,
            "B": self.B,
            "selectivity": f"{self.selectivity:g}",
            "mean_query_io": fmt(self.mean_query_io),
            "mean_attempts": fmt(self.mean_attempts),
            "mean_insert_io": fmt(self.mean_insert_io),
            "mean_delete_io": fmt(self.mean_delete_io),
            "seed": self.seed,
        }


# -- data ---------------------------------------------------------------------

def _epoch(text: str) -> int:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def ingest_checkins(path, key_mode: str = "timestamp", n: Optional[int] = None,
                    seed: int = 0) -> Dataset:
    """Read a tab-separated check-in file: user, ISO time, lat, lon, location id.

    The record handle is the 1-based line number. With ``n`` set, a seeded
    uniform subset of that many records is kept.
    """
    if key_mode not in KEY_MODES:
        raise ValueError(f"key mode must be one of {KEY_MODES}")
    pairs: List[KeyRecordPair] = []
    with open(Path(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ParseError(lineno, f"expected 5 tab-separated fields, got {len(fields)}")
            try:
                if key_mode == "timestamp":
                    key = _epoch(fields[1])
                else:
                    key = (round(float(fields[2]) * 10**4), round(float(fields[3]) * 10**4))
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            pairs.append(KeyRecordPair(key, lineno))
    if n is not None:
        if n > len(pairs):
            warnings.warn(f"requested {n} records but the file holds {len(pairs)}; using all")
        else:
            pairs = random.Random(seed).sample(pairs, n)
    return make_dataset(pairs)


def synthetic_dataset(n: int, seed: int, dims: int = 1) -> Dataset:
    """n distinct uniform keys from a domain 16x larger than n (per dimension for 2-D)."""
    rng = random.Random(seed)
    if dims == 1:
        keys = rng.sample(range(16 * n), n)
        return make_dataset(KeyRecordPair(k, i) for i, k in enumerate(keys))
    span = 16 * max(1, math.isqrt(n)) + 16
    pts = set()
    while len(pts) < n:
        pts.add(tuple(rng.randrange(span) for _ in range(dims)))
    return make_dataset(KeyRecordPair(k, i) for i, k in enumerate(sorted(pts)))


def _window(values: Sequence[int], width: int, rng: random.Random):
    start = rng.randrange(len(values) - width + 1)
    return values[start], values[start + width - 1]


def gen_queries(d: Dataset, selectivity: float, count: int, seed: int) -> List[QueryRange]:
    """Random windows of ceil(selectivity * N) consecutive ranks.

    2-D datasets get an independent window of ceil(sqrt(selectivity) * N)
    ranks per coordinate.
    """
    rng = random.Random(seed)
    n = len(d)
    if d.dims == 1:
        keys = [p.key for p in d.pairs]
        width = min(n, math.ceil(selectivity * n))
        return [make_range(*_window(keys, width, rng)) for _ in range(count)]
    axes = [sorted(p.key[i] for p in d.pairs) for i in range(d.dims)]
    width = min(n, math.ceil(math.sqrt(selectivity) * n))
    out = []
    for _ in range(count):
        bounds = [_window(axis, width, rng) for axis in axes]
        out.append(make_range(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds)))
    return out


# -- experiments --------------------------------------------------------------

def _mode(cfg: ExperimentConfig, salt: int) -> Mode:
    if cfg.eval == "analytic":
        return Analytic()
    return Stochastic(random.Random(cfg.seed * 1_000_003 + salt))


def _mean(xs) -> Optional[float]:
    xs = list(xs)
    return float(sum(xs, Fraction(0)) / len(xs)) if xs else None


def load_data(cfg: ExperimentConfig) -> Dataset:
    dims = 2 if cfg.mode == "range2d" else 1
    if cfg.dataset_path:
        if (cfg.key_mode == "location2d") != (dims == 2):
            raise ValueError(f"mode {cfg.mode} cannot use key mode {cfg.key_mode}")
        return ingest_checkins(cfg.dataset_path, cfg.key_mode, cfg.N, cfg.seed)
    return synthetic_dataset(cfg.N, cfg.seed, dims)


def run_experiment(cfg: ExperimentConfig, data: Optional[Dataset] = None) -> List[ResultRow]:
    data = data if data is not None else load_data(cfg)
    runner = {"static": _run_static, "dynamic": _run_dynamic, "range2d": _run_range2d}[cfg.mode]
    return runner(cfg, data)


def _row(cfg, n, structure, q_io, attempts=None, ins=None, dele=None) -> ResultRow:
    return ResultRow(structure, n, cfg.B, cfg.selectivity, q_io, attempts, ins, dele, cfg.seed)


def _run_static(cfg: ExperimentConfig, data: Dataset) -> List[ResultRow]:
    params = validate_params(cfg.B)
    queries = gen_queries(data, cfg.selectivity, cfg.query_count, cfg.seed)
    qt = QuantumBPlusTree.build(data, params, IoCounters())
    ct = WeightBalancedTree.bulk_load(data, params, IoCounters())
    q_io, q_att, c_io = [], [], []
    for i, r in enumerate(queries):
        res = qt.query(r, _mode(cfg, i))
        q_io.append(res.io)
        q_att.append(res.attempts)
        before = ct.counters.snapshot()
        ct.classical_range_query(r)
        c_io.append(ct.counters.since(before).total_io())
    n = len(data)
    return [_row(cfg, n, "quantum_btree", _mean(q_io), _mean(q_att)),
            _row(cfg, n, "classical_btree", _mean(c_io))]


def _run_dynamic(cfg: ExperimentConfig, data: Dataset) -> List[ResultRow]:
    params = validate_params(cfg.B)
    rng = random.Random(cfg.seed)
    order = list(data.pairs)
    rng.shuffle(order)
    qd = DynamicQuantumBTree(params)
    cd = DynamicQuantumBTree(params, quantum=False)
    stats = {id(qd): ([], []), id(cd): ([], [])}
    live: List[KeyRecordPair] = []
    for p in order:
        victim = None
        if live and rng.random() < DYNAMIC_DELETE_CHANCE:
            victim = live.pop(rng.randrange(len(live)))
        live.append(p)
        for t in (qd, cd):
            ins, dels = stats[id(t)]
            before = t.counters.snapshot()
            t.insert(p)
            ins.append(t.counters.since(before).total_io())
            if victim is not None:
                before = t.counters.snapshot()
                t.delete(victim)
                dels.append(t.counters.since(before).total_io())
    qd.flush_buffer()
    cd.flush_buffer()
    current = make_dataset(live)
    queries = gen_queries(current, cfg.selectivity, cfg.query_count, cfg.seed)
    q_io, q_att, c_io = [], [], []
    for i, r in enumerate(queries):
        res = qd.dynamic_query(r, _mode(cfg, i))
        q_io.append(res.io)
        q_att.append(res.attempts)
        before = cd.counters.snapshot()
        cd.classical_query(r)
        c_io.append(cd.counters.since(before).total_io())
    n = len(current)
    qi, qdl = stats[id(qd)]
    ci, cdl = stats[id(cd)]
    return [_row(cfg, n, "dynamic_quantum_btree", _mean(q_io), _mean(q_att), _mean(qi), _mean(qdl)),
            _row(cfg, n, "dynamic_classical_btree", _mean(c_io), None, _mean(ci), _mean(cdl))]


def _run_range2d(cfg: ExperimentConfig, data: Dataset) -> List[ResultRow]:
    params = validate_params(cfg.B)
    queries = gen_queries(data, cfg.selectivity, cfg.query_count, cfg.seed)
    t = build_rtree(data, params, counters=IoCounters())
    q_io, q_att, c_io = [], [], []
    for i, r in enumerate(queries):
        res = md_query(t, r, _mode(cfg, i))
        q_io.append(res.io)
        q_att.append(res.attempts)
        before = t.counters.snapshot()
        classical_range_tree_query(t, r)
        c_io.append(t.counters.since(before).total_io())
    n = len(data)
    return [_row(cfg, n, "quantum_range_tree", _mean(q_io), _mean(q_att)),
            _row(cfg, n, "classical_range_tree", _mean(c_io))]


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_csv())
    return buf.getvalue()
