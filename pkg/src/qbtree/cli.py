"""Command line entry point: ``qbtree bench | verify | demo``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from .bench import EVALS, KEY_MODES, MODES, ExperimentConfig, rows_to_csv, run_experiment
from .btree import check_balance
from .core import KeyRecordPair
from .fixtures import example_query, example_tree, micro_fixture
from .qstate import success_probability
from .verify import dynamic_sweep, range2d_sweep, static_sweep


def _int_list(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbtree", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run an IO benchmark and write CSV")
    bench.add_argument("--mode", choices=MODES, default="static")
    bench.add_argument("--n", type=_int_list, default=[4096],
                       help="dataset size; a comma list runs a sweep")
    bench.add_argument("--b", type=int, default=16)
    bench.add_argument("--selectivity", type=_float_list, default=[0.05],
                       help="fraction of ranks per query; a comma list runs a sweep")
    bench.add_argument("--queries", type=int, default=100)
    bench.add_argument("--seed", type=int, default=0)
    src = bench.add_mutually_exclusive_group()
    src.add_argument("--synthetic", action="store_true", help="uniform random keys (default)")
    src.add_argument("--dataset", metavar="PATH", help="tab-separated check-in file")
    bench.add_argument("--key-mode", choices=KEY_MODES, default=None,
                       help="defaults to location2d for range2d, timestamp otherwise")
    bench.add_argument("--eval", choices=EVALS, default="analytic")
    bench.add_argument("--out", metavar="FILE", help="CSV destination (stdout if omitted)")

    verify = sub.add_parser("verify", help="run invariant and oracle sweeps")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--instances", type=int, default=300)
    verify.add_argument("--ops", type=int, default=10_000)

    sub.add_parser("demo", help="walk through the worked example")
    return parser


def cmd_bench(args) -> int:
    key_mode = args.key_mode or ("location2d" if args.mode == "range2d" else "timestamp")
    rows = []
    for n in args.n:
        for sel in args.selectivity:
            cfg = ExperimentConfig(mode=args.mode, N=n, B=args.b, selectivity=sel,
                                   query_count=args.queries, seed=args.seed,
                                   dataset_path=args.dataset, eval=args.eval,
                                   key_mode=key_mode)
            rows.extend(run_experiment(cfg))
    text = rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify(args) -> int:
    failures = 0
    for name, stats in (
        ("static", static_sweep(args.instances, args.seed)),
        ("dynamic", dynamic_sweep(args.ops, args.seed)),
        ("range2d", range2d_sweep(args.instances, args.seed)),
    ):
        status = "ok" if not stats.violations else f"{len(stats.violations)} violations"
        print(f"{name}: {stats.instances} checked, {stats.quantum} quantum, {status}")
        for v in stats.violations[:20]:
            print(f"  {v}")
        failures += len(stats.violations)
    return 1 if failures else 0


def cmd_demo(args) -> int:
    t = example_tree()
    r = example_query()
    res = t.query(r)
    print(f"query [{r.lo}, {r.hi}] on the 14-pair tree with B=4")
    print(f"  candidates: {[n for n, _ in res.candidates]}")
    print(f"  success probability per attempt: {res.success_probability}")
    print(f"  result keys: {sorted(p.key for p in res.state.support())}")
    print(f"  expected IO: {res.io}")
    f = micro_fixture()
    print(f"post-selection over {{0,1,4,7}} for [2,5]: p = {success_probability(f)}, "
          f"result {sorted(p.key for p in f.in_state.support())}")
    for key in (6, 27):
        t = example_tree()
        actions = t.tree.delete(KeyRecordPair(key, key))
        ok = check_balance(t.tree).ok
        print(f"delete {key}: {actions}; balanced afterwards: {ok}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return {"bench": cmd_bench, "verify": cmd_verify, "demo": cmd_demo}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
