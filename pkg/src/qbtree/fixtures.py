"""Small hand-laid trees used by the demo, the tests and ``verify``."""
from __future__ import annotations

from typing import List, Optional

from .core import KeyRecordPair, QueryRange, make_range, validate_params
from .metrics import IoCounters
from .qstate import FlaggedState, mark_in_range, weighted_init
from .quantum_btree import QuantumBPlusTree

# Keys above 21 are stand-ins; any four ascending keys keep the same shape.
EXAMPLE_LEAVES = [
    [[1, 2], [4, 6]],
    [[8, 10], [13], [16, 19, 21]],
    [[25, 27], [33, 36]],
]

EXAMPLE_QUERY = (5, 11)


def _pairs(keys: List[int]) -> List[KeyRecordPair]:
    return [KeyRecordPair(k, k) for k in keys]


def example_tree(counters: Optional[IoCounters] = None) -> QuantumBPlusTree:
    """The 14-pair, B=4 tree of the worked example (root 0, nodes 1-3, leaves 4-10)."""
    nested = [[_pairs(leaf) for leaf in node] for node in EXAMPLE_LEAVES]
    return QuantumBPlusTree.from_nested(nested, validate_params(4), counters)


def example_query() -> QueryRange:
    return make_range(*EXAMPLE_QUERY)


MICRO_VALUES = (0, 1, 4, 7)
MICRO_RANGE = (2, 5)


def micro_fixture() -> FlaggedState:
    """Uniform superposition over four values, flagged against [2, 5]."""
    state = weighted_init((KeyRecordPair(v, i), 1) for i, v in enumerate(MICRO_VALUES))
    return mark_in_range(state, make_range(*MICRO_RANGE))
