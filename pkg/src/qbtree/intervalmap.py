"""Integer interval map with range assignment."""
from __future__ import annotations

import bisect
import math
from typing import Any, Iterator, List, Optional, Tuple

from .metrics import IoCounters


class IntervalMap:
    """Maps integer ids to values through disjoint closed intervals.

    ``assign(lo, hi, v)`` overwrites every id in [lo, hi] in one operation,
    the way a lazily propagated range update would. Each assign or lookup is
    charged ceil(log2(intervals)) classical accesses (at least one).
    """

    def __init__(self, counters: Optional[IoCounters] = None):
        self._starts: List[int] = []
        self._ends: List[int] = []
        self._vals: List[Any] = []
        self.counters = counters

    def __len__(self) -> int:
        return len(self._starts)

    def __iter__(self) -> Iterator[Tuple[int, int, Any]]:
        return iter(zip(self._starts, self._ends, self._vals))

    def _charge(self) -> None:
        if self.counters is not None:
            self.counters.classical_node_accesses += max(1, math.ceil(math.log2(max(len(self), 1))))

    def get(self, key: int, default: Any = None) -> Any:
        self._charge()
        i = bisect.bisect_right(self._starts, key) - 1
        if i >= 0 and key <= self._ends[i]:
            return self._vals[i]
        return default

    def assign(self, lo: int, hi: int, value: Any) -> None:
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        self._charge()
        starts, ends, vals = self._starts, self._ends, self._vals
        i = bisect.bisect_right(starts, lo) - 1
        if i < 0 or ends[i] < lo:
            i += 1
        new: List[Tuple[int, int, Any]] = []
        j = i
        while j < len(starts) and starts[j] <= hi:
            if starts[j] < lo:
                new.append((starts[j], lo - 1, vals[j]))
            if ends[j] > hi:
                new.append((hi + 1, ends[j], vals[j]))
            j += 1
        pieces = [p for p in new if p[1] < lo] + [(lo, hi, value)] + [p for p in new if p[0] > hi]
        starts[i:j] = [p[0] for p in pieces]
        ends[i:j] = [p[1] for p in pieces]
        vals[i:j] = [p[2] for p in pieces]
        self._coalesce(max(i - 1, 0), min(i + len(pieces) + 1, len(starts)))

    def _coalesce(self, a: int, b: int) -> None:
        starts, ends, vals = self._starts, self._ends, self._vals
        k = a
        while k < min(b, len(starts)) - 1:
            if ends[k] + 1 == starts[k + 1] and vals[k] == vals[k + 1]:
                ends[k] = ends[k + 1]
                del starts[k + 1], ends[k + 1], vals[k + 1]
                b -= 1
            else:
                k += 1
