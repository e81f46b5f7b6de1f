"""Classical-write, quantum-read memory with metered access."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from .core import DUMMY, KeyRecordPair, QBTreeError
from .metrics import IoCounters


class EmptyState(QBTreeError):
    pass


@dataclass(frozen=True)
class Routing:
    """Routing range of a child, stored in the data QRAM for internal nodes."""

    lo: int
    hi: int


class Qram:
    """Address-indexed cells. Unwritten cells read as DUMMY.

    Addresses are ``node_id * B + slot``; the dummy node id maps to a block
    that is never written, so it reads back as DUMMY everywhere.
    """

    def __init__(self, counters: Optional[IoCounters] = None):
        self.cells: dict[int, Any] = {}
        self.counters = counters if counters is not None else IoCounters()

    def __getitem__(self, addr: int) -> Any:
        return self.cells.get(addr, DUMMY)

    def store(self, addr: int, val: Any) -> None:
        if val == DUMMY:
            self.cells.pop(addr, None)
        else:
            self.cells[addr] = val
        self.counters.qram_stores += 1

    def load_superposed(self, addrs):
        """Map a superposition of addresses to (address, value) pairs for one IO."""
        from .qstate import WeightedState

        if not addrs.entries:
            raise EmptyState("cannot load from an empty superposition")
        cells = self.cells
        out = {(a, cells.get(a, DUMMY)): w for a, w in addrs.entries.items()}
        self.counters.qram_loads += 1
        return WeightedState(out, addrs.total)

    def xor_load(self, addr: int, register: int) -> int:
        """Return ``register XOR encode(cell)``; applying it twice is the identity."""
        self.counters.qram_loads += 1
        return register ^ encode(self[addr])


def encode(val: Any) -> int:
    """Deterministic bit pattern for a cell value.

    The low two bits tag the variant (node id or DUMMY, pair, routing); the
    64-bit fields sit above them behind a leading 1 bit.
    """
    mask = (1 << 64) - 1
    if isinstance(val, KeyRecordPair):
        parts = val.key if isinstance(val.key, tuple) else (val.key,)
        bits = 1
        for part in (*parts, val.rec):
            bits = (bits << 64) | (part & mask)
        return bits << 2 | 1
    if isinstance(val, Routing):
        return (((1 << 64 | (val.lo & mask)) << 64 | (val.hi & mask)) << 2) | 2
    return (int(val) & mask) << 2
