"""IO accounting.

One QRAM load or store is one IO, whatever the size of the superposition it
acts on. One classical node or page read/write is one IO. Post-selection
attempts are tallied separately and are not IOs themselves.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass
class IoCounters:
    qram_loads: int = 0
    qram_stores: int = 0
    classical_node_accesses: int = 0
    post_selection_attempts: int = 0

    def total_io(self) -> int:
        return self.qram_loads + self.qram_stores + self.classical_node_accesses

    def reset(self) -> "IoCounters":
        self.qram_loads = 0
        self.qram_stores = 0
        self.classical_node_accesses = 0
        self.post_selection_attempts = 0
        return self

    def snapshot(self) -> "IoCounters":
        return replace(self)

    def merge(self, other: "IoCounters") -> "IoCounters":
        self.qram_loads += other.qram_loads
        self.qram_stores += other.qram_stores
        self.classical_node_accesses += other.classical_node_accesses
        self.post_selection_attempts += other.post_selection_attempts
        return self

    def since(self, earlier: "IoCounters") -> "IoCounters":
        return IoCounters(
            self.qram_loads - earlier.qram_loads,
            self.qram_stores - earlier.qram_stores,
            self.classical_node_accesses - earlier.classical_node_accesses,
            self.post_selection_attempts - earlier.post_selection_attempts,
        )

    def as_dict(self) -> dict:
        return asdict(self)


def reset(counters: IoCounters) -> IoCounters:
    return counters.reset()


def snapshot(counters: IoCounters) -> IoCounters:
    return counters.snapshot()
