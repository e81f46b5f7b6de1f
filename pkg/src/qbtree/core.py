"""Domain primitives shared by every structure in the package."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Tuple, Union

# Reserved maximum of the signed 64-bit domain. Unused child slots, unused
# pair slots and the dummy node all carry this value so they sort last.
DUMMY = 2**63 - 1
KEY_MIN = -(2**63)

Key = Union[int, Tuple[int, ...]]


class QBTreeError(ValueError):
    """Base class for every error raised by this package."""


class NotPowerOfTwo(QBTreeError):
    pass


class TooSmall(QBTreeError):
    pass


class DuplicatePair(QBTreeError):
    pass


class InvertedRange(QBTreeError):
    pass


class EmptyDataset(QBTreeError):
    pass


class InvalidKey(QBTreeError):
    pass


class KeyRecordPair(NamedTuple):
    key: Key
    rec: int


def coord(key: Key, dim: int) -> int:
    """Coordinate ``dim`` of a key; 1-D keys are plain ints."""
    if isinstance(key, tuple):
        return key[dim]
    return key


def key_dims(key: Key) -> int:
    return len(key) if isinstance(key, tuple) else 1


def check_key(key: Key) -> None:
    values = key if isinstance(key, tuple) else (key,)
    if not values:
        raise InvalidKey("empty key vector")
    for v in values:
        if not isinstance(v, int) or isinstance(v, bool):
            raise InvalidKey(f"key component {v!r} is not an integer")
        if not KEY_MIN <= v < DUMMY:
            raise InvalidKey(f"key component {v} outside the 64-bit key domain")


@dataclass(frozen=True)
class TreeParams:
    B: int
    n_b: int

    def capacity(self, height: int) -> int:
        """Slot capacity of a node of the given height, B^(height+1)."""
        return self.B ** (height + 1)


def validate_params(B: int) -> TreeParams:
    if B < 4:
        raise TooSmall(f"branching factor must be at least 4, got {B}")
    if B & (B - 1):
        raise NotPowerOfTwo(f"branching factor must be a power of two, got {B}")
    return TreeParams(B=B, n_b=B.bit_length() - 1)


@dataclass(frozen=True)
class QueryRange:
    """Inclusive range; for d-dimensional keys ``lo``/``hi`` are vectors."""

    lo: Key
    hi: Key

    @property
    def dims(self) -> int:
        return key_dims(self.lo)

    def bounds(self, dim: int = 0) -> Tuple[int, int]:
        return coord(self.lo, dim), coord(self.hi, dim)

    def contains(self, key: Key) -> bool:
        if isinstance(self.lo, tuple):
            return all(l <= k <= h for l, k, h in zip(self.lo, key, self.hi))
        return self.lo <= key <= self.hi

    def contains_coord(self, value: int, dim: int = 0) -> bool:
        lo, hi = self.bounds(dim)
        return lo <= value <= hi


def make_range(lo: Key, hi: Key) -> QueryRange:
    if key_dims(lo) != key_dims(hi):
        raise InvalidKey("range bounds have different dimensionality")
    if isinstance(lo, tuple):
        if any(l > h for l, h in zip(lo, hi)):
            raise InvertedRange(f"range {lo}..{hi} is inverted in some dimension")
    elif lo > hi:
        raise InvertedRange(f"range [{lo}, {hi}] has lo > hi")
    return QueryRange(lo, hi)


@dataclass(frozen=True)
class Dataset:
    pairs: Tuple[KeyRecordPair, ...] = ()

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def dims(self) -> int:
        return key_dims(self.pairs[0].key) if self.pairs else 1

    def filter(self, r: QueryRange) -> list[KeyRecordPair]:
        """Brute-force range filter; the oracle used throughout the tests."""
        return [p for p in self.pairs if r.contains(p.key)]


def make_dataset(pairs: Iterable[Union[KeyRecordPair, Sequence]]) -> Dataset:
    items = [KeyRecordPair(*p) for p in pairs]
    dims = None
    for p in items:
        check_key(p.key)
        d = key_dims(p.key)
        if dims is None:
            dims = d
        elif d != dims:
            raise InvalidKey("dataset mixes key dimensionalities")
    items.sort()
    for prev, cur in zip(items, items[1:]):
        if prev == cur:
            raise DuplicatePair(f"pair {cur} occurs twice")
    return Dataset(tuple(items))
