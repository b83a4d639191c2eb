"""Multisets of objects with checked, non-negative counts."""
from __future__ import annotations

from typing import Iterable, Iterator, Mapping

MAX_COUNT = 2**64 - 1


class CountOverflowError(OverflowError):
    pass


class Multiset(Mapping[str, int]):
    """An immutable object -> count map.

    Zero counts are dropped on construction, so two multisets are equal
    exactly when they hold the same objects with the same multiplicities.
    Counts are capped at 2**64 - 1; exceeding the cap raises
    :class:`CountOverflowError` instead of wrapping.
    """

    __slots__ = ("_counts", "_hash")

    def __init__(self, counts: Mapping[str, int] | Iterable[str] = ()):
        if isinstance(counts, Mapping):
            items = counts.items()
        else:
            tally: dict[str, int] = {}
            for obj in counts:
                tally[obj] = tally.get(obj, 0) + 1
            items = tally.items()
        clean = {}
        for obj, n in items:
            if n < 0:
                raise ValueError(f"negative count {n} for object {obj!r}")
            _check(obj, n)
            if n:
                clean[obj] = n
        self._counts = clean
        self._hash = None

    @classmethod
    def _trusted(cls, counts: dict[str, int]) -> "Multiset":
        ms = cls.__new__(cls)
        ms._counts = counts
        ms._hash = None
        return ms

    def __getitem__(self, obj: str) -> int:
        return self._counts[obj]

    def get(self, obj, default=0):
        return self._counts.get(obj, default)

    def __iter__(self) -> Iterator[str]:
        return iter(self._counts)

    def __len__(self) -> int:
        return len(self._counts)

    def __eq__(self, other):
        if isinstance(other, Multiset):
            return self._counts == other._counts
        if isinstance(other, Mapping):
            return self._counts == {k: v for k, v in other.items() if v}
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._counts.items()))
        return self._hash

    def __repr__(self):
        body = ", ".join(f"{k!r}: {v}" for k, v in sorted(self._counts.items()))
        return f"Multiset({{{body}}})"

    def size(self) -> int:
        """Total number of object copies."""
        return sum(self._counts.values())

    def __add__(self, other: Mapping[str, int]) -> "Multiset":
        out = dict(self._counts)
        for obj, n in other.items():
            total = out.get(obj, 0) + n
            _check(obj, total)
            if total:
                out[obj] = total
        return Multiset._trusted(out)

    def __sub__(self, other: Mapping[str, int]) -> "Multiset":
        out = dict(self._counts)
        for obj, n in other.items():
            have = out.get(obj, 0)
            if n > have:
                raise ValueError(
                    f"cannot remove {n} x {obj!r} from multiset holding {have}"
                )
            if n == have:
                out.pop(obj, None)
            else:
                out[obj] = have - n
        return Multiset._trusted(out)

    def scale(self, k: int) -> "Multiset":
        if k < 0:
            raise ValueError("scale factor must be non-negative")
        out = {}
        for obj, n in self._counts.items():
            _check(obj, n * k)
            if k:
                out[obj] = n * k
        return Multiset._trusted(out)

    def contains(self, other: Mapping[str, int]) -> bool:
        return all(self._counts.get(obj, 0) >= n for obj, n in other.items())

    def multiplicity(self, other: Mapping[str, int]) -> int:
        """How many disjoint copies of ``other`` fit inside this multiset."""
        if not other:
            raise ValueError("multiplicity of an empty multiset is unbounded")
        return min(self._counts.get(obj, 0) // n for obj, n in other.items())

    def render(self, order: Iterable[str]) -> str:
        """Render as ``a d^3 e`` following ``order``; unknown objects go last, sorted."""
        order = list(order)
        known = set(order)
        seq = [o for o in order if o in self._counts]
        seq += sorted(o for o in self._counts if o not in known)
        return " ".join(o if self._counts[o] == 1 else f"{o}^{self._counts[o]}" for o in seq)

    @classmethod
    def parse(cls, tokens: Iterable[str]) -> "Multiset":
        """Inverse of :meth:`render` on a token sequence (``obj`` or ``obj^n``)."""
        counts: dict[str, int] = {}
        for tok in tokens:
            obj, sep, n = tok.partition("^")
            if not obj:
                raise ValueError(f"bad multiset token {tok!r}")
            if sep:
                if not n.isdigit() or int(n) < 1:
                    raise ValueError(f"bad multiplicity in {tok!r}")
                k = int(n)
            else:
                k = 1
            counts[obj] = counts.get(obj, 0) + k
        return cls(counts)


EMPTY = Multiset()


def _check(obj: str, n: int) -> None:
    if n > MAX_COUNT:
        raise CountOverflowError(f"count of {obj!r} exceeds 64-bit range")
