"""Plaintext reference answers for every protocol outcome.

These are the independent checks the protocol is verified against.  Nothing
here may import from the cryptographic modules.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .similarity import SimilarityFunction

__all__ = ["oracle_intersection", "oracle_weighted", "oracle_l1"]


def oracle_intersection(x: Iterable[int], y: Iterable[int]) -> int:
    """``|X ∩ Y|`` by direct enumeration."""
    return len(set(x) & set(y))


def oracle_weighted(x: Iterable[int], y: Iterable[int],
                    sim: SimilarityFunction) -> int:
    """The double similarity sum over ``X x Y``; absent pairs weigh zero."""
    return sum(sim.weight(a, b) for a in set(x) for b in set(y))


def oracle_l1(u: Sequence[int], v: Sequence[int]) -> int:
    """L1 distance of two equal-length nonnegative vectors."""
    if len(u) != len(v):
        raise ValueError(f"length mismatch: {len(u)} vs {len(v)}")
    return sum(abs(a - b) for a, b in zip(u, v))
