"""Size-biased sampling and ordering of finite multisets and partitions.

Outputs report *positions* in the input, never bare values, so that orderings
of multisets with repeated values stay distinguishable.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetExceeded, EmptyInput, SpecError

SBO_MAX_ELEMENTS = 9


@dataclass(frozen=True)
class GenerationPartition:
    """A partition of ``{0, ..., size - 1}`` into non-empty blocks.

    Blocks are kept in the order given; :meth:`sorted_by_least` returns the
    canonical order.
    """

    blocks: tuple[frozenset, ...]
    size: int

    def __post_init__(self):
        blocks = tuple(frozenset(int(v) for v in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        seen: set = set()
        for b in blocks:
            if not b:
                raise SpecError("partition blocks must be non-empty")
            if seen & b:
                raise SpecError("partition blocks must be disjoint")
            seen |= b
        if seen != set(range(self.size)):
            raise SpecError(f"blocks do not cover range({self.size})")

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]]) -> GenerationPartition:
        blocks = [frozenset(b) for b in blocks]
        return cls(tuple(blocks), sum(len(b) for b in blocks))

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> GenerationPartition:
        """Partition of positions by equal label, blocks ordered by least element."""
        groups: dict = {}
        for i, lab in enumerate(np.asarray(labels).tolist()):
            groups.setdefault(lab, []).append(i)
        return cls(tuple(frozenset(g) for g in groups.values()), len(labels))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def sorted_by_least(self) -> tuple[frozenset, ...]:
        return tuple(sorted(self.blocks, key=min))

    def __len__(self):
        return len(self.blocks)


def _as_partition(p) -> GenerationPartition:
    return p if isinstance(p, GenerationPartition) else GenerationPartition.from_blocks(p)


def size_biased_sample(values: Sequence[float], rng: np.random.Generator) -> int:
    """Position of a size-biased draw from ``values``.

    Position ``i`` is chosen with probability ``values[i] / sum(values)``.
    When every value is zero the position is uniform (the drawn value is 0).
    """
    w = np.asarray(values, dtype=float)
    if w.size == 0:
        raise EmptyInput("cannot sample from an empty multiset")
    if np.any(w < 0):
        raise ValueError("values must be non-negative")
    total = w.sum()
    if total <= 0:
        return int(rng.integers(w.size))
    return int(rng.choice(w.size, p=w / total))


def size_biased_order_discovery(p, rng: np.random.Generator) -> tuple[frozenset, ...]:
    """Order blocks by first discovery when the underlying set is sampled
    uniformly without replacement."""
    p = _as_partition(p)
    order = rng.permutation(p.size)
    return discovery_order(p, order)


def discovery_order(p: GenerationPartition, order: Sequence[int]) -> tuple[frozenset, ...]:
    """Blocks of ``p`` in the order first hit by the sequence ``order``."""
    block_of = {}
    for b in p.blocks:
        for v in b:
            block_of[v] = b
    out: list[frozenset] = []
    found: set = set()
    for u in order:
        b = block_of[int(u)]
        if b not in found:
            found.add(b)
            out.append(b)
            if len(out) == len(p.blocks):
                break
    return tuple(out)


def size_biased_order_scramble(p, rng: np.random.Generator) -> tuple[frozenset, ...]:
    """Scramble the underlying set onto ``0..n-1``, sort the images of the
    blocks by least element and return their pre-images."""
    p = _as_partition(p)
    sigma = rng.permutation(p.size)
    return scramble_order(p, sigma)


def scramble_order(p: GenerationPartition, sigma: Sequence[int]) -> tuple[frozenset, ...]:
    sigma = np.asarray(sigma)
    return tuple(sorted(p.blocks, key=lambda b: min(int(sigma[v]) for v in b)))


def exact_sbo_distribution(sizes: Sequence) -> dict[tuple[int, ...], Fraction]:
    """Exact law of a size-biased ordering of ``sizes``, keyed by position tuples.

    Sequential product of ``x_i / (remaining total)``; once the remaining total
    is zero the rest of the order is uniform.
    """
    vals = [Fraction(v) for v in sizes]
    if len(vals) > SBO_MAX_ELEMENTS:
        raise BudgetExceeded(f"at most {SBO_MAX_ELEMENTS} elements, got {len(vals)}")
    if not vals:
        raise EmptyInput("empty multiset")
    out = {}
    for order in itertools.permutations(range(len(vals))):
        prob = Fraction(1)
        remaining = sum(vals)
        for j, i in enumerate(order):
            if remaining == 0:
                prob /= math.factorial(len(vals) - j)
                break
            prob *= vals[i] / remaining
            remaining -= vals[i]
        if prob:
            out[order] = prob
    return out


def ordered_sizes_law(law: dict, sizes: Sequence) -> dict[tuple, Fraction]:
    """Collapse a law over position orderings to a law over value sequences."""
    out: dict = defaultdict(Fraction)
    for order, prob in law.items():
        out[tuple(sizes[i] for i in order)] += prob
    return dict(out)


def exact_algorithm_distribution(p, method: str = "discovery") -> dict[tuple[frozenset, ...], Fraction]:
    """Exact output law of either ordering algorithm, enumerating its internal
    permutation."""
    p = _as_partition(p)
    if p.size > SBO_MAX_ELEMENTS:
        raise BudgetExceeded(f"at most {SBO_MAX_ELEMENTS} elements, got {p.size}")
    fn = {"discovery": discovery_order, "scramble": scramble_order}[method]
    out: dict = defaultdict(Fraction)
    w = Fraction(1, math.factorial(p.size))
    for perm in itertools.permutations(range(p.size)):
        out[fn(p, perm)] += w
    return dict(out)


def block_order_law(p) -> dict[tuple[frozenset, ...], Fraction]:
    """Exact size-biased ordering law of the blocks of ``p`` (by block)."""
    p = _as_partition(p)
    law = exact_sbo_distribution(p.sizes)
    return {tuple(p.blocks[i] for i in order): prob for order, prob in law.items()}
