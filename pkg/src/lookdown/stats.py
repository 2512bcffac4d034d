"""Descendant statistics, ancestral partitions, concentration and the
coalescent time scale."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import Genealogy, ModelSpec, sample, validate_spec
from .errors import InsufficientReps, OutOfRange, TooSmall
from .harness import EstimateWithCI, proportion_estimate, replicate_map
from .sbo import GenerationPartition
from .seeding import as_seed

INF = float("inf")


# ---------------------------------------------------------------------------
# descendant tables


@dataclass(frozen=True)
class DescendantTable:
    """Descendant statistics of the vertices of generation ``n``.

    Row ``j`` of ``counts``, ``frequencies`` and ``min_paths`` refers to
    generation ``n + j``.  ``min_paths`` holds the least 0-based index of a
    descendant, ``inf`` once the line is extinct.  ``extinction`` is the first
    generation without descendants; where descendants survive to the last
    stored generation of a capped spec it is ``inf`` and ``censored`` is set.
    """

    n: int
    counts: np.ndarray
    frequencies: np.ndarray
    min_paths: np.ndarray
    extinction: np.ndarray
    censored: np.ndarray

    @property
    def m_max(self) -> int:
        return self.n + self.counts.shape[0] - 1

    def row(self, m: int) -> int:
        if not self.n <= m <= self.m_max:
            raise OutOfRange(f"generation {m} outside [{self.n}, {self.m_max}]")
        return m - self.n

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "vertex", "count", "frequency", "min_path", "extinction", "censored"])
        for j in range(self.counts.shape[0]):
            for i in range(self.counts.shape[1]):
                mp = self.min_paths[j, i]
                w.writerow([
                    self.n + j, i + 1, int(self.counts[j, i]), repr(float(self.frequencies[j, i])),
                    "inf" if mp == INF else int(mp) + 1,
                    "inf" if self.extinction[i] == INF else int(self.extinction[i]),
                    int(self.censored[i]),
                ])
        return buf.getvalue()


def forward_ancestry(g: Genealogy, n: int, m_max: int):
    """Yield ``(m, anc)`` for ``m = n..m_max``, ``anc[w]`` being the ancestor in
    generation ``n`` of vertex ``w`` of generation ``m``."""
    anc = np.arange(g.X[n])
    yield n, anc
    for m in range(n, m_max):
        anc = anc[g.parents[m]]
        yield m + 1, anc


def descendant_table(g: Genealogy, n: int, m_max: int | None = None) -> DescendantTable:
    last = g.spec.last
    m_max = last if m_max is None else m_max
    if not 0 <= n <= m_max <= last:
        raise OutOfRange(f"need 0 <= n <= m_max <= {last}, got n={n}, m_max={m_max}")
    xn = g.X[n]
    counts, mins = [], []
    extinction = np.full(xn, INF)
    for m, anc in forward_ancestry(g, n, last):
        c = np.bincount(anc, minlength=xn)
        dead = (c == 0) & (extinction == INF)
        extinction[dead] = m
        if m <= m_max:
            mp = np.full(xn, INF)
            # first occurrence of each ancestor = least descendant index
            uniq, first = np.unique(anc, return_index=True)
            mp[uniq] = first
            counts.append(c)
            mins.append(mp)
    alive = extinction == INF
    if not g.spec.capped:
        extinction[alive] = last + 1
        censored = np.zeros(xn, dtype=bool)
    else:
        censored = alive
    counts = np.asarray(counts)
    sizes = np.asarray(g.X[n : m_max + 1], dtype=float)[:, None]
    return DescendantTable(n, counts, counts / sizes, np.asarray(mins), extinction, censored)


def frequencies(g: Genealogy, n: int, m: int) -> np.ndarray:
    """``x_m(v)`` for every ``v`` in generation ``n``."""
    return np.bincount(g.ancestors(n, m), minlength=g.X[n]) / g.X[m]


def ancestral_partition(g: Genealogy, n: int, m: int) -> GenerationPartition:
    """Partition of generation ``m`` into classes with a common ancestor in
    generation ``n``, blocks ordered by that ancestor's index."""
    if not 0 <= n < m <= g.spec.last:
        raise OutOfRange(f"need 0 <= n < m <= {g.spec.last}, got n={n}, m={m}")
    anc = g.ancestors(n, m)
    order = np.argsort(anc, kind="stable")
    bounds = np.cumsum(np.bincount(anc, minlength=g.X[n]))[:-1]
    blocks = [frozenset(b.tolist()) for b in np.split(order, bounds) if b.size]
    return GenerationPartition(tuple(blocks), g.X[m])


def block_sizes_by_ancestor(g: Genealogy, n: int, m: int) -> tuple[int, ...]:
    """``(X_m((n, i)))_i``, the descendant counts in vertex order."""
    return tuple(np.bincount(g.ancestors(n, m), minlength=g.X[n]).tolist())


# ---------------------------------------------------------------------------
# concentration


@dataclass(frozen=True)
class ConcentrationReport:
    """``value`` is the probability that a uniform pair of distinct elements
    lies in one block; ``biased_block_mean`` is the mean size of the block
    holding a uniform element; ``lower_bound`` is the bound from the number of
    blocks alone."""

    value: Fraction
    biased_block_mean: Fraction
    lower_bound: Fraction
    block_sizes: tuple[int, ...]
    size: int

    @property
    def bound_holds(self) -> bool:
        return self.value >= self.lower_bound


def concentration(p) -> ConcentrationReport:
    if not isinstance(p, GenerationPartition):
        p = GenerationPartition.from_blocks(p)
    a = p.size
    if a < 2:
        raise TooSmall(f"concentration needs at least 2 elements, got {a}")
    sizes = tuple(sorted(p.sizes, reverse=True))
    c = Fraction(sum(b * (b - 1) for b in sizes), a * (a - 1))
    # E|B_I| with I uniform: sum |B|^2 / |A|
    mean = Fraction(sum(b * b for b in sizes), a)
    bound = (Fraction(1, len(sizes)) - Fraction(1, a)) / (1 - Fraction(1, a))
    return ConcentrationReport(c, mean, bound, sizes, a)


def biased_block_mean_formula(c: Fraction, size: int) -> Fraction:
    """``1 + (|A| - 1) c``, the closed form for the size-biased block mean."""
    return 1 + (size - 1) * Fraction(c)


# ---------------------------------------------------------------------------
# coalescent time scale


@dataclass(frozen=True)
class CoalescentScale:
    """Per-step coalescence probabilities and their partial sums.

    ``t[n]`` sums ``s[:n]`` so ``t`` has one more entry than ``s``.  The
    truncated versions count only litters with at least two children.
    """

    s: tuple[Fraction, ...]
    t: tuple[Fraction, ...]
    s_trunc: tuple[Fraction, ...]
    t_trunc: tuple[Fraction, ...]
    L: tuple[int, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "s_n", "t_n", "s_n_trunc", "t_n_trunc"])
        for n in range(len(self.t)):
            s = _q(self.s[n]) if n < len(self.s) else ""
            so = _q(self.s_trunc[n]) if n < len(self.s_trunc) else ""
            w.writerow([n, s, _q(self.t[n]), so, _q(self.t_trunc[n])])
        return buf.getvalue()


def _q(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _pair_prob(num: int, x: int) -> Fraction:
    return Fraction(num, x * (x - 1)) if x > 1 else Fraction(0)


def _partial_sums(s: Sequence[Fraction]) -> tuple[Fraction, ...]:
    out = [Fraction(0)]
    for v in s:
        out.append(out[-1] + v)
    return tuple(out)


def coalescent_scale(spec) -> CoalescentScale:
    spec = validate_spec(spec)
    s, so, L = [], [], []
    for n in range(spec.last):
        k = spec.litters[n]
        x1 = spec.X[n + 1]
        s.append(_pair_prob(sum(v * (v - 1) for v in k), x1))
        ln = sum(1 for v in k if v >= 2)
        L.append(ln)
        so.append(_pair_prob(2 * ln, x1))
    return CoalescentScale(tuple(s), _partial_sums(s), tuple(so), _partial_sums(so), tuple(L))


def asynchronous_step(b: int, x_next: int) -> Fraction:
    """``s_n`` of an asynchronous step with big litter ``b``."""
    return _pair_prob(b * (b - 1), x_next)


def pairwise_coalescence_probability(spec, n: int, m: int) -> Fraction:
    """Probability that a uniform pair of distinct vertices of generation ``m``
    has a common ancestor in generation ``n``."""
    scale = spec if isinstance(spec, CoalescentScale) else coalescent_scale(spec)
    if not 0 <= n < m <= len(scale.s):
        raise OutOfRange(f"need 0 <= n < m <= {len(scale.s)}, got n={n}, m={m}")
    keep = Fraction(1)
    for j in range(n, m):
        keep *= 1 - scale.s[j]
    return 1 - keep


def expected_base_frequency(spec, n: int, m: int) -> Fraction:
    """Mean frequency of the base-path vertex of generation ``n`` in generation
    ``m`` under the lookdown."""
    spec = validate_spec(spec)
    inv = Fraction(1, spec.X[m])
    if m == n:
        return inv
    return inv + (1 - inv) * pairwise_coalescence_probability(spec, n, m)


def small_population_bound(spec, n: int) -> Fraction | None:
    """``1 / X_n**2`` when generation ``n`` has a litter of two or more, else None."""
    spec = validate_spec(spec)
    if max(spec.litters[n]) <= 1:
        return None
    return Fraction(1, spec.X[n] ** 2)


def truncate(spec: ModelSpec, last: int) -> ModelSpec:
    """The first ``last + 1`` generations of ``spec`` (marked capped when cut)."""
    if last >= spec.last:
        return spec
    return ModelSpec(spec.X[: last + 1], spec.litters[:last], True)


def _coalesced(spec: ModelSpec, n: int, m: int, sampler: str, seed) -> bool:
    g = sample(spec, seed, sampler)
    v, w = seed.child("pair").draw(None, lambda r: r.choice(spec.X[m], 2, replace=False))
    anc = g.ancestors(n, m)
    return bool(anc[v] == anc[w])


def monte_carlo_coalescence(
    spec, n: int, m: int, reps: int, seed, sampler: str = "forward", workers: int = 1
) -> EstimateWithCI:
    """Fraction of replicates in which a uniform pair of distinct vertices of
    generation ``m`` shares its ancestor in generation ``n``."""
    if reps < 100:
        raise InsufficientReps(f"need at least 100 replicates, got {reps}")
    spec = validate_spec(spec)
    if not 0 <= n < m <= spec.last:
        raise OutOfRange(f"need 0 <= n < m <= {spec.last}, got n={n}, m={m}")
    if spec.X[m] < 2:
        raise TooSmall(f"generation {m} has fewer than two vertices")
    seed = as_seed(seed)
    cut = truncate(spec, m)
    hits = replicate_map(_Coalesce(cut, n, m, sampler), seed.child("coalescence"), reps, workers)
    return proportion_estimate(sum(hits), reps, horizon=m, seed=seed.root)


@dataclass(frozen=True)
class _Coalesce:
    spec: ModelSpec
    n: int
    m: int
    sampler: str

    def __call__(self, seed) -> bool:
        return _coalesced(self.spec, self.n, self.m, self.sampler, seed)


def sibling_partition_check(g: Genealogy, n: int) -> bool:
    """Whether the sibling partition of generation ``n`` has concentration ``s_n``."""
    c = concentration(ancestral_partition(g, n, n + 1)).value
    return c == coalescent_scale(g.spec).s[n]
