"""Galton-Watson trees, the spinal representation of the size-biased tree,
and the spine recovered as the preimage of the lookdown base path."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .core import Genealogy, ModelSpec, enumeration_budget, format_count, validate_spec
from .coupling import exact_coupling_distribution, lookdown_coupling
from .errors import BudgetExceeded, DegenerateMean, SpecError
from .seeding import as_seed

SPINE_LOOKDOWN_MAX_CAP = 4


@dataclass(frozen=True)
class OffspringDistribution:
    """Finite-support offspring law; ``pmf[k]`` is the probability of ``k`` children."""

    pmf: tuple[Fraction, ...]
    tail_exponent: float | None = None  # set for truncated heavy-tail stand-ins

    def __post_init__(self):
        pmf = tuple(Fraction(p) for p in self.pmf)
        while len(pmf) > 1 and pmf[-1] == 0:
            pmf = pmf[:-1]
        if not pmf or any(p < 0 for p in pmf):
            raise SpecError("pmf entries must be non-negative")
        if sum(pmf) != 1:
            raise SpecError(f"pmf sums to {sum(pmf)}, not 1")
        object.__setattr__(self, "pmf", pmf)

    @classmethod
    def from_pmf(cls, pmf: Sequence) -> OffspringDistribution:
        """Accepts numbers or rational strings such as ``"1/2"``."""
        return cls(tuple(Fraction(str(p)) if isinstance(p, float) else Fraction(p) for p in pmf))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, p in enumerate(self.pmf) if p)

    @property
    def mean(self) -> Fraction:
        return sum((k * p for k, p in enumerate(self.pmf)), Fraction(0))

    @property
    def size_biased_pmf(self) -> tuple[Fraction, ...]:
        mu = self.mean
        if mu == 0:
            raise DegenerateMean("size-biasing needs a positive mean")
        return tuple(k * p / mu for k, p in enumerate(self.pmf))

    @property
    def klogk(self) -> float:
        """``sum_k k log+(k) p_k``."""
        return float(sum(k * math.log(k) * float(p) for k, p in enumerate(self.pmf) if k > 1))

    def probabilities(self, biased: bool = False) -> np.ndarray:
        pmf = self.size_biased_pmf if biased else self.pmf
        w = np.array([float(p) for p in pmf])
        return w / w.sum()

    def cdf(self, biased: bool = False) -> np.ndarray:
        return _cdf(self, biased)


@lru_cache(maxsize=64)
def _cdf(d: OffspringDistribution, biased: bool) -> np.ndarray:
    c = np.cumsum(d.probabilities(biased))
    c[-1] = 1.0
    c.flags.writeable = False
    return c


def _draw(r: np.random.Generator, cdf: np.ndarray, size=None):
    """Inverse-CDF draws of litter sizes."""
    return np.searchsorted(cdf, r.random(size), side="right")


def truncated_heavy_tail(exponent: float, K: int, p0: Fraction = Fraction(0)) -> OffspringDistribution:
    """``p_k`` proportional to ``k**-exponent`` on ``1..K`` plus mass ``p0`` at 0.

    For ``exponent <= 2`` the untruncated sum ``sum k log k p_k`` diverges;
    any finite ``K`` is only an approximation of that regime.
    """
    w = [Fraction(0)] + [Fraction(1) / Fraction(k**exponent).limit_denominator(10**12) for k in range(1, K + 1)]
    total = sum(w)
    pmf = [Fraction(p0)] + [(1 - Fraction(p0)) * x / total for x in w[1:]]
    return OffspringDistribution(tuple(pmf), tail_exponent=exponent)


def _planar(K: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(K.size), K)


def _spec_from_litters(X: list[int], litters: list[np.ndarray], capped: bool) -> ModelSpec:
    return validate_spec({"X": X, "litters": [k.tolist() for k in litters], "capped": capped})


def sample_gw(d: OffspringDistribution, seed, cap: int) -> Genealogy:
    """Galton-Watson tree from one root, children in contiguous blocks.

    Stops at extinction (the spec is then uncapped) or at generation ``cap``.
    """
    seed = as_seed(seed).child("gw")
    cdf = d.cdf()
    X, litters, parents = [1], [], []
    for n in range(cap):
        K = seed.draw(n, lambda r: _draw(r, cdf, X[-1]))
        nxt = int(K.sum())
        if nxt == 0:
            return Genealogy.trusted(_spec_from_litters(X, litters, False), parents)
        litters.append(K)
        parents.append(_planar(K))
        X.append(nxt)
    return Genealogy.trusted(_spec_from_litters(X, litters, True), parents)


@dataclass(frozen=True)
class SpinalTree:
    """A tree with a distinguished root-to-cap path; ``spine[n]`` is a 0-based
    index into generation ``n``."""

    genealogy: Genealogy
    spine: tuple[int, ...]

    def __post_init__(self):
        g, sp = self.genealogy, self.spine
        if len(sp) != len(g.X):
            raise SpecError("the spine needs one vertex per generation")
        for n, p in enumerate(g.parents):
            if int(p[sp[n + 1]]) != sp[n]:
                raise SpecError(f"spine is not a path between generations {n} and {n + 1}")

    def key(self):
        return (self.genealogy.X, self.genealogy.key(), tuple(self.spine))


def sample_spinal(d: OffspringDistribution, seed, cap: int) -> SpinalTree:
    """Spinal representation: the spine vertex takes a size-biased litter, every
    other vertex an ordinary one, children laid out in contiguous blocks, and
    the next spine vertex is uniform among the spine's children."""
    plain = d.cdf()
    biased = d.cdf(biased=True)
    seed = as_seed(seed).child("spinal")
    X, litters, parents, spine = [1], [], [], [0]

    def step(r, x, g):
        K = _draw(r, plain, x)
        K[g] = _draw(r, biased)
        return K, int(r.integers(K[g]))

    for n in range(cap):
        K, offset = seed.draw(n, lambda r: step(r, X[-1], spine[-1]))
        start = int(K[: spine[-1]].sum())  # children of the spine occupy start..start+K-1
        litters.append(K)
        parents.append(_planar(K))
        X.append(int(K.sum()))
        spine.append(start + offset)
    return SpinalTree(Genealogy.trusted(_spec_from_litters(X, litters, True), parents), tuple(spine))


# ---------------------------------------------------------------------------
# exact laws


def _multisets(support: Sequence[int], pmf: Sequence[Fraction], x: int) -> Iterator[tuple[tuple[int, ...], Fraction]]:
    """Litter multisets of ``x`` i.i.d. draws, with their probabilities."""
    for combo in itertools.combinations_with_replacement(support, x):
        counts = defaultdict(int)
        for k in combo:
            counts[k] += 1
        w = Fraction(math.factorial(x), math.prod(math.factorial(c) for c in counts.values()))
        for k, c in counts.items():
            w *= pmf[k] ** c
        yield tuple(sorted(combo, reverse=True)), w


def exact_spec_law(d: OffspringDistribution, cap: int, size_biased: bool = False, budget: int | None = None) -> dict:
    """Law of the realized spec up to generation ``cap``.

    Keys are :class:`ModelSpec`.  With ``size_biased`` the law is reweighted by
    ``X_cap / mu**cap`` (extinct specs drop out).
    """
    budget = enumeration_budget(budget)
    support = d.support
    out: dict = {}
    frontier = [((1,), (), Fraction(1))]
    seen = 0
    for _ in range(cap):
        nxt = []
        for X, lit, p in frontier:
            if X[-1] == 0:
                nxt.append((X, lit, p))
                continue
            for ks, w in _multisets(support, d.pmf, X[-1]):
                nxt.append((X + (sum(ks),), lit + (ks,), p * w))
                seen += 1
                if seen > budget:
                    raise BudgetExceeded(f"spec enumeration exceeds budget {budget}")
        frontier = nxt
    mu = d.mean
    for X, lit, p in frontier:
        if X[-1] == 0:
            if size_biased:
                continue
            cut = X.index(0)
            spec = ModelSpec(X[:cut], lit[: cut - 1], False)
        else:
            spec = ModelSpec(X, lit, True)
        if size_biased:
            p = p * X[-1] / mu**cap
        out[spec] = out.get(spec, Fraction(0)) + p
    return out


def _check_cost(cost: int, budget: int):
    if cost > budget:
        raise BudgetExceeded(f"enumeration needs {format_count(cost)} cases, budget is {budget}")


def exact_gw_law(d: OffspringDistribution, cap: int, budget: int | None = None) -> dict:
    """Exact law of the planar tree from :func:`sample_gw`, keyed by ``(X, parents key)``."""
    budget = enumeration_budget(budget)
    support = d.support
    out: dict = defaultdict(Fraction)
    count = 0

    def rec(X, parents, p):
        nonlocal count
        if len(X) - 1 == cap:
            out[(tuple(X), tuple(parents))] += p
            return
        for K in itertools.product(support, repeat=X[-1]):
            count += 1
            _check_cost(count, budget)
            q = p * math.prod((d.pmf[k] for k in K), start=Fraction(1))
            total = sum(K)
            if total == 0:
                out[(tuple(X), tuple(parents))] += q
                continue
            rec(X + [total], parents + [tuple(_planar(np.array(K)).tolist())], q)

    rec([1], [], Fraction(1))
    return dict(out)


def exact_spinal_law(d: OffspringDistribution, cap: int, budget: int | None = None) -> dict:
    """Exact law of :func:`sample_spinal`, keyed by :meth:`SpinalTree.key`."""
    budget = enumeration_budget(budget)
    plain = d.pmf
    biased = d.size_biased_pmf
    sup, bsup = d.support, [k for k, p in enumerate(biased) if p]
    out: dict = defaultdict(Fraction)
    count = 0

    def rec(X, parents, spine, p):
        nonlocal count
        if len(X) - 1 == cap:
            out[(tuple(X), tuple(parents), tuple(spine))] += p
            return
        x, g = X[-1], spine[-1]
        for ks in itertools.product(bsup, itertools.product(sup, repeat=x - 1)):
            kstar, others = ks
            K = list(others[:g]) + [kstar] + list(others[g:])
            q = p * biased[kstar] * math.prod((plain[k] for k in others), start=Fraction(1))
            start = sum(K[:g])
            edges = tuple(_planar(np.array(K)).tolist())
            for off in range(kstar):
                count += 1
                _check_cost(count, budget)
                rec(X + [sum(K)], parents + [edges], spine + [start + off], q / kstar)

    rec([1], [], [0], Fraction(1))
    return dict(out)


def exact_spine_via_lookdown_law(d: OffspringDistribution, cap: int, budget: int | None = None) -> dict:
    """Exact law of :func:`spine_via_lookdown`, keyed like :func:`exact_spinal_law`."""
    if cap > SPINE_LOOKDOWN_MAX_CAP:
        raise BudgetExceeded(f"cap {cap} exceeds {SPINE_LOOKDOWN_MAX_CAP}")
    out: dict = defaultdict(Fraction)
    for spec, p in exact_spec_law(d, cap, size_biased=True, budget=budget).items():
        for pair, q in exact_coupling_distribution(spec, reduce=True, budget=budget):
            out[(spec.X, pair.forward.key(), pair.base_preimage())] += p * q
    return dict(out)


@lru_cache(maxsize=32)
def _size_biased_specs(d: OffspringDistribution, cap: int) -> tuple[tuple[ModelSpec, ...], np.ndarray]:
    law = exact_spec_law(d, cap, size_biased=True)
    specs = tuple(law)
    w = np.array([float(law[s]) for s in specs])
    return specs, w / w.sum()


def spine_via_lookdown(d: OffspringDistribution, seed, cap: int) -> SpinalTree:
    """Size-biased tree with its spine read off the lookdown coupling.

    The realized spec is drawn from the exact size-biased spec law, the
    forward tree and lookdown are coupled on it, and the spine is the forward
    preimage of the base path.
    """
    if cap > SPINE_LOOKDOWN_MAX_CAP:
        raise BudgetExceeded(f"cap {cap} exceeds {SPINE_LOOKDOWN_MAX_CAP}")
    if d.mean == 0:
        raise DegenerateMean("size-biasing needs a positive mean")
    seed = as_seed(seed)
    specs, w = _size_biased_specs(d, cap)
    idx = seed.child("sbgw").draw(None, lambda r: int(r.choice(len(specs), p=w)))
    pair = lookdown_coupling(specs[idx], seed)
    return SpinalTree(pair.forward, pair.base_preimage())


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class SpineDiagnostics:
    mean: Fraction
    klogk: float
    regime: str
    approximation: bool
    note: str

    def to_dict(self) -> dict:
        return {
            "mean": f"{self.mean.numerator}/{self.mean.denominator}",
            "klogk": self.klogk,
            "regime": self.regime,
            "approximation": self.approximation,
            "note": self.note,
        }


def spine_diagnostics(d: OffspringDistribution) -> SpineDiagnostics:
    """Predicted regime of the spine.

    ``fixation`` when the mean is at most 1; otherwise ``non-identifiable``
    since a finite support always gives a finite ``k log k`` sum.  The
    ``dominant-spine`` regime needs an infinite sum and cannot be reached.
    """
    mu = d.mean
    approx = d.tail_exponent is not None
    if mu <= 1:
        return SpineDiagnostics(mu, d.klogk, "fixation", approx, "off-spine subtrees die out")
    note = "dominant-spine regime unreachable at finite support"
    if approx:
        note += f"; truncated stand-in for tail exponent {d.tail_exponent}"
    return SpineDiagnostics(mu, d.klogk, "non-identifiable", approx, note)
