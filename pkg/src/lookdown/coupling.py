"""Scrambling, arranging and the forward-backward (lookdown) coupling.

A generation permutation ``sigma`` is a tuple of index arrays, one per
generation, with ``sigma[n][i]`` the image of vertex ``i`` of generation
``n``.  Applying it to a genealogy relabels every edge ``(v, w)`` as
``(sigma(v), sigma(w))``.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

from .core import (
    Genealogy,
    ModelSpec,
    build_lookdown,
    enumeration_budget,
    exact_labelled_distribution,
    permutation_tuples,
    scramble_parents,
    uniform_permutations,
)
from .errors import BudgetExceeded, DimensionMismatch, InsufficientSamples
from .harness import DEFAULT_ALPHA, TestReport, _decide
from .seeding import SeedSpec, as_seed

GenerationPermutation = tuple  # tuple[np.ndarray, ...]

TARGETS = ("forward", "completely-neutral")


def identity(spec: ModelSpec) -> GenerationPermutation:
    return tuple(np.arange(x) for x in spec.X)


def compose(a: GenerationPermutation, b: GenerationPermutation) -> GenerationPermutation:
    """``a o b``: apply ``b`` first."""
    return tuple(np.asarray(an)[np.asarray(bn)] for an, bn in zip(a, b))


def invert(a: GenerationPermutation) -> GenerationPermutation:
    out = []
    for an in a:
        inv = np.empty(len(an), dtype=np.int64)
        inv[np.asarray(an)] = np.arange(len(an))
        out.append(inv)
    return tuple(out)


def scramble(g: Genealogy, sigma: Sequence) -> Genealogy:
    """Relabel ``g`` by ``sigma``; the unlabelled graph is unchanged."""
    if len(sigma) != len(g.X):
        raise DimensionMismatch(f"sigma covers {len(sigma)} generations, genealogy has {len(g.X)}")
    sigma = [np.asarray(s, dtype=np.int64) for s in sigma]
    for n, (s, x) in enumerate(zip(sigma, g.X)):
        if s.shape != (x,) or not np.array_equal(np.sort(s), np.arange(x)):
            raise DimensionMismatch(f"sigma[{n}] is not a permutation of range({x})")
    return Genealogy.trusted(g.spec, scramble_parents(g.parents, sigma))


# ---------------------------------------------------------------------------
# arranging


def arrange(
    source: Genealogy, shuffles: Sequence[np.ndarray] | None = None, target: str = "forward"
) -> tuple[GenerationPermutation, Genealogy]:
    """Relabel a forward neutral genealogy generation by generation so that it
    follows the ``target`` law.

    ``alpha[0]`` is the identity.  Given ``alpha[n]``, the arranged litter
    vector is ``K'(alpha_n(i)) = K(i)``; the children are then laid out by
    the target's conditional law given ``K'``: contiguous blocks for
    ``"forward"``, or contiguous blocks relabelled by ``shuffles[n]`` (a
    uniform permutation of the next generation) for ``"completely-neutral"``.
    The children of each source vertex, in increasing order, fill its image's
    slots in increasing order, which fixes ``alpha[n + 1]``.  ``alpha[n + 1]``
    therefore depends only on source generations ``< n + 1`` and on
    ``shuffles[:n + 1]``.
    """
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    if target == "completely-neutral" and shuffles is None:
        raise ValueError("the completely-neutral target needs one shuffle per generation")
    X = source.X
    alpha = [np.arange(X[0])]
    arranged = []
    for n, p in enumerate(source.parents):
        a = alpha[n]
        k_src = np.bincount(p, minlength=X[n])
        k_tgt = np.empty_like(k_src)
        k_tgt[a] = k_src
        planar = np.repeat(np.arange(X[n]), k_tgt)
        slot_label = np.arange(X[n + 1]) if target == "forward" else np.asarray(shuffles[n], dtype=np.int64)
        q = np.empty(X[n + 1], dtype=np.int64)
        q[slot_label] = planar
        order = np.argsort(p, kind="stable")
        src_start = np.cumsum(k_src) - k_src
        tgt_start = np.cumsum(k_tgt) - k_tgt
        owner = p[order]
        rank = np.arange(X[n + 1]) - src_start[owner]
        nxt = np.empty(X[n + 1], dtype=np.int64)
        nxt[order] = slot_label[tgt_start[a[owner]] + rank]
        alpha.append(nxt)
        arranged.append(q)
    return tuple(alpha), Genealogy.trusted(source.spec, arranged)


def arrange_coupling(
    source: Genealogy, aux, target: str = "forward"
) -> tuple[GenerationPermutation, Genealogy]:
    """:func:`arrange` with the auxiliary uniforms drawn from the ``aux``
    stream; generation ``n`` uses substream ``(aux, "arrange", n)``."""
    aux = as_seed(aux).child("arrange")
    shuffles = None
    if target == "completely-neutral":
        shuffles = [aux.permutation(n, x) for n, x in enumerate(source.X[1:])]
    return arrange(source, shuffles, target)


# ---------------------------------------------------------------------------
# lookdown coupling


@dataclass(frozen=True)
class CoupledPair:
    """A forward neutral genealogy and a lookdown with ``lookdown = sigma(forward)``."""

    forward: Genealogy
    lookdown: Genealogy
    sigma: GenerationPermutation

    def base_preimage(self) -> tuple[int, ...]:
        """``sigma_n^{-1}(first vertex)`` for every generation: the forward
        vertices that map onto the base path."""
        return tuple(int(np.flatnonzero(np.asarray(s) == 0)[0]) for s in self.sigma)

    def check(self) -> bool:
        return scramble(self.forward, self.sigma) == self.lookdown


def couple(lookdown: Genealogy, beta: Sequence[np.ndarray]) -> CoupledPair:
    """Scramble ``lookdown`` by ``beta``, arrange the result into the planar
    forward law and set ``sigma = (alpha o beta)^{-1}``."""
    beta = tuple(np.asarray(b, dtype=np.int64) for b in beta)
    scrambled = Genealogy.trusted(lookdown.spec, scramble_parents(lookdown.parents, beta))
    alpha, forward = arrange(scrambled, None, "forward")
    sigma = invert(compose(alpha, beta))
    return CoupledPair(forward, lookdown, sigma)


def lookdown_coupling(spec: ModelSpec, seed) -> CoupledPair:
    """Permutation coupling of the forward sampler and the lookdown in which
    each ``sigma_n`` is uniform and independent of forward generations
    before ``n``.

    Streams used: ``(seed, "coupling", "lookdown", n)`` for the lookdown and
    ``(seed, "coupling", "beta", n)`` for the scramble.
    """
    seed = as_seed(seed).child("coupling")
    lk = build_lookdown(spec, seed)
    beta = uniform_permutations(spec, seed.child("beta"))
    return couple(lk, beta)


def _litter_orderings(p: np.ndarray, n_parents: int) -> Iterator[tuple[np.ndarray, Fraction]]:
    """Representatives of the relative orders that a uniform permutation of a
    generation induces inside each litter, with their probabilities."""
    litters = [np.flatnonzero(p == q) for q in range(n_parents)]
    per = [list(itertools.permutations(kids.tolist())) for kids in litters]
    w = Fraction(1, math.prod(len(x) for x in per))
    for choice in itertools.product(*per):
        flat = [c for group in choice for c in group]
        beta = np.empty(len(p), dtype=np.int64)
        beta[flat] = np.arange(len(p))
        yield beta, w


def exact_coupling_distribution(
    spec: ModelSpec, reduce: bool = True, budget: int | None = None
) -> Iterator[tuple[CoupledPair, Fraction]]:
    """Every realization of :func:`lookdown_coupling` with its probability.

    With ``reduce=False`` all scramble tuples are enumerated.  With
    ``reduce=True`` only ``beta[0]`` is enumerated in full; for later
    generations one representative per pattern of within-litter relative
    orders is used, since the coupling depends on ``beta[n]`` only through
    those orders.  Both routes give the same law.
    """
    budget = enumeration_budget(budget)
    look = exact_labelled_distribution(spec, "lookdown", budget)
    X = spec.X
    if not reduce:
        n_beta = math.prod(math.factorial(x) for x in X)
        if n_beta * len(look) > budget:
            raise BudgetExceeded(f"{n_beta * len(look)} cases exceed budget {budget}")
        w = Fraction(1, n_beta)
        for key, p in look.items():
            lk = Genealogy.from_key(spec, key)
            for beta in permutation_tuples(X):
                yield couple(lk, beta), p * w
        return
    first = [np.array(b) for b in itertools.permutations(range(X[0]))]
    w0 = Fraction(1, len(first))
    for key, p in look.items():
        lk = Genealogy.from_key(spec, key)
        later = [list(_litter_orderings(lk.parents[n], X[n])) for n in range(spec.last)]
        cases = len(first) * math.prod(len(x) for x in later)
        if cases * len(look) > budget:
            raise BudgetExceeded(f"{cases * len(look)} cases exceed budget {budget}")
        for b0 in first:
            for rest in itertools.product(*later):
                beta = (b0,) + tuple(b for b, _ in rest)
                prob = p * w0 * math.prod((wt for _, wt in rest), start=Fraction(1))
                yield couple(lk, beta), prob


# ---------------------------------------------------------------------------
# diagnostics


def _perm_index(sigma) -> tuple[int, ...]:
    return tuple(int(v) for v in sigma)


def uniformity_diagnostic(samples: Sequence, alpha: float = DEFAULT_ALPHA, min_samples: int = 1000) -> TestReport:
    """Chi-square certificate that ``sigma_n`` is uniform and independent of a
    summary of earlier forward edges.

    ``samples`` is a sequence of ``(sigma_n, summary)`` pairs, ``summary``
    being any hashable discretization of the forward edges before ``n``.
    Only a single generation is tested; the coupling does not make
    ``(sigma_n)`` independent across generations.
    """
    if len(samples) < min_samples:
        raise InsufficientSamples(f"need at least {min_samples} samples, got {len(samples)}")
    perms = [_perm_index(s) for s, _ in samples]
    size = len(perms[0])
    counts = Counter(perms)
    cells = list(itertools.permutations(range(size)))
    obs = np.array([counts.get(c, 0) for c in cells], dtype=float)
    stat_u, p_u = stats.chisquare(obs)
    uni = TestReport(
        "sigma_n uniformity", "chi-square", float(stat_u), len(cells) - 1, float(p_u), _decide(p_u, alpha), alpha
    )

    summaries = [s for _, s in samples]
    rows = sorted(set(perms))
    cols = sorted(set(summaries), key=repr)
    if len(cols) < 2 or len(rows) < 2:
        ind = TestReport("sigma_n independence of past", "chi-square", 0.0, 0, 1.0, "accept", alpha)
    else:
        r_idx = {r: i for i, r in enumerate(rows)}
        c_idx = {c: j for j, c in enumerate(cols)}
        table = np.zeros((len(rows), len(cols)))
        for pm, sm in zip(perms, summaries):
            table[r_idx[pm], c_idx[sm]] += 1
        stat_i, p_i, dof_i, _ = stats.chi2_contingency(table, correction=False)
        ind = TestReport(
            "sigma_n independence of past", "chi-square", float(stat_i), int(dof_i), float(p_i),
            _decide(p_i, alpha), alpha,
        )
    decision = "accept" if uni.passed and ind.passed else "reject"
    p_min = min(uni.p_value, ind.p_value)
    return TestReport(
        "lookdown coupling uniformity", "chi-square", None, None, p_min, decision, alpha, (uni, ind)
    )
