"""Identification probability, the dominance dichotomy, rank recovery and
fixation experiments."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import (
    FamilySpec,
    Genealogy,
    ModelSpec,
    VertexRef,
    block_labels,
    build_lookdown,
    enumeration_budget,
    exact_labelled_distribution,
    lookdown_edges,
    permutation_tuples,
    scramble_parents,
    validate_spec,
)
from .coupling import CoupledPair, lookdown_coupling
from .errors import BudgetExceeded, InsufficientReps, OutOfRange
from .harness import (  # noqa: F401  (re-exported)
    DEFAULT_REPS,
    DEFAULT_Z,
    EstimateWithCI,
    TestReport,
    distribution_equality_test,
    mean_estimate,
    replicate_map,
)
from .seeding import SeedSpec, as_seed
from .stats import coalescent_scale, truncate


# ---------------------------------------------------------------------------
# exact identification probability


def exact_identification_probability(spec, v: VertexRef, budget: int | None = None) -> Fraction:
    """Optimal probability of locating lookdown vertex ``v`` in the scrambled graph.

    Every (lookdown, scramble) pair is enumerated; the observed graph is the
    scrambled lookdown and the target is the image of ``v``.  The result is
    ``sum over observed graphs of max_w P(graph, image = w)``.
    """
    spec = validate_spec(spec)
    if not (0 <= v.generation <= spec.last and 1 <= v.index <= spec.X[v.generation]):
        raise OutOfRange(f"{v} is not a vertex of the spec")
    budget = enumeration_budget(budget)
    look = exact_labelled_distribution(spec, "lookdown", budget)
    n_beta = math.prod(math.factorial(x) for x in spec.X)
    if n_beta * len(look) > budget:
        raise BudgetExceeded(f"{n_beta * len(look)} cases exceed budget {budget}")
    joint: dict = defaultdict(lambda: defaultdict(Fraction))
    w = Fraction(1, n_beta)
    betas = list(permutation_tuples(spec.X))
    for key, p in look.items():
        arrays = [np.asarray(e, dtype=np.int64) for e in key]
        for beta in betas:
            obs = tuple(tuple(q.tolist()) for q in scramble_parents(arrays, beta))
            joint[obs][int(beta[v.generation][v.position])] += p * w
    return sum((max(post.values()) for post in joint.values()), Fraction(0))


def exact_expected_max_frequency(spec, n: int, m: int | None = None, budget: int | None = None) -> Fraction:
    """``E[max_v x_m(v)]`` over generation ``n`` under the lookdown, exactly."""
    spec = validate_spec(spec)
    m = spec.last if m is None else m
    look = exact_labelled_distribution(spec, "lookdown", budget)
    total = Fraction(0)
    for key, p in look.items():
        anc = np.arange(spec.X[m])
        for j in range(m - 1, n - 1, -1):
            anc = np.asarray(key[j])[anc]
        total += p * Fraction(int(np.bincount(anc).max()), spec.X[m])
    return total


# ---------------------------------------------------------------------------
# Monte Carlo identification of the base path


def _expand(model, seed: SeedSpec, horizon: int) -> ModelSpec:
    if isinstance(model, FamilySpec):
        fam = FamilySpec(model.kind, model.params, horizon)
        spec = fam.expand(seed.child("family")) if fam.kind == "gw" else fam.expand()
    else:
        spec = validate_spec(model)
    return truncate(spec, horizon)


def lookdown_ancestors(spec: ModelSpec, seed, n_grid: Sequence[int], horizon: int) -> dict[int, np.ndarray]:
    """Ancestors in each generation of ``n_grid`` of the vertices of ``horizon``
    in the lookdown drawn from ``seed`` (same streams as :func:`build_lookdown`)."""
    stream = as_seed(seed).child("lookdown")
    lo = min(n_grid)
    anc = np.arange(spec.X[horizon])
    out = {}
    if horizon in n_grid:
        out[horizon] = anc
    for j in range(horizon - 1, lo - 1, -1):
        labels = block_labels(spec.litters[j])
        anc = lookdown_edges(labels, stream.permutation(j, spec.X[j + 1]))[anc]
        if j in n_grid:
            out[j] = anc
    return out


@dataclass(frozen=True)
class _MaxFrequency:
    model: object
    n_grid: tuple[int, ...]
    horizon: int

    def __call__(self, seed: SeedSpec) -> tuple[float, ...]:
        spec = _expand(self.model, seed, self.horizon)
        M = min(self.horizon, spec.last)
        if any(n > M for n in self.n_grid):
            # extinct before generation n: nothing to identify
            return tuple(float("nan") for _ in self.n_grid)
        anc = lookdown_ancestors(spec, seed, self.n_grid, M)
        return tuple(np.bincount(anc[n]).max() / spec.X[M] for n in self.n_grid)


def estimate_base_identification(
    model, n: int, horizon: int, reps: int = DEFAULT_REPS, seed=0, workers: int = 1, z: float = DEFAULT_Z
) -> EstimateWithCI:
    """Monte Carlo ``E[max_v x_M(v)]`` over generation ``n`` of the lookdown,
    the finite-horizon proxy for the identification probability of the
    base-path vertex of generation ``n``."""
    if reps < 100:
        raise InsufficientReps(f"need at least 100 replicates, got {reps}")
    seed = as_seed(seed)
    vals = replicate_map(_MaxFrequency(model, (n,), horizon), seed, reps, workers)
    return mean_estimate([v[0] for v in vals], horizon=horizon, seed=seed.root, z=z)


@dataclass(frozen=True)
class DichotomyRow:
    n: int
    t_n: Fraction
    t_n_trunc: Fraction
    estimate: EstimateWithCI


@dataclass(frozen=True)
class DichotomyTable:
    rows: tuple[DichotomyRow, ...]
    horizon: int
    reps: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "t_n", "t_n_trunc", "rho_hat", "se"])
        for r in self.rows:
            w.writerow([r.n, _q(r.t_n), _q(r.t_n_trunc), repr(r.estimate.estimate), repr(r.estimate.se)])
        return buf.getvalue()

    def rho(self) -> list[float]:
        return [r.estimate.estimate for r in self.rows]


def _q(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def dichotomy_experiment(
    model, n_grid: Sequence[int], horizon: int, reps: int = DEFAULT_REPS, seed=0, workers: int = 1
) -> DichotomyTable:
    """Coalescent time scale and estimated base-path identification over a grid
    of generations; one lookdown per replicate serves every grid point."""
    if reps < 100:
        raise InsufficientReps(f"need at least 100 replicates, got {reps}")
    seed = as_seed(seed)
    grid = tuple(sorted(int(n) for n in n_grid))
    vals = np.array(replicate_map(_MaxFrequency(model, grid, horizon), seed, reps, workers), dtype=float)
    ref = _expand(model, seed.child("reference"), horizon)
    scale = coalescent_scale(ref)
    rows = []
    for j, n in enumerate(grid):
        col = vals[:, j]
        col = col[~np.isnan(col)]
        est = mean_estimate(col, horizon=horizon, seed=seed.root)
        t = scale.t[n] if n < len(scale.t) else scale.t[-1]
        to = scale.t_trunc[n] if n < len(scale.t_trunc) else scale.t_trunc[-1]
        rows.append(DichotomyRow(n, t, to, est))
    return DichotomyTable(tuple(rows), horizon, reps)


# ---------------------------------------------------------------------------
# extinction times, rank recovery, fixation


def extinction_times(g: Genealogy) -> list[np.ndarray]:
    """First generation without descendants, for every vertex.

    Lines alive at the last generation of a capped spec get ``inf``; in an
    uncapped spec they die at ``len(X)``.
    """
    last = g.spec.last
    tau = np.full(g.X[last], np.inf if g.spec.capped else float(last + 1))
    out = [tau]
    for n in range(last - 1, -1, -1):
        t = np.full(g.X[n], float(n + 1))
        np.maximum.at(t, g.parents[n], out[0])
        out.insert(0, t)
    return out


def tau_monotone(g: Genealogy) -> bool:
    """Whether extinction times are non-increasing in the index in every generation."""
    return all(bool(np.all(t[:-1] >= t[1:])) for t in extinction_times(g))


@dataclass(frozen=True)
class RankRecoveryReport:
    resolvable: tuple[int, ...]
    matched: tuple[int, ...]
    sizes: tuple[int, ...]
    monotone: bool

    @property
    def accuracy(self) -> float:
        r = sum(self.resolvable)
        return sum(self.matched) / r if r else float("nan")

    @property
    def resolvable_fraction(self) -> float:
        return sum(self.resolvable) / sum(self.sizes)

    def per_generation(self) -> list[tuple[int, int, int]]:
        return list(zip(self.sizes, self.resolvable, self.matched))


def infer_ranks(tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rank guess (0-based) by decreasing extinction time, and whether each
    guess is forced (its extinction time is unique in the generation)."""
    uniq, inv, counts = np.unique(-tau, return_inverse=True, return_counts=True)
    before = np.cumsum(counts) - counts
    return before[inv], counts[inv] == 1


def rank_recovery_by_extinction(pair: CoupledPair) -> RankRecoveryReport:
    """Recover lookdown ranks of the forward (scrambled) vertices from
    extinction times; ties, including censored lines, stay unresolved."""
    taus = extinction_times(pair.forward)
    res, hit, sizes = [], [], []
    for n, tau in enumerate(taus):
        guess, forced = infer_ranks(tau)
        truth = np.asarray(pair.sigma[n])
        res.append(int(forced.sum()))
        hit.append(int((forced & (guess == truth)).sum()))
        sizes.append(tau.size)
    return RankRecoveryReport(tuple(res), tuple(hit), tuple(sizes), tau_monotone(pair.lookdown))


@dataclass(frozen=True)
class _RankRecovery:
    spec: ModelSpec

    def __call__(self, seed: SeedSpec) -> RankRecoveryReport:
        return rank_recovery_by_extinction(lookdown_coupling(self.spec, seed))


def rank_recovery_experiment(spec, reps: int, seed=0, workers: int = 1) -> list[RankRecoveryReport]:
    """One rank-recovery report per coupled replicate."""
    return replicate_map(_RankRecovery(validate_spec(spec)), as_seed(seed), reps, workers)


def detect_fixation(g: Genealogy, n: int = 0) -> int | None:
    """Least stored generation ``m >= n`` in which at most one vertex of
    generation ``n`` still has descendants, or None if none by the last."""
    if not 0 <= n <= g.spec.last:
        raise OutOfRange(f"generation {n} outside the genealogy")
    if g.X[n] <= 1:
        return n
    anc = np.arange(g.X[n])
    for m in range(n, g.spec.last):
        anc = anc[g.parents[m]]
        if anc.size == 0 or np.all(anc == anc[0]):
            return m + 1
    return None


@dataclass(frozen=True)
class FixationSummary:
    events: int
    reps: int
    fixed_at: tuple = field(default_factory=tuple)
    base_path_fixed: bool = True

    @property
    def frequency(self) -> float:
        return self.events / self.reps


@dataclass(frozen=True)
class _Fixation:
    spec: ModelSpec
    n: int

    def __call__(self, seed: SeedSpec):
        g = build_lookdown(self.spec, seed)
        m = detect_fixation(g, self.n)
        survivor = None
        if m is not None and g.X[m] > 0:
            survivor = int(g.ancestors(self.n, m)[0])
        return m, survivor


def fixation_experiment(spec, n: int, reps: int, seed=0, workers: int = 1) -> FixationSummary:
    """Run lookdowns and count replicates in which generation ``n`` fixes."""
    spec = validate_spec(spec)
    out = replicate_map(_Fixation(spec, n), as_seed(seed), reps, workers)
    fixed = tuple(m for m, _ in out)
    events = sum(m is not None for m in fixed)
    base = all(s in (None, 0) for _, s in out)
    return FixationSummary(events, reps, fixed, base)
