"""Statistical test harness: reports, estimates with confidence intervals,
exact and chi-square distribution comparisons, and the replicate map."""

from __future__ import annotations

import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import UnmatchedSupport
from .seeding import SeedSpec, as_seed

DEFAULT_ALPHA = 0.01
DEFAULT_Z = 3.89  # two-sided 1e-4
DEFAULT_REPS = 10_000


def _jsonable(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


@dataclass(frozen=True)
class TestReport:
    """Outcome of a statistical or exact test.

    Exact tests set ``kind="exact"`` and carry a rational ``statistic`` (the
    total variation distance) instead of a p-value.
    """

    __test__ = False  # not a pytest class

    test: str
    kind: str
    statistic: Any
    dof: int | None
    p_value: float | None
    decision: str
    alpha: float
    components: tuple = ()

    @property
    def passed(self) -> bool:
        return self.decision == "accept"

    @property
    def exact_equal(self) -> bool | None:
        return self.statistic == 0 if self.kind == "exact" else None

    def to_dict(self) -> dict:
        d = {
            "test": self.test,
            "kind": self.kind,
            "statistic": _jsonable(self.statistic),
            "dof": self.dof,
            "p_value": _jsonable(self.p_value),
            "decision": self.decision,
            "alpha": self.alpha,
        }
        if self.components:
            d["components"] = [c.to_dict() for c in self.components]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class EstimateWithCI:
    estimate: float
    se: float
    reps: int
    horizon: int | None = None
    seed: int | None = None
    z: float = DEFAULT_Z

    @property
    def half_width(self) -> float:
        return self.z * self.se

    @property
    def interval(self) -> tuple[float, float]:
        return self.estimate - self.half_width, self.estimate + self.half_width

    def within(self, value: float, n_se: float = 4.0) -> bool:
        """Whether ``value`` lies within ``n_se`` standard errors."""
        return abs(self.estimate - float(value)) <= n_se * self.se

    def to_dict(self) -> dict:
        return asdict(self)


def mean_estimate(values: Sequence[float], *, horizon=None, seed=None, z=DEFAULT_Z) -> EstimateWithCI:
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return EstimateWithCI(float(v.mean()), se, int(v.size), horizon, seed, z)


def proportion_estimate(successes: int, reps: int, *, horizon=None, seed=None, z=DEFAULT_Z) -> EstimateWithCI:
    """Normal-approximation estimate of a binomial proportion."""
    p = successes / reps
    return EstimateWithCI(p, math.sqrt(p * (1 - p) / reps), reps, horizon, seed, z)


# ---------------------------------------------------------------------------
# chi-square machinery


def _merge_small(expected: np.ndarray, columns: list[np.ndarray], minimum: float = 5.0):
    """Pool the cells with the smallest expected counts until every cell has
    expected count >= ``minimum`` (or a single cell is left)."""
    order = np.argsort(expected, kind="stable")
    keep = [i for i in order if expected[i] >= minimum]
    small = [i for i in order if expected[i] < minimum]
    merged_cols = [[c[i] for i in keep] for c in columns]
    merged_exp = [expected[i] for i in keep]
    if small:
        pooled = float(expected[small].sum())
        if pooled >= minimum or not keep:
            merged_exp.append(pooled)
            for mc, c in zip(merged_cols, columns):
                mc.append(c[small].sum())
        else:
            # fold the pooled remainder into the smallest kept cell
            merged_exp[0] += pooled
            for mc, c in zip(merged_cols, columns):
                mc[0] += c[small].sum()
    return np.asarray(merged_exp, dtype=float), [np.asarray(mc, dtype=float) for mc in merged_cols]


def chi_square_gof(
    counts: Mapping, probs: Mapping, alpha: float = DEFAULT_ALPHA, test: str = "chi-square goodness of fit"
) -> TestReport:
    """Goodness of fit of observed ``counts`` to the law ``probs``."""
    for k, c in counts.items():
        if c and not probs.get(k, 0):
            raise UnmatchedSupport(f"outcome {k!r} has probability zero under the reference law")
    keys = list(probs)
    n = sum(counts.values())
    obs = np.array([counts.get(k, 0) for k in keys], dtype=float)
    exp = np.array([float(probs[k]) * n for k in keys])
    exp, (obs,) = _merge_small(exp, [obs])
    if exp.size < 2:
        return TestReport(test, "chi-square", 0.0, 0, 1.0, "accept", alpha)
    exp *= obs.sum() / exp.sum()
    stat, p = stats.chisquare(obs, exp)
    return TestReport(test, "chi-square", float(stat), int(exp.size - 1), float(p), _decide(p, alpha), alpha)


def two_sample_chi_square(
    a: Mapping, b: Mapping, alpha: float = DEFAULT_ALPHA, test: str = "two-sample chi-square"
) -> TestReport:
    """Homogeneity test of two samples given as outcome counts, with pooled
    expected counts; cells with expected count below 5 are merged."""
    keys = sorted(set(a) | set(b), key=repr)
    ca = np.array([a.get(k, 0) for k in keys], dtype=float)
    cb = np.array([b.get(k, 0) for k in keys], dtype=float)
    na, nb = ca.sum(), cb.sum()
    pooled = ca + cb
    min_exp = pooled * min(na, nb) / (na + nb)
    _, (ca, cb) = _merge_small(min_exp, [ca, cb])
    if ca.size < 2:
        return TestReport(test, "chi-square", 0.0, 0, 1.0, "accept", alpha)
    stat, p, dof, _ = stats.chi2_contingency(np.vstack([ca, cb]), correction=False)
    return TestReport(test, "chi-square", float(stat), int(dof), float(p), _decide(p, alpha), alpha)


def _decide(p: float, alpha: float) -> str:
    return "reject" if p < alpha else "accept"


def total_variation(a: Mapping, b: Mapping):
    keys = set(a) | set(b)
    return sum(abs(a.get(k, 0) - b.get(k, 0)) for k in keys) / 2


def _is_law(x) -> bool:
    return isinstance(x, Mapping) and bool(x) and all(isinstance(v, Fraction) for v in x.values())


def _as_counts(x) -> Counter:
    if isinstance(x, Mapping):
        return Counter(dict(x))
    return Counter(x)


def distribution_equality_test(a, b, alpha: float = DEFAULT_ALPHA, test: str = "distribution equality") -> TestReport:
    """Compare two distributions, each either an exact law or a sample.

    * law vs law: exact rational comparison (statistic = total variation).
    * sample vs law: chi-square goodness of fit.
    * sample vs sample: two-sample chi-square.

    A law is a mapping with :class:`~fractions.Fraction` values; a sample is
    a mapping of outcome counts or an iterable of outcomes.
    """
    la, lb = _is_law(a), _is_law(b)
    if la and lb:
        tv = Fraction(total_variation(a, b))
        return TestReport(test, "exact", tv, None, None, "accept" if tv == 0 else "reject", alpha)
    if la or lb:
        law, sample = (a, b) if la else (b, a)
        return chi_square_gof(_as_counts(sample), law, alpha, test)
    return two_sample_chi_square(_as_counts(a), _as_counts(b), alpha, test)


# ---------------------------------------------------------------------------
# replicates


def replicate_map(
    fn: Callable[[SeedSpec], Any], seed, reps: int, workers: int = 1, chunksize: int | None = None
) -> list:
    """``[fn(seed.replicate(i)) for i in range(reps)]``, optionally in a process pool.

    Results are returned in replicate order whatever the number of workers.
    With ``workers > 1``, ``fn`` must be picklable.
    """
    seed = as_seed(seed)
    seeds = [seed.replicate(i) for i in range(reps)]
    if workers <= 1 or reps < 2:
        return [fn(s) for s in seeds]
    chunksize = chunksize or max(1, reps // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds, chunksize=chunksize))
