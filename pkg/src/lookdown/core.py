"""Model specifications, genealogies, the three neutral samplers and
canonical (unlabelled) forms.

Indexing convention
-------------------
Inside arrays everything is 0-based: vertex ``(n, i)`` of the 1-based
notation lives at ``parents[n - 1][i - 1]`` (its parent index) and at
position ``i - 1`` of any per-generation vector.  :class:`VertexRef` is the
only 1-based object and is used where a caller names a single vertex.

``Genealogy.parents[n]`` is an array of length ``X[n + 1]`` giving, for each
vertex of generation ``n + 1``, the index of its parent in generation ``n``.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    EmptyGeneration,
    OutOfRange,
    SizeMismatch,
    SpecError,
)
from .seeding import SeedSpec, as_seed

DEFAULT_BUDGET = 10**7
BUDGET_ENV = "LOOKDOWN_ENUM_BUDGET"

SAMPLERS = ("forward", "lookdown", "completely-neutral")


def enumeration_budget(budget: int | None = None) -> int:
    if budget is not None:
        return int(budget)
    return int(os.environ.get(BUDGET_ENV, DEFAULT_BUDGET))


class VertexRef(NamedTuple):
    """Vertex ``(generation, index)`` with a 1-based index."""

    generation: int
    index: int

    @property
    def position(self) -> int:
        return self.index - 1


# ---------------------------------------------------------------------------
# specifications


@dataclass(frozen=True)
class ModelSpec:
    """The deterministic skeleton ``(tau, X, k)`` of a neutral model.

    ``X[n]`` is the size of generation ``n`` and ``litters[n]`` the multiset of
    litter sizes of generation ``n`` (stored sorted, largest first).  When
    ``capped`` is true the model does not go extinct after the last stored
    generation; the data are a truncation of an infinite model at generation
    ``cap = len(X) - 1``.  Otherwise ``tau = len(X)``.
    """

    X: tuple[int, ...]
    litters: tuple[tuple[int, ...], ...]
    capped: bool = False

    @property
    def generations(self) -> int:
        return len(self.X)

    @property
    def last(self) -> int:
        return len(self.X) - 1

    @property
    def tau(self) -> int | None:
        return None if self.capped else len(self.X)

    def litter_array(self, n: int) -> np.ndarray:
        return np.asarray(self.litters[n], dtype=np.int64)

    def to_dict(self) -> dict:
        return {"X": list(self.X), "litters": [list(k) for k in self.litters], "capped": self.capped}


def validate_spec(raw) -> ModelSpec:
    """Check the consistency conditions and return the canonical spec.

    ``raw`` may be a :class:`ModelSpec`, a mapping with keys ``X``, ``litters``
    and optionally ``capped``, or an ``(X, litters)`` pair.
    """
    if isinstance(raw, ModelSpec):
        X, litters, capped = raw.X, raw.litters, raw.capped
    elif isinstance(raw, Mapping):
        X, litters, capped = raw["X"], raw.get("litters", ()), bool(raw.get("capped", False))
    else:
        X, litters = raw
        capped = False
    X = tuple(int(x) for x in X)
    litters = [tuple(int(k) for k in ks) for ks in litters]
    if not X:
        raise EmptyGeneration("a model needs at least one generation")
    for n, x in enumerate(X):
        if x < 1:
            raise EmptyGeneration(f"X[{n}] = {x}; every generation before tau must be non-empty")
    if len(litters) != len(X) - 1:
        raise SpecError(f"expected {len(X) - 1} litter vectors, got {len(litters)}")
    for n, ks in enumerate(litters):
        if len(ks) != X[n]:
            raise SpecError(f"litters[{n}] has {len(ks)} entries but X[{n}] = {X[n]}")
        if min(ks) < 0:
            raise SpecError(f"negative litter size in generation {n}")
        if sum(ks) != X[n + 1]:
            raise SizeMismatch(f"sum(litters[{n}]) = {sum(ks)} != X[{n + 1}] = {X[n + 1]}")
    canon = tuple(tuple(sorted(ks, reverse=True)) for ks in litters)
    return ModelSpec(X, canon, capped)


@dataclass(frozen=True)
class FamilySpec:
    """A parametric family of specs, expanded up to generation ``cap``.

    Kinds: ``explicit`` (``X``, ``litters``), ``asynchronous`` (``X0`` and
    ``b``: a list, a constant, or ``"double"`` for ``b_n = X_n + 1``),
    ``synchronous`` (``X0``, ``litter``: every individual has the same litter),
    ``moran`` (``N``) and ``gw`` (``pmf``; expanded by sampling).
    """

    kind: str
    params: Mapping = field(default_factory=dict)
    cap: int = 10

    def expand(self, seed=None) -> ModelSpec:
        p = self.params
        if self.kind == "explicit":
            return validate_spec({"X": p["X"], "litters": p["litters"], "capped": p.get("capped", False)})
        if self.kind == "moran":
            return moran(int(p["N"]), self.cap)
        if self.kind == "asynchronous":
            return asynchronous(int(p.get("X0", 1)), p["b"], self.cap)
        if self.kind == "synchronous":
            return synchronous(int(p.get("X0", 1)), int(p.get("litter", 2)), self.cap)
        if self.kind == "gw":
            from .gw import OffspringDistribution, sample_gw

            if seed is None:
                raise SpecError("a gw family needs a seed to be expanded")
            return sample_gw(OffspringDistribution.from_pmf(p["pmf"]), seed, self.cap).spec
        raise SpecError(f"unknown family kind {self.kind!r}")


def asynchronous(X0: int, b, cap: int) -> ModelSpec:
    """Expand an asynchronous family: one individual has ``b_n`` children and
    every other individual exactly one.  Stops early on extinction."""
    X = [X0]
    litters = []
    for n in range(cap):
        x = X[-1]
        if b == "double":
            bn = x + 1
        elif isinstance(b, (int, np.integer)):
            bn = int(b)
        else:
            bn = int(b[n])
        if bn == 1:
            raise SpecError(f"b[{n}] = 1 is excluded in an asynchronous model")
        if bn < 0:
            raise SpecError(f"b[{n}] must be non-negative")
        nxt = x + bn - 1
        if nxt == 0:
            return validate_spec({"X": X, "litters": litters, "capped": False})
        litters.append([bn] + [1] * (x - 1))
        X.append(nxt)
    return validate_spec({"X": X, "litters": litters, "capped": True})


def moran(N: int, cap: int) -> ModelSpec:
    """Constant size ``N``; each step one individual has two children and one
    has none."""
    if N < 2:
        raise SpecError("a Moran model needs N >= 2")
    k = [2] + [1] * (N - 2) + [0]
    return validate_spec({"X": [N] * (cap + 1), "litters": [k] * cap, "capped": True})


def synchronous(X0: int, litter: int, cap: int) -> ModelSpec:
    if litter < 1:
        raise SpecError("synchronous litter must be positive")
    X = [X0 * litter**n for n in range(cap + 1)]
    litters = [[litter] * X[n] for n in range(cap)]
    return validate_spec({"X": X, "litters": litters, "capped": True})


# ---------------------------------------------------------------------------
# genealogies


@dataclass(frozen=True, eq=False)
class Genealogy:
    """A layered forest stored as child-to-parent maps.

    The arrays are read-only; genealogies are safe to share between threads.
    """

    spec: ModelSpec
    parents: tuple[np.ndarray, ...]

    def __post_init__(self):
        arrays = tuple(_frozen(p) for p in self.parents)
        object.__setattr__(self, "parents", arrays)
        X = self.spec.X
        if len(arrays) != len(X) - 1:
            raise DimensionMismatch(f"expected {len(X) - 1} parent maps, got {len(arrays)}")
        for n, p in enumerate(arrays):
            if p.shape != (X[n + 1],):
                raise DimensionMismatch(f"parents[{n}] has shape {p.shape}, expected ({X[n + 1]},)")
            if p.size and (p.min() < 0 or p.max() >= X[n]):
                raise OutOfRange(f"parents[{n}] refers outside generation {n}")
            od = np.sort(np.bincount(p, minlength=X[n]))[::-1]
            if tuple(od.tolist()) != self.spec.litters[n]:
                raise SpecError(f"out-degrees of generation {n} are not a permutation of its litters")

    @classmethod
    def trusted(cls, spec: ModelSpec, parents: Sequence[np.ndarray]) -> Genealogy:
        """Build without re-checking the out-degree profile (sampler output)."""
        g = object.__new__(cls)
        object.__setattr__(g, "spec", spec)
        object.__setattr__(g, "parents", tuple(_frozen(p) for p in parents))
        return g

    @classmethod
    def from_key(cls, spec: ModelSpec, key) -> Genealogy:
        return cls.trusted(spec, [np.asarray(p, dtype=np.int64) for p in key])

    def key(self) -> tuple[tuple[int, ...], ...]:
        """Hashable form of the labelled graph."""
        return tuple(tuple(p.tolist()) for p in self.parents)

    def __eq__(self, other):
        if not isinstance(other, Genealogy):
            return NotImplemented
        return self.spec == other.spec and all(
            np.array_equal(a, b) for a, b in zip(self.parents, other.parents)
        )

    def __hash__(self):
        return hash((self.spec, self.key()))

    @property
    def X(self) -> tuple[int, ...]:
        return self.spec.X

    def offspring_counts(self, n: int) -> np.ndarray:
        """Out-degree vector ``K_n``."""
        return np.bincount(self.parents[n], minlength=self.X[n])

    def offspring(self, n: int) -> list[np.ndarray]:
        """Out-edge view: children of each vertex of generation ``n``."""
        p = self.parents[n]
        order = np.argsort(p, kind="stable")
        bounds = np.cumsum(np.bincount(p, minlength=self.X[n]))[:-1]
        return np.split(order, bounds)

    def parent(self, v: VertexRef) -> VertexRef:
        if v.generation < 1 or v.generation > self.spec.last:
            raise OutOfRange(f"{v} has no parent")
        return VertexRef(v.generation - 1, int(self.parents[v.generation - 1][v.position]) + 1)

    def ancestors(self, n: int, m: int) -> np.ndarray:
        """Index in generation ``n`` of the ancestor of each vertex of generation ``m``."""
        if not 0 <= n <= m <= self.spec.last:
            raise OutOfRange(f"need 0 <= n <= m <= {self.spec.last}, got n={n}, m={m}")
        anc = np.arange(self.X[m])
        for j in range(m - 1, n - 1, -1):
            anc = self.parents[j][anc]
        return anc


def _frozen(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    if a.flags.writeable:
        a = a.copy()
        a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# sampler kernels (shared by the random samplers and the exact enumerators)


def block_labels(litters: Sequence[int]) -> np.ndarray:
    """The fixed sibling partition ``xi``: block ``b`` holds a contiguous run of
    children, blocks taken in the order of the non-zero litters."""
    ks = [k for k in litters if k > 0]
    return np.repeat(np.arange(len(ks)), ks)


def forward_edges(litters: np.ndarray, perm) -> np.ndarray:
    """Parent map when vertex ``i`` receives litter ``litters[perm[i]]``,
    children placed in contiguous blocks."""
    K = litters[np.asarray(perm)]
    return np.repeat(np.arange(K.size), K)


def lookdown_edges(labels: np.ndarray, perm) -> np.ndarray:
    """Parent map of the lookdown step.

    ``perm`` plays the role of the inverse scramble: child ``c`` belongs to the
    block ``labels[perm[c]]``.  Blocks are handed to parents ``0, 1, ...`` in
    increasing order of their least child.
    """
    blk = labels[np.asarray(perm)]
    uniq, first = np.unique(blk, return_index=True)
    rank = np.empty(uniq.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(uniq.size)
    # np.unique returns sorted ids, so rank is indexable by block id directly
    return rank[blk]


def scramble_parents(parents: Sequence[np.ndarray], sigma: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Relabel edges: ``(v, w) -> (sigma(v), sigma(w))`` generation by generation."""
    out = []
    for n, p in enumerate(parents):
        q = np.empty_like(p)
        q[sigma[n + 1]] = sigma[n][p]
        out.append(q)
    return out


# ---------------------------------------------------------------------------
# samplers


def sample_forward(spec: ModelSpec, seed) -> Genealogy:
    """Forward neutral sampler: ``K_n = k_n o sigma_n`` with independent uniform
    ``sigma_n`` and children assigned in contiguous blocks."""
    seed = as_seed(seed).child("forward")
    parents = []
    for n in range(spec.last):
        k = spec.litter_array(n)
        parents.append(forward_edges(k, seed.permutation(n, spec.X[n])))
    return Genealogy.trusted(spec, parents)


def build_lookdown(spec: ModelSpec, seed) -> Genealogy:
    """Lookdown representation.

    Each generation the fixed sibling partition is scrambled by an independent
    uniform permutation and its blocks are assigned to parents in increasing
    order of least element, so ``(n+1, 1)`` is always a child of ``(n, 1)``.
    """
    seed = as_seed(seed).child("lookdown")
    parents = []
    for n in range(spec.last):
        labels = block_labels(spec.litters[n])
        parents.append(lookdown_edges(labels, seed.permutation(n, spec.X[n + 1])))
    return Genealogy.trusted(spec, parents)


def sample_completely_neutral(spec: ModelSpec, seed) -> Genealogy:
    """Completely neutral model, realized as a uniform scramble of the lookdown."""
    seed = as_seed(seed)
    g = build_lookdown(spec, seed.child("cn"))
    beta = uniform_permutations(spec, seed.child("cn", "beta"))
    return Genealogy.trusted(spec, scramble_parents(g.parents, beta))


def uniform_permutations(spec: ModelSpec, seed) -> tuple[np.ndarray, ...]:
    seed = as_seed(seed)
    return tuple(seed.permutation(n, x) for n, x in enumerate(spec.X))


def sample(spec: ModelSpec, seed, sampler: str = "forward") -> Genealogy:
    try:
        fn = _SAMPLER_FNS[sampler]
    except KeyError:
        raise ValueError(f"sampler must be one of {SAMPLERS}, got {sampler!r}") from None
    return fn(spec, seed)


_SAMPLER_FNS: dict[str, Callable[[ModelSpec, SeedSpec], Genealogy]] = {
    "forward": sample_forward,
    "lookdown": build_lookdown,
    "completely-neutral": sample_completely_neutral,
}


# ---------------------------------------------------------------------------
# canonical forms


@dataclass(frozen=True, order=True)
class CanonicalForest:
    """Isomorphism class of a genealogy under per-generation relabelling.

    ``encoding`` is the sorted tuple of the root trees' nested-parenthesis
    strings (leaf ``()``, internal node ``(`` + sorted children + ``)``).
    """

    encoding: tuple[str, ...]

    def __str__(self):
        return " ".join(self.encoding)


def subtree_encodings(X: Sequence[int], parents: Sequence[Sequence[int]], n: int = 0) -> list[str]:
    """Canonical string of the descendant subtree of every vertex of generation ``n``."""
    enc = ["()"] * X[-1]
    for g in range(len(X) - 2, n - 1, -1):
        kids: list[list[str]] = [[] for _ in range(X[g])]
        for j, p in enumerate(parents[g]):
            kids[p].append(enc[j])
        enc = ["(" + "".join(sorted(c)) + ")" for c in kids]
    return enc


def canonical_form(g: Genealogy) -> CanonicalForest:
    return CanonicalForest(tuple(sorted(subtree_encodings(g.X, g.key()))))


# ---------------------------------------------------------------------------
# exact enumeration


def _collapse(outcomes: Iterable) -> dict:
    counts = Counter(outcomes)
    total = sum(counts.values())
    return {k: Fraction(c, total) for k, c in counts.items()}


def _forward_generation_law(spec: ModelSpec, n: int) -> dict:
    k = spec.litter_array(n)
    return _collapse(tuple(forward_edges(k, perm).tolist()) for perm in itertools.permutations(range(spec.X[n])))


def _lookdown_generation_law(spec: ModelSpec, n: int) -> dict:
    labels = block_labels(spec.litters[n])
    return _collapse(
        tuple(lookdown_edges(labels, perm).tolist()) for perm in itertools.permutations(range(spec.X[n + 1]))
    )


def _product_law(laws: Sequence[Mapping]) -> dict:
    out = {(): Fraction(1)}
    for law in laws:
        out = {key + (e,): p * q for key, p in out.items() for e, q in law.items()}
    return out


def permutation_tuples(sizes: Sequence[int]) -> Iterator[tuple[np.ndarray, ...]]:
    """Every tuple of per-generation permutations, in lexicographic order."""
    per = [[np.array(p, dtype=np.int64) for p in itertools.permutations(range(x))] for x in sizes]
    return itertools.product(*per)


def exact_labelled_distribution(spec: ModelSpec, sampler: str = "forward", budget: int | None = None) -> dict:
    """Exact law of the labelled graph produced by ``sampler``.

    Returns a mapping from :meth:`Genealogy.key` tuples to :class:`Fraction`
    probabilities.  Every permutation draw of the sampler is enumerated with
    equal weight.
    """
    budget = enumeration_budget(budget)
    X = spec.X
    if sampler == "forward":
        cost = math.prod(math.factorial(x) for x in X[:-1])
        _check_budget(cost, budget)
        return _product_law([_forward_generation_law(spec, n) for n in range(spec.last)])
    if sampler == "lookdown":
        cost = math.prod(math.factorial(x) for x in X[1:])
        _check_budget(cost, budget)
        return _product_law([_lookdown_generation_law(spec, n) for n in range(spec.last)])
    if sampler == "completely-neutral":
        look = exact_labelled_distribution(spec, "lookdown", budget)
        n_beta = math.prod(math.factorial(x) for x in X)
        _check_budget(len(look) * n_beta, budget)
        w = Fraction(1, n_beta)
        acc: dict = defaultdict(Fraction)
        for key, p in look.items():
            arrays = [np.asarray(e, dtype=np.int64) for e in key]
            for beta in permutation_tuples(X):
                out = tuple(tuple(q.tolist()) for q in scramble_parents(arrays, beta))
                acc[out] += p * w
        return dict(acc)
    raise ValueError(f"sampler must be one of {SAMPLERS}, got {sampler!r}")


def _check_budget(cost: int, budget: int) -> None:
    if cost > budget:
        raise BudgetExceeded(f"enumeration needs {format_count(cost)} cases, budget is {budget}")


def format_count(n: int) -> str:
    """``n`` in full up to 12 digits, else as a power of ten."""
    digits = len(str(n))
    return str(n) if digits <= 12 else f"about 10^{digits - 1}"


def pushforward(law: Mapping, fn: Callable) -> dict:
    """Image of a discrete law under ``fn``."""
    out: dict = defaultdict(Fraction)
    for k, p in law.items():
        out[fn(k)] += p
    return dict(out)


def exact_unlabelled_distribution(spec: ModelSpec, sampler: str = "forward", budget: int | None = None) -> dict:
    """Exact law of :func:`canonical_form` under ``sampler``."""
    labelled = exact_labelled_distribution(spec, sampler, budget)
    return pushforward(labelled, lambda key: CanonicalForest(tuple(sorted(subtree_encodings(spec.X, key)))))


# ---------------------------------------------------------------------------
# serialization

FORMAT_HEADER = "lookdown-genealogy 1"


def dumps_genealogy(g: Genealogy, spine: Sequence[int] | None = None) -> str:
    """Flat text form: header, sizes, one line of 1-based parents per generation.

    A spinal tree adds an ``S`` line with the 1-based spine positions.
    """
    lines = [FORMAT_HEADER, "X " + " ".join(map(str, g.X)), f"capped {int(g.spec.capped)}"]
    for p in g.parents:
        lines.append("E " + " ".join(str(int(v) + 1) for v in p))
    if spine is not None:
        lines.append("S " + " ".join(str(int(v) + 1) for v in spine))
    return "\n".join(lines) + "\n"


def loads_genealogy(text: str) -> tuple[Genealogy, list[int] | None]:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != FORMAT_HEADER:
        raise ValueError(f"expected header {FORMAT_HEADER!r}")
    X: list[int] = []
    capped = False
    parents: list[np.ndarray] = []
    spine = None
    for ln in lines[1:]:
        tag, _, rest = ln.partition(" ")
        vals = [int(v) for v in rest.split()]
        if tag == "X":
            X = vals
        elif tag == "capped":
            capped = bool(vals[0])
        elif tag == "E":
            parents.append(np.asarray(vals, dtype=np.int64) - 1)
        elif tag == "S":
            spine = [v - 1 for v in vals]
        else:
            raise ValueError(f"unknown record {tag!r}")
    litters = [np.bincount(p, minlength=X[n]).tolist() for n, p in enumerate(parents)]
    spec = validate_spec({"X": X, "litters": litters, "capped": capped})
    return Genealogy(spec, parents), spine


def spec_from_document(doc: Mapping | str) -> tuple[ModelSpec | FamilySpec, int | None]:
    """Read a model-spec document ``{"family", "X", "litters", "cap"}``.

    Returns the spec (or family, for ``gw``) and the cap.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    fam = family_from_document(doc)
    if fam.kind == "gw":
        return fam, fam.cap
    return fam.expand(), fam.cap


def family_from_document(doc: Mapping) -> FamilySpec:
    cap = int(doc.get("cap", 10))
    fam = doc.get("family", "explicit")
    if isinstance(fam, Mapping):
        params = {k: v for k, v in fam.items() if k != "kind"}
        kind = fam.get("kind", "explicit")
    else:
        kind = fam
        params = {k: v for k, v in doc.items() if k not in ("family", "cap")}
    if kind == "explicit" and "X" not in params and "X" in doc:
        params.update(X=doc["X"], litters=doc.get("litters", []), capped=doc.get("capped", False))
    return FamilySpec(kind, params, cap)
