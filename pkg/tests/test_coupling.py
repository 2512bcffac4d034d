import itertools
from collections import defaultdict
from fractions import Fraction

import numpy as np
import pytest

from lookdown import canonical_form, exact_labelled_distribution, lookdown_coupling, moran, sample_forward
from lookdown.core import Genealogy
from lookdown.coupling import (
    arrange,
    arrange_coupling,
    compose,
    exact_coupling_distribution,
    identity,
    invert,
    scramble,
    uniformity_diagnostic,
)
from lookdown.errors import DimensionMismatch, InsufficientSamples
from lookdown.seeding import SeedSpec


def perm_tuples(sizes):
    return itertools.product(*[[np.array(p) for p in itertools.permutations(range(x))] for x in sizes])


class TestScramble:
    def test_identity(self, spec233):
        g = sample_forward(spec233, 4)
        assert scramble(g, identity(spec233)) == g

    def test_inverse(self):
        spec = moran(5, 6)
        g = sample_forward(spec, 1)
        rng = np.random.default_rng(0)
        sigma = tuple(rng.permutation(x) for x in spec.X)
        assert scramble(scramble(g, sigma), invert(sigma)) == g
        assert all(np.array_equal(s, np.arange(len(s))) for s in compose(sigma, invert(sigma)))

    def test_canonical_invariant(self):
        spec = moran(5, 6)
        g = sample_forward(spec, 1)
        rng = np.random.default_rng(3)
        for _ in range(20):
            sigma = tuple(rng.permutation(x) for x in spec.X)
            assert canonical_form(scramble(g, sigma)) == canonical_form(g)

    def test_dimension_mismatch(self, spec233):
        g = sample_forward(spec233, 4)
        with pytest.raises(DimensionMismatch):
            scramble(g, identity(spec233)[:2])
        with pytest.raises(DimensionMismatch):
            scramble(g, (np.arange(2), np.arange(3), np.array([0, 0, 1])))


class TestArrange:
    def test_forward_target_law(self, spec233):
        # push the exact forward law through arrange: same law
        src = exact_labelled_distribution(spec233, "forward")
        out = defaultdict(Fraction)
        for key, p in src.items():
            _, g = arrange(Genealogy.from_key(spec233, key), None, "forward")
            out[g.key()] += p
        assert dict(out) == src

    def test_completely_neutral_target_law(self, spec233):
        # source randomness times every shuffle of the auxiliary stream
        src = exact_labelled_distribution(spec233, "forward")
        shuffles = list(perm_tuples(spec233.X[1:]))
        w = Fraction(1, len(shuffles))
        out = defaultdict(Fraction)
        for key, p in src.items():
            g = Genealogy.from_key(spec233, key)
            for sh in shuffles:
                alpha, h = arrange(g, sh, "completely-neutral")
                assert scramble(g, alpha) == h
                out[h.key()] += p * w
        assert dict(out) == exact_labelled_distribution(spec233, "completely-neutral")

    def test_arranged_is_relabelling(self):
        spec = moran(5, 8)
        g = sample_forward(spec, 11)
        alpha, h = arrange_coupling(g, SeedSpec(3), "completely-neutral")
        assert scramble(g, alpha) == h
        assert canonical_form(h) == canonical_form(g)

    def test_adapted(self):
        # alpha[:n+1] depends only on source generations before n
        spec = moran(4, 5)
        g = sample_forward(spec, 1)
        h = sample_forward(spec, 2)
        mixed = Genealogy.trusted(spec, list(g.parents[:2]) + list(h.parents[2:]))
        a1, _ = arrange_coupling(g, SeedSpec(8), "completely-neutral")
        a2, _ = arrange_coupling(mixed, SeedSpec(8), "completely-neutral")
        for n in range(3):
            assert np.array_equal(a1[n], a2[n])

    def test_unknown_target(self, spec233):
        with pytest.raises(ValueError):
            arrange(sample_forward(spec233, 1), None, "lookdown")


class TestLookdownCoupling:
    def test_consistency(self):
        spec = moran(5, 30)
        for seed in range(5):
            pair = lookdown_coupling(spec, seed)
            assert pair.check()
            assert all(p[0] == 0 for p in pair.lookdown.parents)
            assert all(np.all(np.diff(p) >= 0) for p in pair.forward.parents)

    def test_exact_marginals_and_sigma(self, spec233):
        law = list(exact_coupling_distribution(spec233, reduce=False))
        assert sum(p for _, p in law) == 1
        fwd, look = defaultdict(Fraction), defaultdict(Fraction)
        joint = defaultdict(Fraction)
        edge0 = defaultdict(Fraction)
        for pair, p in law:
            assert pair.check()
            fwd[pair.forward.key()] += p
            look[pair.lookdown.key()] += p
            e0 = pair.forward.key()[0]
            joint[(tuple(pair.sigma[1].tolist()), e0)] += p
            edge0[e0] += p
        assert dict(fwd) == exact_labelled_distribution(spec233, "forward")
        assert dict(look) == exact_labelled_distribution(spec233, "lookdown")
        # sigma_1 uniform over 3! and independent of the generation-0 forward edges
        for perm in itertools.permutations(range(3)):
            for e0, q in edge0.items():
                assert joint[(perm, e0)] == q / 6

    def test_reduced_enumeration_matches_full(self, spec233):
        def collect(reduce):
            out = defaultdict(Fraction)
            for pair, p in exact_coupling_distribution(spec233, reduce=reduce):
                out[(pair.forward.key(), pair.lookdown.key(), tuple(tuple(s.tolist()) for s in pair.sigma))] += p
            return dict(out)

        assert collect(True) == collect(False)

    def test_base_preimage_uniform(self, spec233):
        # given forward edges before n, the preimage of the base vertex is uniform
        for n in (1, 2):
            joint = defaultdict(Fraction)
            past = defaultdict(Fraction)
            for pair, p in exact_coupling_distribution(spec233):
                e = pair.forward.key()[:n]
                joint[(pair.base_preimage()[n], e)] += p
                past[e] += p
            for e, q in past.items():
                for v in range(spec233.X[n]):
                    assert joint[(v, e)] == q / spec233.X[n]

    def test_lookdown_blocks_sorted_by_least(self):
        pair = lookdown_coupling(moran(6, 15), 3)
        for p in pair.lookdown.parents:
            _, first = np.unique(p, return_index=True)
            assert np.all(np.diff(first) > 0)


def _summary(pair):
    # which generation-0 vertex has two children
    return int(np.argmax(pair.forward.offspring_counts(0)))


class TestDiagnostic:
    def test_coupling_passes(self):
        spec = moran(4, 2)
        root = SeedSpec(2024)
        samples = []
        for i in range(2000):
            pair = lookdown_coupling(spec, root.replicate(i))
            samples.append((pair.sigma[1], _summary(pair)))
        report = uniformity_diagnostic(samples)
        assert report.passed, report.to_json()
        assert {c.test for c in report.components} == {"sigma_n uniformity", "sigma_n independence of past"}
        assert report.components[0].dof == 23

    def test_identity_rejected(self):
        samples = [(np.arange(4), i % 4) for i in range(1000)]
        assert not uniformity_diagnostic(samples).passed

    def test_correlated_rejected(self):
        # sigma_1 taken from the forward sampler's own first-generation shuffle
        spec = moran(4, 2)
        root = SeedSpec(99)
        samples = []
        for i in range(2000):
            s = root.replicate(i)
            g = sample_forward(spec, s)
            shuffle = s.child("forward").permutation(0, 4)
            samples.append((shuffle, int(np.argmax(g.offspring_counts(0)))))
        report = uniformity_diagnostic(samples)
        uni, ind = report.components
        assert uni.passed
        assert not ind.passed

    def test_insufficient(self):
        with pytest.raises(InsufficientSamples):
            uniformity_diagnostic([(np.arange(3), 0)] * 10)
