from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_completely_neutral
from lookdown import (
    SAMPLERS,
    FamilySpec,
    Genealogy,
    VertexRef,
    asynchronous,
    build_lookdown,
    canonical_form,
    dumps_genealogy,
    exact_labelled_distribution,
    exact_unlabelled_distribution,
    loads_genealogy,
    moran,
    sample,
    sample_forward,
    synchronous,
    validate_spec,
)
from lookdown.core import spec_from_document
from lookdown.errors import (
    BudgetExceeded,
    DimensionMismatch,
    EmptyGeneration,
    OutOfRange,
    SizeMismatch,
    SpecError,
)


class TestValidateSpec:
    def test_moran_is_valid(self):
        spec = moran(4, 3)
        assert spec.X == (4, 4, 4, 4)
        assert spec.litters[0] == (2, 1, 1, 0)

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatch):
            validate_spec({"X": (2, 3), "litters": ((1, 1),)})

    def test_empty_generation(self):
        with pytest.raises(EmptyGeneration):
            validate_spec({"X": (2, 0), "litters": ((0, 0),)})

    def test_wrong_litter_count(self):
        with pytest.raises(SpecError):
            validate_spec({"X": (2, 2), "litters": ((2,),)})

    def test_litters_sorted(self):
        spec = validate_spec(((3, 3), ((0, 2, 1),)))
        assert spec.litters == ((2, 1, 0),)
        assert spec.tau == 2

    def test_asynchronous_rejects_b1(self):
        with pytest.raises(SpecError):
            asynchronous(3, [2, 1], 2)

    def test_asynchronous_growth(self):
        spec = asynchronous(3, 2, 2)
        assert spec.X == (3, 4, 5)
        assert spec.litters[0] == (2, 1, 1)

    def test_asynchronous_extinction_stops(self):
        spec = asynchronous(1, 0, 5)
        assert spec.X == (1,)
        assert spec.tau == 1

    def test_doubling_family(self):
        spec = asynchronous(1, "double", 6)
        assert spec.X == tuple(2**n for n in range(7))

    def test_synchronous(self):
        spec = synchronous(2, 2, 3)
        assert spec.X == (2, 4, 8, 16)

    def test_family_document(self):
        spec, cap = spec_from_document({"family": {"kind": "moran", "N": 5}, "cap": 7})
        assert spec.X == (5,) * 8 and cap == 7

    def test_explicit_document(self):
        spec, _ = spec_from_document({"X": [2, 3, 3], "litters": [[2, 1], [2, 1, 0]]})
        assert spec.X == (2, 3, 3)

    def test_unknown_family(self):
        with pytest.raises(SpecError):
            FamilySpec("nope").expand()


class TestGenealogy:
    def test_rejects_wrong_degrees(self, spec233):
        with pytest.raises(SpecError):
            Genealogy(spec233, [np.array([0, 1, 0]), np.array([0, 1, 2])])

    def test_rejects_bad_shape(self, spec233):
        with pytest.raises(DimensionMismatch):
            Genealogy(spec233, [np.array([0, 1])])

    def test_rejects_out_of_range(self, spec233):
        with pytest.raises(OutOfRange):
            Genealogy(spec233, [np.array([0, 0, 5]), np.array([0, 0, 1])])

    def test_arrays_read_only(self, spec233):
        g = sample_forward(spec233, 1)
        with pytest.raises(ValueError):
            g.parents[0][0] = 1

    def test_parent_and_ancestors(self, spec233):
        g = Genealogy(spec233, [np.array([0, 0, 1]), np.array([2, 0, 0])])
        assert g.parent(VertexRef(2, 1)) == VertexRef(1, 3)
        assert g.ancestors(0, 2).tolist() == [1, 0, 0]
        with pytest.raises(OutOfRange):
            g.parent(VertexRef(0, 1))

    def test_offspring(self, spec233):
        g = Genealogy(spec233, [np.array([0, 0, 1]), np.array([2, 0, 0])])
        assert [c.tolist() for c in g.offspring(1)] == [[1, 2], [], [0]]
        assert g.offspring_counts(0).tolist() == [2, 1]


class TestSamplers:
    @pytest.mark.parametrize("sampler", SAMPLERS)
    def test_degree_profile(self, sampler):
        spec = moran(6, 20)
        g = sample(spec, 3, sampler)
        Genealogy(spec, g.parents)  # full validation

    def test_reproducible(self, spec233):
        a = sample(spec233, 42, "completely-neutral")
        b = sample(spec233, 42, "completely-neutral")
        assert a == b

    def test_lookdown_base_path(self):
        g = build_lookdown(moran(5, 30), 9)
        assert all(p[0] == 0 for p in g.parents)

    def test_unknown_sampler(self, spec233):
        with pytest.raises(ValueError):
            sample(spec233, 1, "backward")


class TestExactLaws:
    def test_forward_two_children(self):
        # X=(2,2), k=(2,0): each vertex takes both children with probability 1/2
        spec = validate_spec({"X": (2, 2), "litters": ((2, 0),)})
        law = exact_labelled_distribution(spec, "forward")
        assert law == {((0, 0),): Fraction(1, 2), ((1, 1),): Fraction(1, 2)}

    def test_lookdown_first_parent(self):
        spec = validate_spec({"X": (2, 3), "litters": ((2, 1),)})
        law = exact_labelled_distribution(spec, "lookdown")
        p = sum(q for key, q in law.items() if key[0].count(0) == 2)
        assert p == Fraction(2, 3)
        assert all(key[0][0] == 0 for key in law)

    def test_completely_neutral_is_uniform(self, spec233):
        assert exact_labelled_distribution(spec233, "completely-neutral") == brute_completely_neutral(spec233)

    def test_completely_neutral_small(self):
        spec = validate_spec({"X": (3, 3, 2), "litters": ((2, 1, 0), (1, 1, 0))})
        assert exact_labelled_distribution(spec, "completely-neutral") == brute_completely_neutral(spec)

    def test_three_laws_agree(self, spec233):
        laws = [exact_unlabelled_distribution(spec233, s) for s in SAMPLERS]
        assert laws[0] == laws[1] == laws[2]
        assert sum(laws[0].values()) == 1

    def test_budget(self, spec233):
        with pytest.raises(BudgetExceeded):
            exact_labelled_distribution(spec233, "completely-neutral", budget=10)

    def test_budget_env(self, spec233, monkeypatch):
        monkeypatch.setenv("LOOKDOWN_ENUM_BUDGET", "5")
        with pytest.raises(BudgetExceeded):
            exact_labelled_distribution(spec233, "lookdown")


class TestCanonicalForm:
    def test_isomorphic_relabel(self, spec233):
        a = Genealogy(spec233, [np.array([0, 0, 1]), np.array([0, 0, 1])])
        b = Genealogy(spec233, [np.array([1, 0, 1]), np.array([2, 2, 0])])
        assert canonical_form(a) == canonical_form(b)

    def test_distinguishes(self, spec233):
        a = Genealogy(spec233, [np.array([0, 0, 1]), np.array([0, 0, 1])])
        b = Genealogy(spec233, [np.array([0, 0, 1]), np.array([2, 2, 0])])
        assert canonical_form(a) != canonical_form(b)


class TestSerialization:
    def test_round_trip(self):
        g = sample_forward(moran(4, 5), 2)
        h, spine = loads_genealogy(dumps_genealogy(g, spine=[0] * 6))
        assert h == g and spine == [0] * 6

    def test_bad_header(self):
        with pytest.raises(ValueError):
            loads_genealogy("nope\n")


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(1, 6), st.integers(0, 2**32))
def test_forward_sampler_valid_on_random_moran(N, cap, seed):
    spec = moran(N, cap)
    g = sample(spec, seed, "forward")
    Genealogy(spec, g.parents)
    for p in g.parents:
        # planar: children of each parent form a contiguous run
        assert np.all(np.diff(p) >= 0)


def test_budget_message_is_short():
    from lookdown.core import format_count

    assert format_count(123) == "123"
    assert format_count(10**40 + 7) == "about 10^40"
