"""
Three samplers, one unlabelled law
==================================

A genealogy is fixed by its population sizes and litter sizes.  The forward
sampler hands out litters in a random order and lists children
contiguously.  The lookdown keeps the largest family on vertex 0 and sorts
families by their least child.  The completely neutral sampler is a uniform
relabelling of the lookdown.  Forgetting labels, all three agree exactly.
"""

from collections import Counter

from lookdown import (
    canonical_form,
    distribution_equality_test,
    exact_unlabelled_distribution,
    lookdown_coupling,
    moran,
    sample,
    validate_spec,
)

spec = validate_spec({"X": (2, 3, 3), "litters": ((2, 1), (2, 1, 0))})

# Exact laws over isomorphism classes, in rational arithmetic.
laws = {s: exact_unlabelled_distribution(spec, s) for s in ("forward", "lookdown", "completely-neutral")}
for shape in sorted(laws["forward"], key=str):
    print(shape, *(laws[s][shape] for s in laws))
print("identical:", laws["forward"] == laws["lookdown"] == laws["completely-neutral"])

# The same comparison by sampling, with a two-sample chi-square test.
small = moran(4, 3)
draws = {s: Counter(canonical_form(sample(small, i, s)) for i in range(3000)) for s in ("forward", "lookdown")}
report = distribution_equality_test(draws["forward"], draws["lookdown"])
print(f"{len(draws['forward'])} shapes, p = {report.p_value:.3f}, decision: {report.decision}")

# The coupling puts a forward genealogy and a lookdown on one probability
# space; they differ by a relabelling sigma of every generation.
pair = lookdown_coupling(moran(4, 5), seed=1)
print("coupled pair consistent:", pair.check())
print("preimage of the base path in the forward genealogy:", pair.base_preimage())
