"""
The spine of a size-biased Galton-Watson tree
=============================================

Size-biasing a Galton-Watson tree by its generation sizes gives a tree with a
distinguished infinite path, the spine.  Building a lookdown on the
size-biased population sizes and pulling the base path back through the
coupling produces the same (tree, spine) law.  Here it is checked exactly on
critical binary branching up to generation 3.
"""

from lookdown import OffspringDistribution, sample_spinal, spine_diagnostics
from lookdown.gw import exact_spinal_law, exact_spine_via_lookdown_law

d = OffspringDistribution.from_pmf(["1/2", "0", "1/2"])
print(spine_diagnostics(d).to_dict())

a = exact_spinal_law(d, 3)
b = exact_spine_via_lookdown_law(d, 3)
print(f"{len(a)} outcomes, laws equal: {a == b}")

t = sample_spinal(d, seed=7, cap=6)
print("generation sizes:", t.genealogy.X)
print("spine           :", t.spine)
