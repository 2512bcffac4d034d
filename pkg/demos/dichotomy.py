"""
When can the base path be identified?
=====================================

In a lookdown the vertex 0 path is special.  Looking only at the unlabelled
genealogy, the best guess for which vertex of generation n lies on it is the
vertex with the most descendants at the end of time.  In a fixed-size Moran
population one family takes over, so the guess is right.  In a population
that doubles every generation, every vertex keeps an equal share and the
chance of a correct guess is 1/X_n.  The coalescent time scale t_n decides
between these cases.
"""

from lookdown import asynchronous, coalescent_scale, dichotomy_experiment, moran, synchronous
from lookdown.experiments import detect_fixation
from lookdown import build_lookdown

# Fixed size: t_n grows linearly, the base path wins.
table = dichotomy_experiment(moran(10, 300), [0, 50, 100], horizon=300, reps=300, seed=2)
print(table.to_csv())

# Synchronous doubling: every estimate is exactly 1/X_n.
table = dichotomy_experiment(synchronous(1, 2, 8), range(8), horizon=8, reps=200, seed=3)
print("doubling rho:", table.rho())

# One individual with X_n + 1 children per step: the population doubles,
# s_n tends to 1/4 so t_n diverges, yet no generation ever fixes.
spec = asynchronous(1, "double", 16)
sc = coalescent_scale(spec)
print("s_15 =", float(sc.s[15]), " t_16 =", float(sc.t[16]))
g = build_lookdown(spec, seed=4)
print("fixation of generations 1..6:", [detect_fixation(g, n) for n in range(1, 7)])
