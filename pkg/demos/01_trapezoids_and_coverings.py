"""Trapezoids, Calderon-Zygmund sets and the greedy covering of a level set.

Run with ``python demos/01_trapezoids_and_coverings.py``.
"""
from fractions import Fraction

import numpy as np

from czhardy import CZSet, TreeTruncation, WeightedMeasure, admissible_trapezoids, cz_covering, mu_set
from czhardy._exact import as_exact

# A binary tree cut off five levels below its apex.  Vertices are words over
# {0, 1}; the apex is the empty word and the weight of a vertex is q**level.
tree = TreeTruncation(2, 5)
m = WeightedMeasure(tree)
print(tree.n, "vertices, total measure", m.total)

# An admissible trapezoid of height h below x keeps the descendants at depth
# h..2h-1, so its measure is h times the weight of its root.
fam = admissible_trapezoids(tree)
print(len(fam), "admissible trapezoids (degenerate singletons included)")
R = next(R for R in fam if R.h == 2)
print(R, "measure", R.measure, "= h * width =", R.h * R.width)

# Its envelope stretches the depth window to ceil(h/2)..4h-1 and is never
# more than four times heavier.
cz = CZSet(tree, "", 2)
print(cz, "depth window", cz.delta_range, "measure", cz.measure, "<= 4 *", 2 * cz.width)

# Cover the set where the maximal function of |f|^2 exceeds lambda^2.
rng = np.random.default_rng(7)
f = as_exact(rng.integers(-9, 10, tree.n) * (rng.random(tree.n) < 0.3))
for lam in (Fraction(1), Fraction(3), Fraction(6)):
    cov = cz_covering(f, m, 2, lam)
    facts = cov.certify(m)
    E = cov.envelope_union()
    print(f"lambda={lam}: |level set|={len(cov.level_set)}, selected={len(cov.selected)}, "
          f"mu(E)={mu_set(m, E)} <= 4||f||^2/lambda^2={4 * cov.norm_p_pow / lam**2}")
    print("   certified:", {k: str(v) for k, v in facts.items()})
