"""Atoms, their decomposition into bounded atoms, and the K-functional of (H^1, L^inf).

Run with ``python demos/02_atoms_and_k_functional.py`` (about ten seconds).
"""
import math
from fractions import Fraction

import numpy as np

from czhardy import TreeTruncation, WeightedMeasure
from czhardy.hardy import atomic_decompose, default_alpha, h1_norm_upper_bound, proof_constant, random_atom
from czhardy.interpolation import interpolation_exponent_report, power_law_profile

tree = TreeTruncation(3, 6)
m = WeightedMeasure(tree)
rng = np.random.default_rng(1)

# A random (1,2)-atom: mean zero, supported in a CZ set, L^2-normalized.
a = random_atom(m, rng, p=2, exact=True)
print("atom on", a.support)

# With the default stage parameter the atom is already bounded by alpha, so
# one bounded atom carries it; the coefficient is sup|a| * mu(support).
alpha = default_alpha(3, 2)
dec = atomic_decompose(a, m)
print("alpha =", alpha, " terms:", len(dec.terms), " certified:", dec.certified)
print("coefficient sum", float(dec.coefficient_sum), "vs series constant", proof_constant(3, 2, alpha))

# A small alpha (below the convergence threshold) forces genuine multi-stage splitting.
dec_small = atomic_decompose(a, m, alpha=Fraction(11, 10), max_depth=3, enforce_threshold=False)
for st in dec_small.stages:
    print(f"  stage {st.stage}: {st.atoms_emitted} atoms, {st.pieces_out} pieces left, "
          f"residual L1 {float(st.residual_l1):.3e} (bound {st.residual_bound:.3e})")
print("H^1 upper bound:", h1_norm_upper_bound(a.values, m, 2, support=a.support).value)

# K(t, f) <= min over lambda of ||b^lambda||_{H^1} + t ||g^lambda||_inf.  For a
# function with power-law level sets the bound grows like t^(1/2).
flat = TreeTruncation(3, 6, apex_level=0)
mf = WeightedMeasure(flat)
f = power_law_profile(mf, np.random.default_rng(0), p=2)
rep = interpolation_exponent_report(f, mf, 2, math.inf, h1_options=dict(alpha=2, enforce_threshold=False, max_depth=8))
print(f"log-log slope {rep['slope']:.3f} (theta = {rep['theta']}),"
      f" optimal lambda slope {rep['lambda_star_slope']:.3f}, sup t^-theta K / ||f||_2 = {rep['sup_ratio']:.3f}")
for t, k in list(zip(rep["t"], rep["k_bound"]))[::3]:
    print(f"  t={t:8.4f}  K<= {k:.4f}")
