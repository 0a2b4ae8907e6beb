import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from czhardy._exact import as_exact
from czhardy.errors import ParameterError
from czhardy.geometry import CZSet
from czhardy.hardy import (
    Atom,
    _rational_root_below,
    alpha_admissible,
    alpha_threshold,
    atom_checks,
    atomic_decompose,
    default_alpha,
    h1_norm_upper_bound,
    proof_constant,
    random_atom,
    split_mean_zero,
    validate_atom,
)
from czhardy.measure import WeightedMeasure, integrate, lp_norm, lp_norm_pow
from czhardy.tree import TreeTruncation


def spiky_atom(m, Q, height, p=2):
    """Exact (1,p)-atom on Q: one tall spike at a bottom vertex balanced by a constant."""
    t = m.tree
    f = as_exact(np.zeros(t.n, dtype=int))
    idx = Q.vertices
    spike = int(idx[-1])
    f[spike] = Fraction(height)
    rest = [int(i) for i in idx if i != spike]
    mass = Fraction(height) * m.weights[spike] / sum(m.weights[i] for i in rest)
    for i in rest:
        f[i] = -mass
    scale = _rational_root_below(Fraction(1) / (Fraction(Q.measure) ** (p - 1) * lp_norm_pow(f, m, p)), p)
    return Atom(Q, f * scale, p)


def test_constructed_atom_valid():
    t = TreeTruncation(2, 7)
    m = WeightedMeasure(t)
    cz = CZSet(t, "", 2)
    A = [i for i in cz.vertices if t.label(i).startswith("0")]
    B = [i for i in cz.vertices if t.label(i).startswith("1")]
    f = as_exact(np.zeros(t.n, dtype=int))
    muA = sum(m.weights[i] for i in A)
    muB = sum(m.weights[i] for i in B)
    for i in A:
        f[i] = Fraction(1, muA)
    for i in B:
        f[i] = -Fraction(1, muB)
    sup = max(abs(v) for v in f)
    a = Atom(cz, f / (sup * cz.measure))
    assert validate_atom(a, m)
    assert max(abs(v) for v in a.values) == Fraction(1, cz.measure)


def test_zero_and_non_mean_zero():
    t = TreeTruncation(2, 5)
    m = WeightedMeasure(t)
    cz = CZSet(t, "0", 1)
    assert validate_atom(Atom(cz, as_exact(np.zeros(t.n, dtype=int))), m)
    chi = as_exact(np.zeros(t.n, dtype=int))
    chi[cz.vertices] = Fraction(1, cz.measure)
    checks = atom_checks(Atom(cz, chi), m)
    assert checks == {"supported": True, "size": True, "mean_zero": False}
    leak = as_exact(np.zeros(t.n, dtype=int))
    leak[0], leak[t.index("1")] = Fraction(1, 1000), -Fraction(1, 1000) * m.weights[0] / m.weights[t.index("1")]
    assert not atom_checks(Atom(cz, leak), m)["supported"]


@given(st.integers(0, 10**6), st.sampled_from([math.inf, 2, 3]))
def test_random_atoms_valid(seed, p):
    t = TreeTruncation(3, 4)
    m = WeightedMeasure(t)
    a = random_atom(m, np.random.default_rng(seed), p=p, exact=True)
    assert validate_atom(a, m)
    if math.isinf(p) and any(v != 0 for v in a.values):
        assert lp_norm(a.values, m, math.inf) == Fraction(1, a.support.measure)


def test_alpha_threshold_values():
    assert default_alpha(3, 2) == 4896
    X = 4 * 24 * 3 * 17
    assert 4896 >= X > 4895
    assert alpha_admissible(4896, 3, 2)
    assert not alpha_admissible(2 * 24 * 3 * 17, 3, 2)     # exactly the threshold
    assert alpha_threshold(3, 2) == pytest.approx(2 * 24 * 3 * 17)
    assert proof_constant(3, 2, 100) == math.inf
    C = proof_constant(3, 2, 4896)
    r = 4 * 2 * 18 * 17 / 4896
    assert C == pytest.approx(16 * math.sqrt(18) * 4896 / (1 - r))


def test_parameter_errors(tree36):
    t, m = tree36
    a = random_atom(m, np.random.default_rng(0), p=2)
    with pytest.raises(ParameterError):
        atomic_decompose(a, m, alpha=50)
    with pytest.raises(ParameterError):
        atomic_decompose(Atom(a.support, a.values, math.inf), m)


def test_zero_atom_decomposes_to_nothing(tree36):
    t, m = tree36
    a = Atom(CZSet(t, "1", 1), as_exact(np.zeros(t.n, dtype=int)), 2)
    dec = atomic_decompose(a, m)
    assert dec.terms == [] and not any(v != 0 for v in dec.residual)


def test_one_shot_when_sup_below_alpha(tree36):
    t, m = tree36
    a = random_atom(m, np.random.default_rng(4), p=2, exact=True)
    dec = atomic_decompose(a, m)
    assert len(dec.terms) == 1 and dec.pending == []
    coef, atom = dec.terms[0]
    assert coef == lp_norm(a.values, m, math.inf) * a.support.measure
    assert validate_atom(atom, m)
    assert all(u == v for u, v in zip(dec.reconstruct(), a.values))
    assert dec.certified


@pytest.mark.parametrize("alpha,height", [(8, 400), (3, 60)])
def test_multistage_small_alpha(alpha, height):
    t = TreeTruncation(3, 7)
    m = WeightedMeasure(t)
    Q = CZSet(t, "", 2)
    a = spiky_atom(m, Q, height)
    assert validate_atom(a, m)
    prev = None
    for depth in (1, 2, 3):
        dec = atomic_decompose(a, m, alpha=alpha, max_depth=depth, enforce_threshold=False)
        assert all(u == v for u, v in zip(dec.reconstruct(), a.values))
        assert dec.certified, [s.to_json() for s in dec.stages]
        for _, at in dec.terms:
            assert at.p == math.inf and validate_atom(at, m)
        resid = lp_norm(dec.residual, m, 1)
        if prev is not None:
            assert resid <= prev
        prev = resid
    assert any(s.coverings_used for s in dec.stages)


def test_h1_bound_of_infinity_atom_is_one(tree36):
    t, m = tree36
    a = random_atom(m, np.random.default_rng(2), p=math.inf)
    b = h1_norm_upper_bound(a.values, m, 2, support=a.support)
    assert b.value == pytest.approx(1.0, rel=1e-12)


def test_h1_bound_below_series_constant(tree36):
    t, m = tree36
    rng = np.random.default_rng(5)
    for _ in range(5):
        a = random_atom(m, rng, p=2)
        b = h1_norm_upper_bound(a.values, m, 2, support=a.support)
        assert b.value <= b.proof_constant


@pytest.mark.parametrize("c", [3.0, -0.25, 17.0])
def test_h1_bound_homogeneous(tree36, c):
    t, m = tree36
    a = random_atom(m, np.random.default_rng(8), p=2)
    b1 = h1_norm_upper_bound(a.values, m, 2, support=a.support).value
    b2 = h1_norm_upper_bound(c * a.values, m, 2, support=a.support).value
    assert b2 == pytest.approx(abs(c) * b1, rel=1e-10)


def test_h1_bound_rejects_nonzero_mean(tree36):
    t, m = tree36
    f = np.zeros(t.n)
    f[5] = 1.0
    with pytest.raises(ValueError):
        h1_norm_upper_bound(f, m)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_split_mean_zero(seed):
    t = TreeTruncation(2, 8)
    m = WeightedMeasure(t)
    rng = np.random.default_rng(seed)
    f = as_exact(np.zeros(t.n, dtype=int))
    f[1:] = rng.integers(-4, 5, t.n - 1) * (rng.random(t.n - 1) < 0.3)
    # make it mean-zero using the vertex "0"
    v = t.index("0")
    f[v] = f[v] - integrate(f, m) / m.weights[v]
    pieces = split_mean_zero(f, m)
    total = as_exact(np.zeros(t.n, dtype=int))
    for F, cz in pieces:
        assert integrate(F, m) == 0
        nz = [i for i in range(t.n) if F[i] != 0]
        assert cz.member_mask(nz).all()
        total = total + F
    assert all(u == v for u, v in zip(total, f))
    bound = h1_norm_upper_bound(np.asarray(f, dtype=float), m)
    assert math.isfinite(bound.value) and bound.value > 0


def test_split_rejects_apex_mass():
    t = TreeTruncation(2, 8)
    m = WeightedMeasure(t)
    f = as_exact(np.zeros(t.n, dtype=int))
    f[0] = 1
    f[t.n - 1] = -m.weights[0]
    with pytest.raises(ValueError):
        split_mean_zero(f, m)
