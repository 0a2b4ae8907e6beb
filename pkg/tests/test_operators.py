import math
from fractions import Fraction

import numpy as np
import pytest

from czhardy.errors import ContainmentError
from czhardy.geometry import CZSet, cz_sets
from czhardy.hardy import random_atom
from czhardy.measure import WeightedMeasure
from czhardy.operators import (
    MultiplierSpec,
    OperatorMatrix,
    bump,
    gradient,
    h1_to_l1_ratio,
    hormander_integral,
    hormander_sup,
    inner,
    laplacian,
    mikhlin_hormander_estimate,
    named_multiplier,
    riesz_transform,
    self_adjointness_residual,
    sobolev_norm,
    spectral_multiplier,
    worker_count,
)
from czhardy.tree import TreeTruncation

from conftest import words


def laplacian_by_formula(t):
    """Matrix of f(x) - (2 sqrt q)^-1 sum_{y~x} q^((l(y)-l(x))/2) f(y), built from words."""
    q = t.q
    A = np.eye(t.n)
    for w in words(q, t.depth):
        x = t.index(w)
        nbrs = ([w[:-1]] if w else []) + ([w + str(a) for a in range(q)] if len(w) < t.depth else [])
        for u in nbrs:
            y = t.index(u)
            A[x, y] -= q ** ((t.level(u) - t.level(w)) / 2) / (2 * math.sqrt(q))
    return A


@pytest.fixture(scope="module")
def lap36():
    t = TreeTruncation(3, 6)
    return laplacian(t)


@pytest.mark.parametrize("q,D", [(2, 5), (3, 4)])
def test_laplacian_matches_formula(q, D):
    t = TreeTruncation(q, D)
    L = laplacian(t)
    assert np.allclose(L.matrix, laplacian_by_formula(t), atol=1e-15)
    assert L.matrix.sum(axis=1)[0] == pytest.approx(1 - q * 0.5 / q)


def test_edge_symmetry_exact():
    # parent coefficient 1/2, child coefficient 1/(2q): A(x,y) q^l(x) = A(y,x) q^l(y) on every edge
    t = TreeTruncation(3, 4)
    q = t.q
    for c in range(1, t.n):
        p = int(t.parent[c])
        lc, lp = t.level(c), t.level(p)
        assert Fraction(-1, 2) * Fraction(q) ** lc == Fraction(-1, 2 * q) * Fraction(q) ** lp


def test_symmetrized_is_shifted_adjacency():
    t = TreeTruncation(3, 5)
    L = laplacian(t)
    d = np.sqrt(L.m.fweights)
    conj = L.matrix * d[:, None] / d[None, :]
    adj = np.zeros((t.n, t.n))
    for c in range(1, t.n):
        adj[c, t.parent[c]] = adj[t.parent[c], c] = 1
    assert np.allclose(conj, np.eye(t.n) - adj / (2 * math.sqrt(3)), atol=1e-14)
    assert np.allclose(conj, L.symmetric, atol=1e-14)


def test_self_adjoint_random(lap36):
    rng = np.random.default_rng(0)
    m = lap36.m
    for _ in range(5):
        f, g = rng.normal(size=(2, m.tree.n))
        scale = math.sqrt(inner(f, f, m) * inner(g, g, m))
        assert self_adjointness_residual(lap36, f, g) <= 1e-10 * scale


@pytest.mark.parametrize("q,D", [(2, 5), (2, 7), (3, 5)])
def test_spectrum_extremes_match_radial_path(q, D):
    # radial functions reduce the adjacency to a weighted path on D+1 nodes with edge weight sqrt(q);
    # its top eigenvalue 2 sqrt(q) cos(pi/(D+2)) is the top of the whole tree
    L = laplacian(TreeTruncation(q, D))
    lam = L.eigh[0]
    path = np.diag(np.full(D, math.sqrt(q)), 1)
    top = np.linalg.eigvalsh(path + path.T).max()
    assert lam.min() == pytest.approx(1 - top / (2 * math.sqrt(q)), abs=1e-10)
    assert lam.max() == pytest.approx(1 + top / (2 * math.sqrt(q)), abs=1e-10)
    assert lam.min() == pytest.approx(1 - math.cos(math.pi / (D + 2)), abs=1e-10)
    assert 0 < lam.min() and lam.max() < 2


def test_identity_and_constant_multipliers(lap36):
    I = spectral_multiplier(lap36, MultiplierSpec.constant(1.0))
    assert np.allclose(I.matrix, np.eye(lap36.tree.n), atol=1e-10)
    assert np.allclose(I.kernel, np.diag(1 / lap36.m.fweights), rtol=1e-9, atol=1e-12)
    L2 = spectral_multiplier(lap36, MultiplierSpec.identity())
    assert np.allclose(L2.matrix, lap36.matrix, atol=1e-10)


def test_heat_against_taylor_series(lap36):
    H = spectral_multiplier(lap36, MultiplierSpec.heat(1.0)).matrix
    A = lap36.matrix
    term = np.eye(A.shape[0])
    series = term.copy()
    for k in range(1, 31):
        term = -term @ A / k
        series += term
    assert np.abs(H - series).max() < 1e-8
    # a Markov-type operator: preserves positivity of the constant and contracts L^1
    one = np.ones(A.shape[0])
    assert np.all(H @ one > 0) and np.all(H @ one <= 1 + 1e-12)


def test_ring_homomorphism(lap36):
    M1, M2 = MultiplierSpec.heat(0.7), MultiplierSpec.power(3)
    prod = spectral_multiplier(lap36, MultiplierSpec.product(M1, M2)).matrix
    both = spectral_multiplier(lap36, M1).matrix @ spectral_multiplier(lap36, M2).matrix
    assert np.abs(prod - both).max() < 1e-9


def test_named_multipliers():
    assert named_multiplier("heat", t=2.0)(np.array([1.0]))[0] == pytest.approx(math.exp(-2))
    assert named_multiplier("power", k=2)(np.array([1.0]))[0] == 0.25
    with pytest.raises(ValueError):
        named_multiplier("nope")


def test_gradient_examples():
    t = TreeTruncation(3, 5)
    assert np.all(gradient(t, np.full(t.n, 4.0)) == 0)
    g = gradient(t, t.levels.astype(float))
    interior = (t.depths > 0) & (t.depths < t.depth)
    assert np.all(g[interior] == t.q + 1)
    assert g[0] == t.q and np.all(g[t.depths == t.depth] == 1)


def test_gradient_random_oracle():
    t = TreeTruncation(2, 5)
    f = np.random.default_rng(1).normal(size=t.n)
    ref = [sum(abs(f[y] - f[x]) for y in t.neighbors(x)) for x in range(t.n)]
    assert np.allclose(gradient(t, f), ref)


def test_riesz_on_eigenvector(lap36):
    R = riesz_transform(lap36)
    lam, V = lap36.eigh
    d = np.sqrt(lap36.m.fweights)
    for k in (0, 17, len(lam) - 1):
        v = V[:, k] / d              # eigenfunction of L
        expect = gradient(lap36.tree, v / math.sqrt(lam[k]))
        assert np.allclose(R(v), expect, atol=1e-9)
    assert np.all(R(np.zeros(lap36.tree.n)) == 0)


def brute_hormander(T, cz, y, z):
    t = cz.tree
    star = set(cz.dilate().vertices.tolist())
    return sum(abs(T.kernel[x, y] - T.kernel[x, z]) * T.m.fweights[x] for x in range(t.n) if x not in star)


def test_hormander_integral_basics():
    t = TreeTruncation(3, 6)
    L = laplacian(t)
    H = spectral_multiplier(L, MultiplierSpec.heat(1.0))
    cz = CZSet(t, "1", 1)
    y, z = cz.vertices[0], cz.vertices[-1]
    assert hormander_integral(H, cz, y, y) == 0
    ident = OperatorMatrix(L.m, np.eye(t.n))
    assert hormander_integral(ident, cz, y, z) == 0
    assert hormander_integral(H, cz, y, z) == pytest.approx(brute_hormander(H, cz, y, z), rel=1e-12)
    with pytest.raises(ContainmentError):
        hormander_integral(H, cz, 0, y)


def test_hormander_sup_brute_force():
    t = TreeTruncation(2, 7)
    H = spectral_multiplier(laplacian(t), MultiplierSpec.heat(1.0))
    sets = cz_sets(t, include_degenerate=False, interior=True)
    sweep = hormander_sup(H, sets, threads=2)
    best = max(brute_hormander(H, cz, y, z) for cz in sets for y in cz.vertices for z in cz.vertices)
    assert sweep.value == pytest.approx(best, rel=1e-12)
    assert sweep.sets_checked == len(sets)
    w = sweep.witness
    assert brute_hormander(H, CZSet(t, w["set"]["root_word"], w["set"]["h"]), t.index(w["y"]), t.index(w["z"])) \
        == pytest.approx(best, rel=1e-12)
    assert set(sweep.to_json()) == {"sup", "witness", "sets_checked", "per_height"}


def test_ratio_identity_and_zero():
    t = TreeTruncation(3, 6)
    m = WeightedMeasure(t)
    rng = np.random.default_rng(0)
    atoms = [random_atom(m, rng, p=math.inf) for _ in range(20)]
    ident = OperatorMatrix(m, np.eye(t.n))
    assert h1_to_l1_ratio(ident, atoms).max_ratio <= 1 + 1e-12
    zero = OperatorMatrix(m, np.zeros((t.n, t.n)))
    assert h1_to_l1_ratio(zero, atoms).max_ratio == 0


def test_split_bound_dominates(lap36):
    # on the dilate by Cauchy-Schwarz, off it by the vanishing mean of the atom
    m = lap36.m
    rng = np.random.default_rng(3)
    atoms = [random_atom(m, rng, p=math.inf, interior=True) for _ in range(15)]
    for M in (MultiplierSpec.heat(1.0), MultiplierSpec.power(2)):
        rep = h1_to_l1_ratio(spectral_multiplier(lap36, M), atoms)
        for r, a, b in zip(rep.ratios, rep.local_bound, rep.tail_bound):
            assert r <= a + b + 1e-12
        assert rep.to_json()["max_split_bound"] >= rep.max_ratio


def test_riesz_ratio_without_split(lap36):
    m = lap36.m
    atoms = [random_atom(m, np.random.default_rng(s), p=math.inf, interior=True) for s in range(5)]
    rep = h1_to_l1_ratio(riesz_transform(lap36), atoms)
    assert rep.local_bound is None and 0 < rep.max_ratio < math.inf


@pytest.mark.slow
def test_bounded_multiplier_ratio_stable_in_depth():
    out = []
    for D in (7, 8):
        t = TreeTruncation(2, D)
        L = laplacian(t)
        T = spectral_multiplier(L, MultiplierSpec.power(2))
        rng = np.random.default_rng(42)
        atoms = [random_atom(L.m, rng, p=math.inf, interior=True) for _ in range(60)]
        out.append(h1_to_l1_ratio(T, atoms, split=False).max_ratio)
    assert out[1] <= 1.25 * out[0]


def test_bump_support():
    x = np.linspace(0, 5, 501)
    b = bump(x)
    assert np.all(b[(x <= 0.5) | (x >= 4)] == 0) and np.all(b[(x > 0.55) & (x < 3.9)] > 0)


def test_sobolev_norm_of_sine():
    # a pure mode exp(i xi x) has norm (1+xi^2)^(s/2) times its L^2 norm
    N, L = 1024, 2 * np.pi
    h = L / N
    x = np.arange(N) * h
    u = np.sin(3 * x)
    l2 = math.sqrt(L / 2)
    assert sobolev_norm(u, h, 0) == pytest.approx(l2, rel=1e-10)
    assert sobolev_norm(u, h, 2) == pytest.approx(10 * l2, rel=1e-10)
    assert sobolev_norm(u, h, 1) == pytest.approx(math.sqrt(10) * l2, rel=1e-10)


def test_mikhlin_zero_and_warning():
    assert mikhlin_hormander_estimate(MultiplierSpec.constant(0.0)) == 0
    with pytest.warns(UserWarning):
        mikhlin_hormander_estimate(MultiplierSpec.heat(1.0), s=1.5, N=512)


def test_mikhlin_imaginary_power_increases():
    vals = [mikhlin_hormander_estimate(MultiplierSpec.imaginary_power_parts(s0), N=2048)
            for s0 in (0.5, 1.0, 2.0, 4.0)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_mikhlin_step_diverges_under_refinement():
    step = MultiplierSpec.cutoff(0.0, 1.0)
    vals = [mikhlin_hormander_estimate(step, N=1024, refine=r) for r in range(4)]
    assert all(b > 2 * a for a, b in zip(vals, vals[1:]))
    smooth = [mikhlin_hormander_estimate(MultiplierSpec.heat(1.0), N=1024, refine=r) for r in range(3)]
    assert smooth[-1] == pytest.approx(smooth[0], rel=1e-3)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("CZHARDY_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("CZHARDY_THREADS", "junk")
    assert worker_count() == 1
