"""The weighted counting measure with vertex weight ``q**level``."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

import numpy as np

from ._exact import abs_pow, as_float, is_exact
from .errors import ContainmentError
from .tree import TreeTruncation, Vertex


def _qpow(q: int, k: int):
    return q**k if k >= 0 else Fraction(1, q ** (-k))


class WeightedMeasure:
    """Exact vertex weights ``q**level(x)`` on a truncation.

    ``weights`` is an object array of Python ints (or ``Fraction`` when some
    level is negative); ``fweights`` is the same as float64 for numerical work.
    """

    def __init__(self, tree: TreeTruncation):
        self.tree = tree
        q = tree.q
        self.depth_weights = [_qpow(q, tree.apex_level - k) for k in range(tree.depth + 1)]
        w = np.empty(tree.n, dtype=object)
        for k, wk in enumerate(self.depth_weights):
            w[tree.level_start[k] : tree.level_start[k + 1]] = wk
        self.weights = w
        self.fweights = np.array([float(v) for v in self.depth_weights])[tree.depths]
        self.fweights.flags.writeable = False
        # every full level has mass q**apex_level
        self.total = sum(self.depth_weights[k] * tree.q**k for k in range(tree.depth + 1))

    def __repr__(self):
        return f"WeightedMeasure({self.tree!r})"

    def weight(self, v: Vertex):
        return self.depth_weights[int(self.tree.depths[self.tree.index(v)])]

    def level_weight(self, level: int):
        return _qpow(self.tree.q, level)


def mu_set(m: WeightedMeasure, S: Iterable[Vertex]):
    """Exact measure of a vertex set (duplicates counted once)."""
    idx = {m.tree.index(v) for v in S}
    total = 0
    for i in idx:
        total += m.weights[i]
    return total


def integrate(f, m: WeightedMeasure, S=None):
    """``sum f(x) mu(x)`` over ``S`` (all vertices by default); exact for object arrays."""
    f = np.asarray(f) if not isinstance(f, np.ndarray) else f
    idx = slice(None) if S is None else np.asarray(S, dtype=np.int64)
    if is_exact(f):
        return sum((f[idx] * m.weights[idx]).tolist(), Fraction(0))
    return float(np.dot(as_float(f)[idx], m.fweights[idx]))


def lp_norm_pow(f, m: WeightedMeasure, p):
    """``||f||_p**p``; exact for object arrays and integer ``p``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return integrate(abs_pow(f, p), m)


def lp_norm(f, m: WeightedMeasure, p):
    """``L^p(mu)`` norm for ``p`` in ``[1, inf]``.

    Exact (a ``Fraction``) for object arrays when ``p`` is 1 or infinite;
    otherwise a float.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if np.isinf(p):
        if is_exact(f):
            return max((abs(v) for v in f), default=Fraction(0))
        return float(np.max(np.abs(f))) if len(f) else 0.0
    s = lp_norm_pow(f, m, p)
    if p == 1:
        return s
    return float(s) ** (1.0 / float(p))


# -- spheres, balls and doubling ------------------------------------------------


def sphere_measure(q: int, level: int, r: int):
    """Closed form ``q**(level+r-1) * (1+q)``; ``r = 0`` gives the single vertex."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0:
        return _qpow(q, level)
    return _qpow(q, level + r - 1) * (1 + q)


def ball_measure(q: int, level: int, r: int):
    """Closed form ``q**level * (q**(r+1) + q**r - 2) / (q-1)``."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    return _qpow(q, level) * Fraction(q ** (r + 1) + q**r - 2, q - 1)


def _check_room(tree: TreeTruncation, i: int, r: int):
    k = int(tree.depths[i])
    if k < r or k + r > tree.depth:
        raise ContainmentError(
            f"sphere/ball of radius {r} around {tree.label(i)!r} (depth {k}) "
            f"does not fit in a cone of depth {tree.depth}"
        )


def enumerate_sphere(tree: TreeTruncation, x0: Vertex, r: int) -> np.ndarray:
    i = tree.index(x0)
    return np.nonzero(tree.distances_from(i) == r)[0]


def enumerate_ball(tree: TreeTruncation, x0: Vertex, r: int) -> np.ndarray:
    i = tree.index(x0)
    return np.nonzero(tree.distances_from(i) <= r)[0]


def mu_sphere(m: WeightedMeasure, x0: Vertex, r: int, check: bool = False):
    """Closed-form sphere measure; requires the whole sphere inside the truncation.

    With ``check=True`` the enumerated sphere mass is compared as well.
    """
    tree = m.tree
    i = tree.index(x0)
    _check_room(tree, i, r)
    value = sphere_measure(tree.q, int(tree.levels[i]), r)
    if check:
        enumerated = mu_set(m, enumerate_sphere(tree, i, r))
        assert enumerated == value, (enumerated, value)
    return value


def mu_ball(m: WeightedMeasure, x0: Vertex, r: int, check: bool = False):
    tree = m.tree
    i = tree.index(x0)
    _check_room(tree, i, r)
    value = ball_measure(tree.q, int(tree.levels[i]), r)
    if check:
        enumerated = mu_set(m, enumerate_ball(tree, i, r))
        assert enumerated == value, (enumerated, value)
    return value


def doubling_ratio(m: WeightedMeasure, x0: Vertex, r: int) -> Fraction:
    """``mu(B_2r(x0)) / mu(B_r(x0))``, both balls inside the truncation."""
    return Fraction(mu_ball(m, x0, 2 * r)) / Fraction(mu_ball(m, x0, r))


def ball_doubling_ratio(q: int, r: int) -> Fraction:
    """Level-independent value of the doubling ratio at radius ``r``."""
    return Fraction(q ** (2 * r + 1) + q ** (2 * r) - 2, q ** (r + 1) + q**r - 2)


def local_doubling_constant(q: int, R: int) -> Fraction:
    """``C_R`` bounding the doubling ratio for all radii ``r <= R``."""
    return ball_doubling_ratio(q, R)
