"""Good/bad splittings ``f = g + b`` and upper bounds for the K-functional of (H^1, L^p1)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._exact import is_exact, is_integral, to_str, zeros_like
from .geometry import CZSet
from .hardy import h1_norm_upper_bound
from .maximal import CoveringResult, cz_covering
from .measure import WeightedMeasure, ball_measure, integrate, lp_norm, lp_norm_pow


@dataclass
class KDecomposition:
    lam: object
    good: np.ndarray
    bad_terms: list[tuple[CZSet, np.ndarray]]
    covering: CoveringResult = field(repr=False)
    certified_bounds: dict = field(default_factory=dict)

    @property
    def bad(self) -> np.ndarray:
        out = zeros_like(self.good)
        for _, fi in self.bad_terms:
            out = out + fi
        return out

    def to_json(self) -> dict:
        return {
            "lambda": to_str(self.lam),
            "pieces": [cz.to_json() for cz, _ in self.bad_terms],
            "bounds": {k: to_str(v) for k, v in self.certified_bounds.items()},
        }


def theta(p, p1) -> float:
    """Exponent with ``1/p = 1 - theta + theta/p1``."""
    inv1 = 0.0 if math.isinf(p1) else 1.0 / p1
    return (1.0 - 1.0 / p) / (1.0 - inv1)


def k_decompose(f, m: WeightedMeasure, p, lam, p1=math.inf, h1_bounds: bool = True,
                h1_options: dict | None = None) -> KDecomposition:
    """Split ``f`` at height ``lam``: bad pieces live on the covering of ``{M|f|^p > lam^p}``.

    With ``U_i`` the envelopes minus earlier envelopes, each bad piece is
    ``f 1_{U_i} - (mean of f 1_{U_i} over R_i) 1_{R_i}`` and the good part is
    what remains.  ``certified_bounds`` records the ratios whose uniform
    boundedness the splitting is meant to show.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if not p > 1:
        raise ValueError("p must exceed 1")
    exact = is_exact(f) and is_integral(p) and not isinstance(lam, float)
    if not exact:
        f = np.asarray(f, dtype=float)
        lam = float(lam)
    cov = cz_covering(f, m, p, lam)
    tree = m.tree
    taken = np.zeros(tree.n, dtype=bool)
    pieces = []
    g = f.copy()
    for R, env in zip(cov.selected, cov.envelopes):
        U = env.vertices_in_tree[~taken[env.vertices_in_tree]]
        taken[U] = True
        fi = zeros_like(f)
        fi[U] = f[U]
        c = integrate(fi, m, U)
        c = Fraction(c) / R.measure if exact else c / float(R.measure)
        fi[R.vertices] = fi[R.vertices] - c
        g = g - fi
        pieces.append((env, fi))
    norm_pp = cov.norm_p_pow
    g_sup = lp_norm(g, m, math.inf)
    bounds = {"g_sup": g_sup, "g_sup_over_lambda": Fraction(g_sup) / lam if exact else g_sup / lam}
    if not math.isinf(p1):
        gp1 = lp_norm_pow(g, m, p1)
        bounds["g_p1_pow"] = gp1
        bounds["g_p1_ratio"] = float(gp1) / (float(lam) ** (p1 - p) * float(norm_pp)) if norm_pp else 0.0
    bounds["g_p1_norm"] = float(lp_norm(g, m, p1))
    if h1_bounds:
        h1 = 0.0
        for env, fi in pieces:
            if any(v != 0 for v in fi):
                h1 += h1_norm_upper_bound(fi, m, p, support=env, **(h1_options or {})).value
        bounds["b_h1_bound"] = h1
        bounds["b_h1_ratio"] = h1 / (float(lam) ** (1 - p) * float(norm_pp)) if norm_pp else 0.0
    return KDecomposition(lam=lam, good=g, bad_terms=pieces, covering=cov, certified_bounds=bounds)


def default_lambda_grid(f, m: WeightedMeasure, p, per_decade: int = 32) -> np.ndarray:
    """Geometric grid from ``||f||_p / mu(V)`` to ``2 ||f||_inf``."""
    lo = float(lp_norm(f, m, p)) / float(m.total)
    hi = 2.0 * float(lp_norm(f, m, math.inf))
    if hi <= 0:
        return np.zeros(0)
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


@dataclass
class KFunctionalTable:
    """``H(lam) = ||b^lam||_{H^1}`` bound and ``G(lam) = ||g^lam||_{p1}`` over a grid of heights."""

    lambdas: np.ndarray
    h1: np.ndarray
    good_norm: np.ndarray

    def values(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.lambdas.size == 0:
            return np.zeros_like(t)
        return np.min(self.h1[None, :] + t[:, None] * self.good_norm[None, :], axis=1)

    def argmin(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.lambdas[np.argmin(self.h1[None, :] + t[:, None] * self.good_norm[None, :], axis=1)]


def k_table(f, m: WeightedMeasure, p, p1=math.inf, lambda_grid=None, h1_options: dict | None = None) -> KFunctionalTable:
    f = np.asarray(f, dtype=float)
    grid = default_lambda_grid(f, m, p) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    h1, gn = [], []
    for lam in grid:
        dec = k_decompose(f, m, p, float(lam), p1=p1, h1_options=h1_options)
        h1.append(dec.certified_bounds["b_h1_bound"])
        gn.append(dec.certified_bounds["g_p1_norm"])
    return KFunctionalTable(np.asarray(grid), np.asarray(h1), np.asarray(gn))


def k_functional_upper(f, m: WeightedMeasure, p, p1, t, lambda_grid=None, h1_options: dict | None = None):
    """``min over lam of ||b^lam||_{H^1} + t ||g^lam||_{p1}``, an upper bound for ``K(t, f)``."""
    vals = k_table(f, m, p, p1, lambda_grid, h1_options).values(t)
    return float(vals[0]) if np.ndim(t) == 0 else vals


def loglog_slope(t, k) -> float:
    t, k = np.asarray(t, dtype=float), np.asarray(k, dtype=float)
    return float(np.polyfit(np.log(t), np.log(k), 1)[0])


def interpolation_exponent_report(f, m: WeightedMeasure, p, p1, t_grid=None, lambda_grid=None,
                                  h1_options: dict | None = None) -> dict:
    """Measured log-log slope of the K bound and ``sup_t t^-theta K(t) / ||f||_p``."""
    th = theta(p, p1)
    t_grid = 2.0 ** np.arange(-6, 7) if t_grid is None else np.asarray(t_grid, dtype=float)
    f = np.asarray(f, dtype=float)
    norm = float(lp_norm(f, m, p))
    if norm == 0:
        return {"theta": th, "slope": 0.0, "sup_ratio": 0.0, "t": t_grid.tolist(),
                "k_bound": [0.0] * len(t_grid), "lambda_star": [0.0] * len(t_grid), "norm_p": 0.0}
    table = k_table(f, m, p, p1, lambda_grid, h1_options)
    k = table.values(t_grid)
    lam_star = table.argmin(t_grid)
    return {
        "theta": th,
        "slope": loglog_slope(t_grid, k),
        "lambda_star_slope": loglog_slope(t_grid, lam_star),
        "sup_ratio": float(np.max(t_grid ** (-th) * k) / norm),
        "t": t_grid.tolist(),
        "k_bound": k.tolist(),
        "lambda_star": lam_star.tolist(),
        "norm_p": norm,
    }


def power_law_profile(m: WeightedMeasure, rng, p=2, mean_zero: bool = True) -> np.ndarray:
    """Random function with ``mu{|f| > s}`` roughly ``s**-p`` across every available scale.

    ``|f(x)|`` is ``mu(B_d(x0))**(-1/p)`` with ``d = d(x, x0)`` for a random
    bottom vertex ``x0``, times random signs and amplitudes in ``[1/2, 3/2]``.
    With ``mean_zero`` the apex value is set to 0 and a constant is removed
    from the other vertices so that the integral vanishes.
    """
    tree = m.tree
    x0 = int(tree.level_start[tree.depth] + rng.integers(tree.q**tree.depth))
    d = tree.distances_from(x0)
    lev = int(tree.levels[x0])
    radii = {int(r): float(ball_measure(tree.q, lev, int(r))) for r in np.unique(d)}
    size = np.array([radii[int(r)] for r in d]) ** (-1.0 / p)
    f = rng.choice([-1.0, 1.0], tree.n) * rng.uniform(0.5, 1.5, tree.n) * size
    if mean_zero:
        f[0] = 0.0
        f[1:] -= integrate(f, m) / float(m.fweights[1:].sum())
    return f
